#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace coirl::world {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Heading in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  [[nodiscard]] Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

double wrap_angle(double a);

Vec2 rotate(Vec2 v, double angle);
// World point -> frame of `pose` (x forward, y left).
Vec2 to_frame(const Pose2D& pose, Vec2 world);
// Frame of `pose` -> world point.
Vec2 from_frame(const Pose2D& pose, Vec2 local);

struct RigidTransform {
  double rotation = 0.0;
  Vec2 translation{};

  [[nodiscard]] Vec2 apply(Vec2 p) const { return rotate(p, rotation) + translation; }
  [[nodiscard]] Pose2D apply(const Pose2D& p) const {
    const Vec2 q = apply(p.position());
    return {q.x, q.y, wrap_angle(p.heading + rotation)};
  }
};

struct LaneProjection {
  double arc = 0.0;      // arc length of the closest point
  double lateral = 0.0;  // signed offset, positive to the left of travel
  double heading = 0.0;  // tangent heading at the closest point
};

// Piecewise-linear path with cumulative arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  [[nodiscard]] const std::vector<Vec2>& points() const { return points_; }
  [[nodiscard]] double length() const { return arc_.empty() ? 0.0 : arc_.back(); }

  // Point at arc length s, extrapolated linearly past either end.
  [[nodiscard]] Vec2 point_at(double s) const;
  [[nodiscard]] double heading_at(double s) const;
  [[nodiscard]] Vec2 normal_at(double s) const;

  // Closest point over the whole polyline.
  [[nodiscard]] LaneProjection project(Vec2 p) const;
  // Closest point restricted to segments overlapping [hint - window, hint + window].
  [[nodiscard]] LaneProjection project_near(Vec2 p, double hint, double window) const;

 private:
  [[nodiscard]] std::size_t segment_at(double s) const;
  [[nodiscard]] LaneProjection project_range(Vec2 p, std::size_t first, std::size_t last) const;

  std::vector<Vec2> points_;
  std::vector<double> arc_;
};

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  [[nodiscard]] bool contains(Vec2 p) const;
};

// Separating-axis test on two oriented rectangles; touching counts as overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

}  // namespace coirl::world
