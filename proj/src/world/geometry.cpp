#include "coirl/world/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>

#include "coirl/errors.hpp"

namespace coirl::world {

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 to_frame(const Pose2D& pose, Vec2 world) {
  const Vec2 d = world - pose.position();
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

Vec2 from_frame(const Pose2D& pose, Vec2 local) { return rotate(local, pose.heading) + pose.position(); }

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ConfigError("polyline needs at least two points");
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = norm(points_[i] - points_[i - 1]);
    if (d <= 0.0) throw ConfigError("polyline has repeated consecutive points");
    arc_.push_back(arc_.back() + d);
  }
}

std::size_t Polyline::segment_at(double s) const {
  if (s <= 0.0) return 0;
  if (s >= arc_.back()) return points_.size() - 2;
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  return static_cast<std::size_t>(std::distance(arc_.begin(), it)) - 1;
}

Vec2 Polyline::point_at(double s) const {
  const std::size_t i = segment_at(s);
  const Vec2 a = points_[i];
  const Vec2 b = points_[i + 1];
  const double t = (s - arc_[i]) / (arc_[i + 1] - arc_[i]);
  return a + t * (b - a);
}

double Polyline::heading_at(double s) const {
  const std::size_t i = segment_at(s);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

Vec2 Polyline::normal_at(double s) const {
  const double h = heading_at(s);
  return {-std::sin(h), std::cos(h)};
}

LaneProjection Polyline::project_range(Vec2 p, std::size_t first, std::size_t last) const {
  double best = std::numeric_limits<double>::infinity();
  LaneProjection out;
  for (std::size_t i = first; i <= last; ++i) {
    const Vec2 a = points_[i];
    const Vec2 d = points_[i + 1] - a;
    const double len2 = dot(d, d);
    double t = dot(p - a, d) / len2;
    // The end segments extend without bound so points past the ends project cleanly.
    if (i != 0) t = std::max(t, 0.0);
    if (i + 2 != points_.size()) t = std::min(t, 1.0);
    const Vec2 q = a + t * d;
    const double dist2 = dot(p - q, p - q);
    if (dist2 < best) {
      best = dist2;
      const double len = std::sqrt(len2);
      out.arc = arc_[i] + t * len;
      out.lateral = cross(d, p - a) / len;
      out.heading = std::atan2(d.y, d.x);
    }
  }
  return out;
}

LaneProjection Polyline::project(Vec2 p) const { return project_range(p, 0, points_.size() - 2); }

LaneProjection Polyline::project_near(Vec2 p, double hint, double window) const {
  return project_range(p, segment_at(hint - window), segment_at(hint + window));
}

bool OrientedBox::contains(Vec2 p) const {
  const Vec2 local = to_frame({center.x, center.y, heading}, p);
  return std::abs(local.x) <= 0.5 * length && std::abs(local.y) <= 0.5 * width;
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const std::array<Vec2, 4> axes{Vec2{std::cos(a.heading), std::sin(a.heading)},
                                 Vec2{-std::sin(a.heading), std::cos(a.heading)},
                                 Vec2{std::cos(b.heading), std::sin(b.heading)},
                                 Vec2{-std::sin(b.heading), std::cos(b.heading)}};
  const Vec2 d = b.center - a.center;
  // Projected half-extent of a box on a unit axis.
  auto radius = [](const OrientedBox& box, const Vec2& axis) {
    const Vec2 u{std::cos(box.heading), std::sin(box.heading)};
    const Vec2 v{-std::sin(box.heading), std::cos(box.heading)};
    return 0.5 * box.length * std::abs(dot(u, axis)) + 0.5 * box.width * std::abs(dot(v, axis));
  };
  for (const auto& axis : axes) {
    if (std::abs(dot(d, axis)) > radius(a, axis) + radius(b, axis)) return false;
  }
  return true;
}

}  // namespace coirl::world
