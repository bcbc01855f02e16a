#pragma once

#include <span>
#include <vector>

#include "coirl/world/scene.hpp"

namespace coirl::world {

struct CollisionReport {
  std::vector<bool> collided;       // per step, agent overlap or (when enabled) off-road
  std::vector<bool> agent_overlap;
  std::vector<bool> off_road;
  bool horizon_clamped = false;     // agents were frozen at their last pose for some step

  [[nodiscard]] bool any() const;
};

// Ego oriented box per future position, heading from consecutive positions
// (the first from the ego position at t0; displacements under 1 mm inherit the
// previous heading, starting from the ego heading).
std::vector<OrientedBox> ego_boxes(std::span<const Vec2> world_positions, const Pose2D& start, const Footprint& ego);

// Step i (0-based) is compared with agent poses at t0 + i + 1. Positions are in
// the ego frame at t0.
CollisionReport check_collision(std::span<const Vec2> positions, const Scene& scene, std::size_t t0,
                                const WorldConfig& cfg);

struct CollisionQuery {
  const Scene* scene = nullptr;
  std::size_t t0 = 0;
  std::vector<Vec2> positions;
};

// Reference kernel and its OpenMP counterpart; results are identical.
std::vector<CollisionReport> check_collision_batch_serial(std::span<const CollisionQuery> queries,
                                                          const WorldConfig& cfg);
std::vector<CollisionReport> check_collision_batch_parallel(std::span<const CollisionQuery> queries,
                                                            const WorldConfig& cfg);

}  // namespace coirl::world
