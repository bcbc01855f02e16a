#include "coirl/world/collision.hpp"

#include <algorithm>
#include <cmath>

namespace coirl::world {

bool CollisionReport::any() const { return std::any_of(collided.begin(), collided.end(), [](bool b) { return b; }); }

std::vector<OrientedBox> ego_boxes(std::span<const Vec2> world_positions, const Pose2D& start, const Footprint& ego) {
  std::vector<OrientedBox> boxes;
  boxes.reserve(world_positions.size());
  Vec2 prev = start.position();
  double heading = start.heading;
  for (const Vec2& p : world_positions) {
    const Vec2 d = p - prev;
    if (norm(d) >= 1e-3) heading = std::atan2(d.y, d.x);
    boxes.push_back({p, heading, ego.length, ego.width});
    prev = p;
  }
  return boxes;
}

CollisionReport check_collision(std::span<const Vec2> positions, const Scene& scene, std::size_t t0,
                                const WorldConfig& cfg) {
  const std::size_t n = positions.size();
  CollisionReport report;
  report.collided.assign(n, false);
  report.agent_overlap.assign(n, false);
  report.off_road.assign(n, false);

  const Pose2D start = scene.ego_poses.at(t0);
  const double start_arc = scene.ego_arcs.at(t0);
  std::vector<Vec2> world(n);
  for (std::size_t i = 0; i < n; ++i) world[i] = from_frame(start, positions[i]);
  const auto boxes = ego_boxes(world, start, cfg.ego_footprint);
  const double ego_radius = 0.5 * std::hypot(cfg.ego_footprint.length, cfg.ego_footprint.width);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t step = t0 + i + 1;
    for (const auto& agent : scene.agents) {
      std::size_t idx = step;
      if (idx >= agent.poses.size()) {
        idx = agent.poses.size() - 1;
        report.horizon_clamped = true;
      }
      const Pose2D& ap = agent.poses[idx];
      const double agent_radius = 0.5 * std::hypot(agent.footprint.length, agent.footprint.width);
      if (norm(ap.position() - world[i]) > ego_radius + agent_radius) continue;
      const OrientedBox box{ap.position(), ap.heading, agent.footprint.length, agent.footprint.width};
      if (boxes_overlap(boxes[i], box)) {
        report.agent_overlap[i] = true;
        break;
      }
    }
    const double hint = start_arc + positions[i].x;
    const auto proj = scene.lane.project_near(world[i], hint, 30.0);
    report.off_road[i] = std::abs(proj.lateral) > scene.lane_half_width;
    report.collided[i] = report.agent_overlap[i] || (cfg.drivable_area_collision && report.off_road[i]);
  }
  return report;
}

std::vector<CollisionReport> check_collision_batch_serial(std::span<const CollisionQuery> queries,
                                                          const WorldConfig& cfg) {
  std::vector<CollisionReport> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out[i] = check_collision(queries[i].positions, *queries[i].scene, queries[i].t0, cfg);
  }
  return out;
}

std::vector<CollisionReport> check_collision_batch_parallel(std::span<const CollisionQuery> queries,
                                                            const WorldConfig& cfg) {
  std::vector<CollisionReport> out(queries.size());
  const auto count = static_cast<long long>(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    const auto& q = queries[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = check_collision(q.positions, *q.scene, q.t0, cfg);
  }
  return out;
}

}  // namespace coirl::world
