#include "coirl/world/observe.hpp"

#include <algorithm>
#include <cmath>

#include "coirl/errors.hpp"

namespace coirl::world {
namespace {

constexpr double kSpeedScale = 10.0;
constexpr double kPosScale = 20.0;
constexpr double kSizeScale = 5.0;
constexpr double kLaneScale = 5.0;
constexpr double kCommandDistance = 20.0;
constexpr double kCommandThreshold = 0.2;

Vec2 agent_velocity(const AgentTrack& agent, std::size_t t, double dt) {
  const std::size_t last = agent.poses.size() - 1;
  const std::size_t a = std::min(t, last);
  const std::size_t b = std::min(t + 1, last);
  if (a == b) {
    if (a == 0) return {};
    return (1.0 / dt) * (agent.poses[a].position() - agent.poses[a - 1].position());
  }
  return (1.0 / dt) * (agent.poses[b].position() - agent.poses[a].position());
}

}  // namespace

std::size_t observation_width(const WorldConfig& cfg) {
  return 2 + kAgentFeatures * cfg.nearest_agents + cfg.lane_samples + 3;
}

Command command_at(const Scene& scene, std::size_t t) {
  const double arc = scene.ego_arcs.at(t);
  const double turn = wrap_angle(scene.lane.heading_at(arc + kCommandDistance) - scene.lane.heading_at(arc));
  if (turn > kCommandThreshold) return Command::kLeft;
  if (turn < -kCommandThreshold) return Command::kRight;
  return Command::kStraight;
}

std::vector<double> observe(const Scene& scene, std::size_t t, const WorldConfig& cfg) {
  if (t >= scene.ego_poses.size()) throw UsageError("observe: step " + std::to_string(t) + " beyond horizon");
  std::vector<double> o;
  o.reserve(observation_width(cfg));
  const Pose2D& ego = scene.ego_poses[t];
  const double speed = scene.ego_speeds[t];
  const double arc = scene.ego_arcs[t];
  o.push_back(speed / kSpeedScale);
  o.push_back(wrap_angle(ego.heading - scene.lane.heading_at(arc)));

  struct Candidate {
    double dist;
    std::size_t index;
  };
  std::vector<Candidate> order;
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const auto& poses = scene.agents[i].poses;
    const Vec2 p = poses[std::min(t, poses.size() - 1)].position();
    order.push_back({norm(p - ego.position()), i});
  }
  std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.index < b.index;
  });
  const Vec2 ego_vel{speed * std::cos(ego.heading), speed * std::sin(ego.heading)};
  for (std::size_t k = 0; k < cfg.nearest_agents; ++k) {
    if (k >= order.size()) {
      o.insert(o.end(), kAgentFeatures, 0.0);
      continue;
    }
    const auto& agent = scene.agents[order[k].index];
    const Vec2 rel = to_frame(ego, agent.poses[std::min(t, agent.poses.size() - 1)].position());
    const Vec2 vel = rotate(agent_velocity(agent, t, scene.timestep) - ego_vel, -ego.heading);
    o.push_back(1.0);
    o.push_back(rel.x / kPosScale);
    o.push_back(rel.y / kPosScale);
    o.push_back(vel.x / kSpeedScale);
    o.push_back(vel.y / kSpeedScale);
    o.push_back(agent.footprint.length / kSizeScale);
    o.push_back(agent.footprint.width / kSizeScale);
  }

  for (std::size_t j = 1; j <= cfg.lane_samples; ++j) {
    const double s = arc + cfg.lane_lookahead * static_cast<double>(j) / static_cast<double>(cfg.lane_samples);
    o.push_back(to_frame(ego, scene.lane.point_at(s)).y / kLaneScale);
  }

  const Command cmd = command_at(scene, t);
  o.push_back(cmd == Command::kLeft ? 1.0 : 0.0);
  o.push_back(cmd == Command::kStraight ? 1.0 : 0.0);
  o.push_back(cmd == Command::kRight ? 1.0 : 0.0);
  return o;
}

}  // namespace coirl::world
