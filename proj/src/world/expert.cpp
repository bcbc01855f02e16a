#include "coirl/world/expert.hpp"

#include <algorithm>
#include <cmath>

namespace coirl::world {

std::optional<LeadInfo> find_lead(const Scene& scene, std::size_t t, double ego_arc, double ego_length,
                                  const ExpertParams& params) {
  std::optional<LeadInfo> best;
  for (std::size_t a = 0; a < scene.agents.size(); ++a) {
    const auto& agent = scene.agents[a];
    for (std::size_t k = 0; k <= params.prediction_steps; ++k) {
      const std::size_t step = std::min(t + k, agent.poses.size() - 1);
      const auto proj = scene.lane.project(agent.poses[step].position());
      const double corridor = scene.lane_half_width + 0.5 * agent.footprint.width;
      if (std::abs(proj.lateral) > corridor) continue;
      const double gap = proj.arc - ego_arc - 0.5 * (ego_length + agent.footprint.length);
      if (proj.arc <= ego_arc) continue;
      if (!best || gap < best->gap) best = LeadInfo{a, gap};
    }
  }
  return best;
}

ExpertRollout script_expert(const Scene& scene, std::size_t steps, const Footprint& ego, const ExpertParams& params) {
  ExpertRollout out;
  const double dt = scene.timestep;
  Pose2D pose = scene.ego_start;
  double speed = scene.cruise_speed;
  double arc = scene.lane.project(pose.position()).arc;
  out.poses.push_back(pose);
  out.speeds.push_back(speed);
  out.arcs.push_back(arc);

  for (std::size_t t = 0; t < steps; ++t) {
    double target = scene.cruise_speed;
    if (const auto lead = find_lead(scene, t, arc, ego.length, params)) {
      target = std::min(target, std::max(0.0, (lead->gap - params.standstill_gap) / params.headway));
    }
    const double next_speed = std::clamp(target, std::max(0.0, speed - params.max_brake * dt), speed + params.max_accel * dt);
    const double dist = next_speed * dt;

    const double lookahead =
        std::clamp(params.lookahead_time * std::max(next_speed, speed), params.min_lookahead, params.max_lookahead);
    const Vec2 goal = scene.lane.point_at(arc + lookahead);
    const Vec2 to_goal = goal - pose.position();
    const double alpha = wrap_angle(std::atan2(to_goal.y, to_goal.x) - pose.heading);
    const double curvature = 2.0 * std::sin(alpha) / lookahead;

    Vec2 delta;
    double heading = pose.heading;
    if (std::abs(curvature) < 1e-12) {
      delta = {dist * std::cos(pose.heading), dist * std::sin(pose.heading)};
    } else {
      heading = pose.heading + curvature * dist;
      delta = {(std::sin(heading) - std::sin(pose.heading)) / curvature,
               -(std::cos(heading) - std::cos(pose.heading)) / curvature};
    }
    pose = {pose.x + delta.x, pose.y + delta.y, wrap_angle(heading)};
    speed = next_speed;
    arc = scene.lane.project_near(pose.position(), arc + dist, 20.0).arc;
    out.actions.push_back(delta);
    out.poses.push_back(pose);
    out.speeds.push_back(speed);
    out.arcs.push_back(arc);
  }
  return out;
}

}  // namespace coirl::world
