#pragma once

#include <optional>

#include "coirl/world/scene.hpp"

namespace coirl::world {

struct ExpertParams {
  double headway = 2.0;         // desired time gap to the lead agent, s
  double standstill_gap = 2.5;  // bumper gap kept at rest, m
  double max_brake = 6.0;       // m/s^2
  double max_accel = 2.0;       // m/s^2
  double lookahead_time = 1.2;  // pure-pursuit lookahead, s
  double min_lookahead = 5.0;
  double max_lookahead = 15.0;
  std::size_t prediction_steps = 3;  // lead search also scans this many future agent poses
};

struct ExpertRollout {
  std::vector<Vec2> actions;   // world-frame displacement per step
  std::vector<Pose2D> poses;   // size steps + 1
  std::vector<double> speeds;  // size steps + 1
  std::vector<double> arcs;    // size steps + 1
};

struct LeadInfo {
  std::size_t agent = 0;
  double gap = 0.0;  // bumper-to-bumper distance along the lane, m
};

// Closest agent occupying the ego corridor ahead, at step t or within the
// prediction window.
std::optional<LeadInfo> find_lead(const Scene& scene, std::size_t t, double ego_arc, double ego_length,
                                  const ExpertParams& params = {});

// Pure-pursuit steering toward the centerline plus a gap-keeping speed law:
//   v_target = min(cruise, (gap - standstill_gap) / headway)
// with acceleration limits. Emits one displacement per timestep.
ExpertRollout script_expert(const Scene& scene, std::size_t steps, const Footprint& ego = {},
                            const ExpertParams& params = {});

}  // namespace coirl::world
