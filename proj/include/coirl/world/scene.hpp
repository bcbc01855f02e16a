#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coirl/world/geometry.hpp"

namespace coirl::world {

enum class Domain { A, B };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

struct Footprint {
  double length = 4.5;
  double width = 1.9;
};

enum class AgentKind { kLead, kParked, kOncoming, kCrossing };

// One pose per 0.5 s step, covering the whole scene horizon (steps 0..H).
struct AgentTrack {
  AgentKind kind = AgentKind::kLead;
  Footprint footprint;
  std::vector<Pose2D> poses;
};

// Shared geometric and observation settings. Everything here is hashed into
// dataset manifests and checkpoints.
struct WorldConfig {
  std::size_t plan_steps = 6;     // n future displacements per record (3 s at 2 Hz)
  std::size_t scene_steps = 20;   // H expert actions per scene
  double timestep = 0.5;
  std::size_t nearest_agents = 6; // K
  std::size_t lane_samples = 8;   // M
  double lane_lookahead = 12.0;
  Footprint ego_footprint{4.5, 1.9};
  bool drivable_area_collision = true;

  [[nodiscard]] std::string canonical_text() const;
  [[nodiscard]] std::string hash() const;
  // Inverse of canonical_text(); throws DataError on unknown or missing keys.
  static WorldConfig from_canonical_text(const std::string& text);
};

struct Scene {
  std::string scene_id;
  std::uint64_t seed = 0;
  Domain domain = Domain::A;
  double difficulty = 0.0;
  double timestep = 0.5;

  Polyline lane;
  double lane_half_width = 2.0;
  std::vector<AgentTrack> agents;

  Pose2D ego_start;
  double cruise_speed = 5.0;

  // Expert rollout: displacement per step in the world frame, and the ego
  // state before each step (size scene_steps + 1).
  std::vector<Vec2> expert_actions;
  std::vector<Pose2D> ego_poses;
  std::vector<double> ego_speeds;
  std::vector<double> ego_arcs;  // lane arc length of each ego pose

  [[nodiscard]] std::size_t horizon() const { return expert_actions.size(); }
};

// Deterministic in (seed, domain, difficulty, config). Domain A: gentle curves
// and sparse traffic; domain B: sharp curves and dense traffic. difficulty = 0
// yields an empty road. Candidates whose expert rollout leaves the lane or
// collides are rejected and re-drawn from a derived seed.
Scene generate_scene(std::uint64_t seed, Domain domain, double difficulty, const WorldConfig& cfg = {});

// Mirror image across the scene's x axis, with the expert re-scripted.
Scene mirror_scene(const Scene& scene, const WorldConfig& cfg = {});

// Applies a rigid motion to every pose and point (expert data transformed, not re-run).
Scene transform_scene(const Scene& scene, const RigidTransform& tf);

// Sanity predicate used by the generator: expert collision-free and in-lane.
bool expert_is_sound(const Scene& scene, const WorldConfig& cfg);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace coirl::world
