#include "coirl/world/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "coirl/errors.hpp"
#include "coirl/util/digest.hpp"
#include "coirl/world/collision.hpp"
#include "coirl/world/expert.hpp"

namespace coirl::world {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLaneLength = 160.0;
constexpr double kEgoStartArc = 10.0;
constexpr int kMaxAttempts = 64;

struct DomainProfile {
  double max_curvature;
  double half_width;
  double cruise_lo;
  double cruise_hi;
  int max_agents;
};

DomainProfile profile(Domain d) {
  if (d == Domain::A) return {0.008, 2.0, 5.0, 8.0, 4};
  return {0.035, 1.75, 4.0, 7.0, 10};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Polyline make_centerline(std::mt19937_64& rng, const DomainProfile& p) {
  std::vector<Vec2> pts;
  Vec2 pos{0.0, 0.0};
  double heading = 0.0;
  pts.push_back(pos);
  double piece_left = 0.0;
  double kappa = 0.0;
  const int count = static_cast<int>(kLaneLength);
  for (int i = 0; i < count; ++i) {
    if (piece_left <= 0.0) {
      piece_left = uniform(rng, 15.0, 40.0);
      // The first stretch is kept gentle so the ego starts aligned.
      kappa = i < 15 ? 0.0 : uniform(rng, -p.max_curvature, p.max_curvature);
    }
    heading += kappa;
    pos = pos + Vec2{std::cos(heading), std::sin(heading)};
    pts.push_back(pos);
    piece_left -= 1.0;
  }
  return Polyline(std::move(pts));
}

Pose2D lane_pose(const Polyline& lane, double arc, double lateral, bool reversed = false) {
  const Vec2 c = lane.point_at(arc);
  const Vec2 nrm = lane.normal_at(arc);
  const double h = lane.heading_at(arc);
  const Vec2 p = c + lateral * nrm;
  return {p.x, p.y, wrap_angle(reversed ? h + kPi : h)};
}

AgentTrack make_agent(std::mt19937_64& rng, const Polyline& lane, double half_width, double cruise,
                      std::size_t steps, double dt) {
  AgentTrack track;
  const double u = uniform(rng, 0.0, 1.0);
  track.kind = u < 0.3 ? AgentKind::kLead : u < 0.55 ? AgentKind::kParked : u < 0.8 ? AgentKind::kOncoming
                                                                                   : AgentKind::kCrossing;
  track.footprint = {uniform(rng, 3.8, 5.0), uniform(rng, 1.7, 2.0)};
  track.poses.reserve(steps + 1);
  switch (track.kind) {
    case AgentKind::kLead: {
      const double start = kEgoStartArc + uniform(rng, 15.0, 45.0);
      double speed = uniform(rng, 0.0, 0.8 * cruise);
      const double brake = uniform(rng, 0.0, 1.0) < 0.4 ? uniform(rng, 0.5, 3.0) : 0.0;
      double arc = start;
      for (std::size_t t = 0; t <= steps; ++t) {
        track.poses.push_back(lane_pose(lane, arc, 0.0));
        const double next = std::max(0.0, speed - brake * dt);
        arc += 0.5 * (speed + next) * dt;
        speed = next;
      }
      break;
    }
    case AgentKind::kParked: {
      const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double lateral = side * (half_width + 0.5 * track.footprint.width + uniform(rng, 0.4, 1.5));
      const Pose2D pose = lane_pose(lane, kEgoStartArc + uniform(rng, 10.0, 90.0), lateral);
      track.poses.assign(steps + 1, pose);
      break;
    }
    case AgentKind::kOncoming: {
      const double lateral = half_width + 0.5 * track.footprint.width + uniform(rng, 0.5, 1.5);
      const double speed = uniform(rng, 3.0, 8.0);
      double arc = kEgoStartArc + uniform(rng, 20.0, 120.0);
      for (std::size_t t = 0; t <= steps; ++t) {
        track.poses.push_back(lane_pose(lane, arc, lateral, true));
        arc -= speed * dt;
      }
      break;
    }
    case AgentKind::kCrossing: {
      track.footprint = {0.8, 0.8};
      const double arc = kEgoStartArc + uniform(rng, 20.0, 70.0);
      const double speed = uniform(rng, 0.8, 1.6);
      const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double start_lat = side * (half_width + uniform(rng, 1.0, 8.0));
      const double h = lane.heading_at(arc) + (side > 0 ? -0.5 * kPi : 0.5 * kPi);
      for (std::size_t t = 0; t <= steps; ++t) {
        const double lat = start_lat - side * speed * dt * static_cast<double>(t);
        Pose2D p = lane_pose(lane, arc, lat);
        p.heading = wrap_angle(h);
        track.poses.push_back(p);
      }
      break;
    }
  }
  return track;
}

void attach_expert(Scene& scene, const WorldConfig& cfg) {
  auto roll = script_expert(scene, cfg.scene_steps, cfg.ego_footprint);
  scene.expert_actions = std::move(roll.actions);
  scene.ego_poses = std::move(roll.poses);
  scene.ego_speeds = std::move(roll.speeds);
  scene.ego_arcs = std::move(roll.arcs);
}

Scene transform_track(const Scene& scene, const auto& point_fn, const auto& pose_fn) {
  Scene out = scene;
  std::vector<Vec2> pts;
  pts.reserve(scene.lane.points().size());
  for (const Vec2& p : scene.lane.points()) pts.push_back(point_fn(p));
  out.lane = Polyline(std::move(pts));
  for (auto& agent : out.agents) {
    for (auto& pose : agent.poses) pose = pose_fn(pose);
  }
  out.ego_start = pose_fn(scene.ego_start);
  for (auto& pose : out.ego_poses) pose = pose_fn(pose);
  return out;
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::A ? "A" : "B"; }

Domain domain_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Domain::A;
  if (s == "B" || s == "b") return Domain::B;
  throw ConfigError("unknown domain '" + s + "' (expected A or B)");
}

std::string WorldConfig::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "plan_steps=" << plan_steps << "\nscene_steps=" << scene_steps << "\ntimestep=" << timestep
     << "\nnearest_agents=" << nearest_agents << "\nlane_samples=" << lane_samples
     << "\nlane_lookahead=" << lane_lookahead << "\nego_length=" << ego_footprint.length
     << "\nego_width=" << ego_footprint.width << "\ndrivable_area_collision=" << (drivable_area_collision ? 1 : 0)
     << "\ngenerator=1\n";
  return os.str();
}

WorldConfig WorldConfig::from_canonical_text(const std::string& text) {
  WorldConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed world config line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "plan_steps") cfg.plan_steps = std::stoul(value);
      else if (key == "scene_steps") cfg.scene_steps = std::stoul(value);
      else if (key == "timestep") cfg.timestep = std::stod(value);
      else if (key == "nearest_agents") cfg.nearest_agents = std::stoul(value);
      else if (key == "lane_samples") cfg.lane_samples = std::stoul(value);
      else if (key == "lane_lookahead") cfg.lane_lookahead = std::stod(value);
      else if (key == "ego_length") cfg.ego_footprint.length = std::stod(value);
      else if (key == "ego_width") cfg.ego_footprint.width = std::stod(value);
      else if (key == "drivable_area_collision") cfg.drivable_area_collision = value == "1";
      else if (key == "generator") {
        if (value != "1") throw DataError("unsupported scene generator version " + value);
      } else {
        throw DataError("unknown world config key: " + key);
      }
    } catch (const std::logic_error&) {
      throw DataError("bad value for world config key " + key + ": " + value);
    }
    ++seen;
  }
  if (seen != 10) throw DataError("incomplete world config text");
  if (cfg.canonical_text() != text) throw DataError("world config text is not canonical");
  return cfg;
}

std::string WorldConfig::hash() const { return util::digest_hex(canonical_text()); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool expert_is_sound(const Scene& scene, const WorldConfig& cfg) {
  if (scene.expert_actions.size() != cfg.scene_steps) return false;
  for (std::size_t t = 0; t < scene.ego_poses.size(); ++t) {
    const auto proj = scene.lane.project_near(scene.ego_poses[t].position(), scene.ego_arcs[t], 20.0);
    if (std::abs(proj.lateral) > scene.lane_half_width) return false;
  }
  // Expert trajectory from t=0 compared against agents at steps 1..H.
  std::vector<Vec2> local;
  local.reserve(scene.horizon());
  for (std::size_t t = 1; t < scene.ego_poses.size(); ++t) {
    local.push_back(to_frame(scene.ego_start, scene.ego_poses[t].position()));
  }
  WorldConfig strict = cfg;
  strict.drivable_area_collision = true;
  return !check_collision(local, scene, 0, strict).any();
}

Scene generate_scene(std::uint64_t seed, Domain domain, double difficulty, const WorldConfig& cfg) {
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw ConfigError("difficulty must lie in [0, 1]");
  const DomainProfile prof = profile(domain);
  const auto agent_count = static_cast<std::size_t>(std::lround(difficulty * prof.max_agents));

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(mix_seed(seed, domain == Domain::A ? 0xA : 0xB), static_cast<std::uint64_t>(attempt)));
    Scene scene;
    scene.scene_id = to_string(domain) + "-" + std::to_string(seed);
    scene.seed = seed;
    scene.domain = domain;
    scene.difficulty = difficulty;
    scene.timestep = cfg.timestep;
    scene.lane_half_width = prof.half_width;
    scene.cruise_speed = uniform(rng, prof.cruise_lo, prof.cruise_hi);
    const Polyline local_lane = make_centerline(rng, prof);
    scene.lane = local_lane;
    scene.ego_start = lane_pose(local_lane, kEgoStartArc, 0.0);
    for (std::size_t i = 0; i < agent_count; ++i) {
      scene.agents.push_back(
          make_agent(rng, local_lane, prof.half_width, scene.cruise_speed, cfg.scene_steps, cfg.timestep));
    }
    const RigidTransform tf{uniform(rng, -kPi, kPi), {uniform(rng, -100.0, 100.0), uniform(rng, -100.0, 100.0)}};
    scene = transform_scene(scene, tf);
    attach_expert(scene, cfg);
    if (expert_is_sound(scene, cfg)) return scene;
  }
  throw DataError("scene generation failed for seed " + std::to_string(seed) + " after " +
                  std::to_string(kMaxAttempts) + " attempts");
}

Scene mirror_scene(const Scene& scene, const WorldConfig& cfg) {
  Scene out = transform_track(
      scene, [](Vec2 p) { return Vec2{p.x, -p.y}; },
      [](const Pose2D& p) { return Pose2D{p.x, -p.y, wrap_angle(-p.heading)}; });
  out.scene_id = scene.scene_id + "-mirror";
  attach_expert(out, cfg);
  return out;
}

Scene transform_scene(const Scene& scene, const RigidTransform& tf) {
  Scene out = transform_track(
      scene, [&](Vec2 p) { return tf.apply(p); }, [&](const Pose2D& p) { return tf.apply(p); });
  for (auto& a : out.expert_actions) a = rotate(a, tf.rotation);
  return out;
}

}  // namespace coirl::world
