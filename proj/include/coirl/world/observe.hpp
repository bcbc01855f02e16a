#pragma once

#include <vector>

#include "coirl/world/scene.hpp"

namespace coirl::world {

enum class Command { kLeft = 0, kStraight = 1, kRight = 2 };

// Layout: [speed, heading error] + K x [present, x, y, vx, vy, length, width]
// + M lane offsets + 3 command bits. Agent slots are sorted by distance; empty
// slots hold the all-zero sentinel.
std::size_t observation_width(const WorldConfig& cfg);
inline constexpr std::size_t kAgentFeatures = 7;

// Ego-frame features at step t (t <= horizon).
std::vector<double> observe(const Scene& scene, std::size_t t, const WorldConfig& cfg);

Command command_at(const Scene& scene, std::size_t t);

}  // namespace coirl::world
