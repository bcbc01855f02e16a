#pragma once

#include <span>
#include <vector>

#include "coirl/autodiff/tensor.hpp"
#include "coirl/world/dataset.hpp"

namespace coirl::train {

ad::Tensor obs_tensor(std::span<const double> obs);
// Stacks several observations into [B x width].
ad::Tensor obs_batch(const world::Dataset& data, std::span<const std::size_t> records, bool next = false);
ad::Tensor actions_tensor(std::span<const world::Vec2> actions);
std::vector<world::Vec2> tensor_actions(const ad::Tensor& t);

}  // namespace coirl::train
