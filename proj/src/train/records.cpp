#include "coirl/train/records.hpp"

namespace coirl::train {

ad::Tensor obs_tensor(std::span<const double> obs) {
  return ad::Tensor::from({1, obs.size()}, std::vector<Real>(obs.begin(), obs.end()));
}

ad::Tensor obs_batch(const world::Dataset& data, std::span<const std::size_t> records, bool next) {
  const std::size_t width = data.records.at(records.front()).obs.size();
  std::vector<Real> v;
  v.reserve(records.size() * width);
  for (std::size_t idx : records) {
    const auto& o = next ? data.records[idx].next_obs : data.records[idx].obs;
    v.insert(v.end(), o.begin(), o.end());
  }
  return ad::Tensor::from({records.size(), width}, std::move(v));
}

ad::Tensor actions_tensor(std::span<const world::Vec2> actions) {
  std::vector<Real> v;
  v.reserve(actions.size() * 2);
  for (const auto& a : actions) {
    v.push_back(static_cast<Real>(a.x));
    v.push_back(static_cast<Real>(a.y));
  }
  return ad::Tensor::from({actions.size(), 2}, std::move(v));
}

std::vector<world::Vec2> tensor_actions(const ad::Tensor& t) {
  std::vector<world::Vec2> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) out[i] = {t.at(i, 0), t.at(i, 1)};
  return out;
}

}  // namespace coirl::train
