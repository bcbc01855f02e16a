#pragma once

#include <cstdint>
#include <vector>

#include "coirl/autodiff/params.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay:
//   p <- p * (1 - lr * wd);  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// Parameters without a gradient are treated as having a zero gradient.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamSet& params, AdamWConfig cfg);

  void step(ParamSet& params, double lr);
  // Zeroes both moment buffers and the step counter.
  void reset();

  [[nodiscard]] std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }
  [[nodiscard]] const AdamWConfig& config() const { return cfg_; }
  [[nodiscard]] std::vector<std::vector<Real>>& first_moments() { return m_; }
  [[nodiscard]] std::vector<std::vector<Real>>& second_moments() { return v_; }
  [[nodiscard]] const std::vector<std::vector<Real>>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<std::vector<Real>>& second_moments() const { return v_; }

 private:
  AdamWConfig cfg_{};
  std::int64_t step_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
