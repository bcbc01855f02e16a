#include "coirl/autodiff/optim.hpp"

#include <cmath>

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

AdamW::AdamW(const ParamSet& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& e : params) {
    m_.emplace_back(e.value.size(), Real{0});
    v_.emplace_back(e.value.size(), Real{0});
  }
}

void AdamW::step(ParamSet& params, double lr) {
  if (params.size() != m_.size()) throw StructuralError("optimizer state does not match parameter set");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double decay = 1.0 - lr * cfg_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params.entry(i).value;
    auto values = t.mutable_data();
    const auto grad = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != values.size()) throw StructuralError("optimizer state shape mismatch for " + params.entry(i).name);
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[j]);
      const double mj = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      const double vj = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      double p = static_cast<double>(values[j]) * decay;
      p -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
      values[j] = static_cast<Real>(p);
    }
  }
}

void AdamW::reset() {
  step_ = 0;
  for (auto& m : m_) std::fill(m.begin(), m.end(), Real{0});
  for (auto& v : v_) std::fill(v.begin(), v.end(), Real{0});
}

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
