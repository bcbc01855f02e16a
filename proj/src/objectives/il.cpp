#include "coirl/objectives/il.hpp"

#include "coirl/errors.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace objectives {

using namespace ad;

Tensor imitation_loss(const Tensor& actions, const Tensor& expert) {
  if (actions.shape() != expert.shape()) {
    throw UsageError("imitation loss length mismatch: " + shape_str(actions.shape()) + " vs " + shape_str(expert.shape()));
  }
  return l1_loss(actions, expert);
}

Tensor world_model_loss(const Tensor& predicted, const Tensor& target) {
  if (predicted.shape() != target.shape()) {
    throw UsageError("world model loss width mismatch: " + shape_str(predicted.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  return mse_loss(predicted, target.detach());
}

Tensor il_total(const Tensor& l_imi, const Tensor& l_wm, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (alpha == 0.0) return l_imi;
  return add(l_imi, scale(l_wm, static_cast<Real>(alpha)));
}

Tensor world_model_objective(const model::PolicyModel& m, const Tensor& s, const Tensor& actions, const Tensor& next_obs) {
  Tensor target;
  {
    NoGradGuard guard;
    target = model::encode(m.encoder, next_obs);
  }
  const Tensor predicted = model::world_model_step(m.world_model, s, reshape(actions, {1, actions.size()}));
  return world_model_loss(predicted, target);
}

ILStep il_objective(const model::PolicyModel& m, const model::ActorBundle& actor, const Tensor& obs,
                    const Tensor& next_obs, const Tensor& expert, double alpha) {
  ILStep out;
  out.s = model::encode(m.encoder, obs);
  out.mu = model::act(actor, out.s, m.cfg, false).mu;
  const Tensor l_imi = imitation_loss(out.mu, expert);
  const Tensor l_wm = world_model_objective(m, out.s, out.mu, next_obs);
  out.loss = il_total(l_imi, l_wm, alpha);
  out.report = {l_imi.item(), l_wm.item(), out.loss.item(), alpha};
  return out;
}

}  // namespace objectives
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
