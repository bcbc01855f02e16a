#pragma once

#include "coirl/model/model.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace objectives {

using ad::Tensor;

struct ILLossReport {
  double l_imi = 0.0;
  double l_wm = 0.0;
  double l_il = 0.0;
  double alpha = 1.0;
};

// Mean absolute error over all n x 2 components.
Tensor imitation_loss(const Tensor& actions, const Tensor& expert);
// Mean squared error; the target is detached so no gradient reaches it.
Tensor world_model_loss(const Tensor& predicted, const Tensor& target);
Tensor il_total(const Tensor& l_imi, const Tensor& l_wm, double alpha);

struct ILStep {
  Tensor loss;
  ILLossReport report;
  Tensor s;   // latent state of the record (attached to the encoder graph)
  Tensor mu;  // actor mean actions
};

// One record: s = encode(o); mu = actor(s); s_hat' = WM(s, mu); target = encode(o') without gradient.
ILStep il_objective(const model::PolicyModel& m, const model::ActorBundle& actor, const Tensor& obs,
                    const Tensor& next_obs, const Tensor& expert, double alpha);

// World-model loss alone on given actions (used when the actor is trained by RL only).
Tensor world_model_objective(const model::PolicyModel& m, const Tensor& s, const Tensor& actions, const Tensor& next_obs);

}  // namespace objectives
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
