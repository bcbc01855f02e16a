#pragma once

#include <random>
#include <span>
#include <vector>

#include "coirl/model/model.hpp"
#include "coirl/world/collision.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace objectives {

using ad::Tensor;
using world::Vec2;

struct RewardSequence {
  std::vector<double> r_imi;
  std::vector<double> r_col;
  std::vector<double> r;

  [[nodiscard]] double total() const;
};

// Prefix sums of the displacement actions (ego frame).
std::vector<Vec2> positions_from_actions(std::span<const Vec2> actions);

// r_imi = exp(-|a_i - a_i^e|), r_col = 1 - collision flag, r = r_imi * r_col.
RewardSequence compute_rewards(std::span<const Vec2> actions, std::span<const Vec2> expert, const world::Scene& scene,
                               std::size_t t0, const world::WorldConfig& cfg);

// Same rewards from a precomputed collision vector.
RewardSequence rewards_from(std::span<const Vec2> actions, std::span<const Vec2> expert, const std::vector<bool>& collided);

inline constexpr double kZScoreEps = 1e-8;
// (v - mean) / (std + eps) with population std; all zeros when std < eps.
std::vector<double> zscore_normalize(std::span<const double> values);

// -(1/G) sum_g A_g * logp_g, advantages held constant. log_probs is [G x 1].
Tensor naive_pggs_loss(const Tensor& log_probs, std::span<const double> advantages);

struct LongTermAdvantage {
  std::vector<double> a_long;
  std::vector<double> a_cri;
  std::vector<double> targets;  // sum r + gamma * V_ref(s_hat')
};

LongTermAdvantage long_term_advantage(std::span<const double> reward_totals, std::span<const double> v_ref_next,
                                      double v_ref_s, double gamma);

struct ADCGSLosses {
  Tensor l_act;
  Tensor l_cri;
};

// l_act = -(1/G) sum A_cri * logp; l_cri = (1/G) sum (V_learning(s) - target_g)^2 with targets constant.
// v_learning_s is [1 x 1].
ADCGSLosses adcgs_losses(const Tensor& log_probs, std::span<const double> a_cri, const Tensor& v_learning_s,
                         std::span<const double> targets);

Tensor bc_loss(const Tensor& mu, const Tensor& sigma, const Tensor& expert);

struct RLLossReport {
  double l_act = 0.0;
  double l_cri = 0.0;
  double l_bc = 0.0;
  double l_rl = 0.0;
  double beta = 0.005;
  double mean_reward = 0.0;     // mean per-step reward over all sampled sequences
  double advantage_spread = 0.0;  // mean within-group std of the raw advantages
};

Tensor rl_total(const Tensor& l_act, const Tensor& l_cri, const Tensor& l_bc, double beta);

// Everything a group-sampling step needs about one record.
struct RLContext {
  const model::PolicyModel* model = nullptr;
  const world::Scene* scene = nullptr;
  std::size_t t0 = 0;
  const world::WorldConfig* world = nullptr;
  std::vector<Vec2> expert;  // ego frame
  std::size_t group_size = 8;
  double gamma = 0.9;
};

struct GroupSampleResult {
  Tensor l_actor;
  Tensor l_critic;
  // Sampled sequences, [n_groups][G][n], and their rewards, kept for inspection.
  std::vector<std::vector<std::vector<Vec2>>> samples;
  std::vector<std::vector<RewardSequence>> rewards;
  std::vector<std::vector<double>> advantages;  // normalized, per group
  double mean_reward = 0.0;
  double advantage_spread = 0.0;
};

// Step-aware group sampling: for each step i, G sequences where only step i is
// drawn from the policy and every other step equals the mode. Actor loss uses
// the full-sequence log-prob; both losses are averaged over the n groups.
// s is the latent state (detached or not, as the caller decides).
GroupSampleResult step_aware_group_sample(const model::PolicyOutput& policy, const Tensor& s, const RLContext& ctx,
                                          std::mt19937_64& rng);

// Naive PGGS: G fully stochastic sequences scored by z-scored total reward.
GroupSampleResult naive_group_sample(const model::PolicyOutput& policy, const RLContext& ctx, std::mt19937_64& rng);

}  // namespace objectives
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
