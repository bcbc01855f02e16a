#include "coirl/objectives/rl.hpp"

#include <cmath>
#include <numeric>

#include "coirl/errors.hpp"
#include "coirl/world/dataset.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace objectives {

using namespace ad;

namespace {

double population_std(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

Tensor column(std::span<const double> values) {
  std::vector<Real> v(values.begin(), values.end());
  const std::size_t rows = v.size();
  return Tensor::from({rows, 1}, std::move(v));
}

std::vector<Vec2> row_actions(std::span<const Real> flat, std::size_t seq, std::size_t n) {
  std::vector<Vec2> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = {static_cast<double>(flat[(seq * n + j) * 2]), static_cast<double>(flat[(seq * n + j) * 2 + 1])};
  }
  return out;
}

// Log-probs [count x 1] of `count` sequences stacked in acts [count*n x 2].
Tensor sequence_log_probs(const model::PolicyOutput& policy, const Tensor& acts, std::size_t count) {
  const std::size_t n = policy.mu.rows();
  const Tensor dens =
      model::gaussian_log_density(tile_rows(policy.mu, count), tile_rows(policy.sigma, count), acts);
  return row_sum(reshape(dens, {count, 2 * n}));
}

std::vector<RewardSequence> score_sequences(std::span<const Real> flat, std::size_t count, std::size_t n,
                                            const RLContext& ctx, std::vector<std::vector<Vec2>>& actions_out) {
  std::vector<world::CollisionQuery> queries(count);
  actions_out.resize(count);
  for (std::size_t q = 0; q < count; ++q) {
    actions_out[q] = row_actions(flat, q, n);
    queries[q] = {ctx.scene, ctx.t0, positions_from_actions(actions_out[q])};
  }
  const auto reports = world::check_collision_batch_parallel(queries, *ctx.world);
  std::vector<RewardSequence> out(count);
  for (std::size_t q = 0; q < count; ++q) out[q] = rewards_from(actions_out[q], ctx.expert, reports[q].collided);
  return out;
}

void check_context(const model::PolicyOutput& policy, const RLContext& ctx) {
  if (ctx.group_size < 2) throw UsageError("group size must be at least 2");
  if (!policy.sigma.defined()) throw UsageError("group sampling needs the stochastic head output");
  if (ctx.expert.size() != policy.mu.rows()) throw UsageError("expert length does not match the plan length");
}

}  // namespace

double RewardSequence::total() const { return std::accumulate(r.begin(), r.end(), 0.0); }

std::vector<Vec2> positions_from_actions(std::span<const Vec2> actions) { return world::positions_from(actions); }

RewardSequence rewards_from(std::span<const Vec2> actions, std::span<const Vec2> expert, const std::vector<bool>& collided) {
  if (actions.size() != expert.size() || collided.size() != actions.size()) {
    throw UsageError("reward inputs differ in length");
  }
  RewardSequence out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double r_imi = std::exp(-world::norm(actions[i] - expert[i]));
    const double r_col = collided[i] ? 0.0 : 1.0;
    out.r_imi.push_back(r_imi);
    out.r_col.push_back(r_col);
    out.r.push_back(r_imi * r_col);
  }
  return out;
}

RewardSequence compute_rewards(std::span<const Vec2> actions, std::span<const Vec2> expert, const world::Scene& scene,
                               std::size_t t0, const world::WorldConfig& cfg) {
  if (actions.size() != expert.size()) throw UsageError("reward inputs differ in length");
  const auto report = world::check_collision(positions_from_actions(actions), scene, t0, cfg);
  return rewards_from(actions, expert, report.collided);
}

std::vector<double> zscore_normalize(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("z-score normalization needs at least two values");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const double sd = population_std(values);
  std::vector<double> out(values.size(), 0.0);
  if (sd < kZScoreEps) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / (sd + kZScoreEps);
  return out;
}

Tensor naive_pggs_loss(const Tensor& log_probs, std::span<const double> advantages) {
  if (log_probs.size() != advantages.size()) throw UsageError("advantage count does not match the group");
  const auto g = static_cast<Real>(advantages.size());
  return scale(sum(mul(reshape(log_probs, {advantages.size(), 1}), column(advantages))), Real{-1} / g);
}

LongTermAdvantage long_term_advantage(std::span<const double> reward_totals, std::span<const double> v_ref_next,
                                      double v_ref_s, double gamma) {
  if (reward_totals.size() != v_ref_next.size()) throw UsageError("group members differ in count");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  LongTermAdvantage out;
  for (std::size_t g = 0; g < reward_totals.size(); ++g) {
    const double target = reward_totals[g] + gamma * v_ref_next[g];
    out.targets.push_back(target);
    out.a_long.push_back(target - v_ref_s);
  }
  out.a_cri = zscore_normalize(out.a_long);
  return out;
}

ADCGSLosses adcgs_losses(const Tensor& log_probs, std::span<const double> a_cri, const Tensor& v_learning_s,
                         std::span<const double> targets) {
  if (log_probs.size() != a_cri.size() || targets.size() != a_cri.size()) {
    throw UsageError("advantage, target and log-prob counts differ");
  }
  if (v_learning_s.size() != 1) throw UsageError("critic value must be a single scalar");
  const std::size_t g = a_cri.size();
  ADCGSLosses out;
  out.l_act = naive_pggs_loss(log_probs, a_cri);
  const Tensor diff = sub(tile_rows(reshape(v_learning_s, {1, 1}), g), column(targets));
  out.l_cri = scale(sum(square(diff)), Real{1} / static_cast<Real>(g));
  return out;
}

Tensor bc_loss(const Tensor& mu, const Tensor& sigma, const Tensor& expert) {
  return neg(model::log_prob(mu, sigma, expert));
}

Tensor rl_total(const Tensor& l_act, const Tensor& l_cri, const Tensor& l_bc, double beta) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  const Tensor base = add(l_act, l_cri);
  if (beta == 0.0) return base;
  return add(base, scale(l_bc, static_cast<Real>(beta)));
}

GroupSampleResult step_aware_group_sample(const model::PolicyOutput& policy, const Tensor& s, const RLContext& ctx,
                                          std::mt19937_64& rng) {
  check_context(policy, ctx);
  const model::PolicyModel& m = *ctx.model;
  const std::size_t n = policy.mu.rows();
  const std::size_t G = ctx.group_size;
  const std::size_t count = n * G;
  const auto mu = policy.mu.data();
  const auto sigma = policy.sigma.data();

  // Sequence q = i*G + g differs from the mode only at step i.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Real> flat(count * n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t q = i * G + g;
      std::copy(mu.begin(), mu.end(), flat.begin() + static_cast<std::ptrdiff_t>(q * n * 2));
      for (std::size_t d = 0; d < 2; ++d) {
        const auto eps = static_cast<Real>(normal(rng));
        flat[(q * n + i) * 2 + d] = mu[i * 2 + d] + sigma[i * 2 + d] * eps;
      }
    }
  }
  const Tensor acts = Tensor::from({count * n, 2}, flat);
  const Tensor log_probs = sequence_log_probs(policy, acts, count);

  GroupSampleResult out;
  std::vector<std::vector<Vec2>> actions;
  const auto rewards = score_sequences(flat, count, n, ctx, actions);

  const Tensor s_det = s.detach();
  std::vector<double> v_next(count);
  double v_s = 0.0;
  {
    NoGradGuard guard;
    const Tensor next = model::world_model_step(m.world_model, tile_rows(s_det, count), reshape(acts, {count, 2 * n}));
    const Tensor v = m.critic.value(next, model::CriticPair::Which::kReference);
    for (std::size_t q = 0; q < count; ++q) v_next[q] = v.at(q);
    v_s = m.critic.value(s_det, model::CriticPair::Which::kReference).item();
  }

  std::vector<double> a_cri_all;
  std::vector<double> targets_all;
  double reward_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> totals(G);
    out.samples.emplace_back();
    out.rewards.emplace_back();
    for (std::size_t g = 0; g < G; ++g) {
      const std::size_t q = i * G + g;
      totals[g] = rewards[q].total();
      reward_sum += totals[g];
      out.samples.back().push_back(actions[q]);
      out.rewards.back().push_back(rewards[q]);
    }
    const auto adv = long_term_advantage(totals, std::span(v_next).subspan(i * G, G), v_s, ctx.gamma);
    out.advantage_spread += population_std(adv.a_long) / static_cast<double>(n);
    out.advantages.push_back(adv.a_cri);
    a_cri_all.insert(a_cri_all.end(), adv.a_cri.begin(), adv.a_cri.end());
    targets_all.insert(targets_all.end(), adv.targets.begin(), adv.targets.end());
  }
  out.mean_reward = reward_sum / static_cast<double>(count * n);

  // Averaging over all n*G sequences equals the per-step group mean divided by n.
  const Tensor v_learning = m.critic.value(s_det, model::CriticPair::Which::kLearning);
  auto losses = adcgs_losses(log_probs, a_cri_all, v_learning, targets_all);
  out.l_actor = losses.l_act;
  out.l_critic = losses.l_cri;
  return out;
}

GroupSampleResult naive_group_sample(const model::PolicyOutput& policy, const RLContext& ctx, std::mt19937_64& rng) {
  check_context(policy, ctx);
  const std::size_t n = policy.mu.rows();
  const std::size_t G = ctx.group_size;
  const auto mu = policy.mu.data();
  const auto sigma = policy.sigma.data();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Real> flat(G * n * 2);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t k = 0; k < n * 2; ++k) flat[g * n * 2 + k] = mu[k] + sigma[k] * static_cast<Real>(normal(rng));
  }
  const Tensor acts = Tensor::from({G * n, 2}, flat);
  const Tensor log_probs = sequence_log_probs(policy, acts, G);

  GroupSampleResult out;
  std::vector<std::vector<Vec2>> actions;
  const auto rewards = score_sequences(flat, G, n, ctx, actions);
  std::vector<double> totals(G);
  double reward_sum = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    totals[g] = rewards[g].total();
    reward_sum += totals[g];
  }
  out.samples.push_back(actions);
  out.rewards.push_back(rewards);
  out.advantages.push_back(zscore_normalize(totals));
  out.mean_reward = reward_sum / static_cast<double>(G * n);
  out.advantage_spread = population_std(totals);
  out.l_actor = naive_pggs_loss(log_probs, out.advantages.back());
  out.l_critic = Tensor::scalar(0);
  return out;
}

}  // namespace objectives
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
