#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "coirl/autodiff/optim.hpp"
#include "coirl/errors.hpp"
#include "coirl/objectives/il.hpp"
#include "coirl/objectives/rl.hpp"
#include "coirl/world/observe.hpp"
#include "doctest.h"
#include "support/world_fixtures.hpp"

using namespace coirl;
using namespace coirl::ad;
using namespace coirl::objectives;
using world::Vec2;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool grad = false) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(nd(rng));
  return Tensor::from(std::move(shape), std::move(v), grad);
}

Tensor obs_tensor(const std::vector<double>& o) {
  return Tensor::from({1, o.size()}, std::vector<Real>(o.begin(), o.end()));
}

Tensor actions_tensor(const std::vector<Vec2>& a) {
  std::vector<Real> v;
  for (const auto& p : a) {
    v.push_back(static_cast<Real>(p.x));
    v.push_back(static_cast<Real>(p.y));
  }
  return Tensor::from({a.size(), 2}, v);
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double pop_std(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / v.size());
}

}  // namespace

TEST_CASE("imitation loss: closed forms, oracle and length check") {
  std::mt19937_64 rng(1);
  const Tensor e = random_tensor({6, 2}, rng);
  CHECK(imitation_loss(e, e).item() == 0);
  std::vector<Real> shifted(e.data().begin(), e.data().end());
  for (auto& v : shifted) v += Real{0.5};
  CHECK(imitation_loss(Tensor::from({6, 2}, shifted), e).item() == doctest::Approx(0.5).epsilon(1e-6));
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({6, 2}, rng);
    const Tensor b = random_tensor({6, 2}, rng);
    double oracle = 0.0;
    for (std::size_t i = 0; i < 12; ++i) oracle += std::abs(static_cast<double>(a.at(i)) - b.at(i));
    oracle /= 12.0;
    CHECK(std::abs(imitation_loss(a, b).item() - oracle) <= 1e-7 * std::max(1.0, oracle));
  }
  CHECK_THROWS_AS(imitation_loss(random_tensor({5, 2}, rng), e), UsageError);
}

TEST_CASE("world model loss: values and stop-gradient on the target") {
  CHECK(world_model_loss(Tensor::from({1, 2}, {0, 0}), Tensor::from({1, 2}, {1, 1})).item() == 1.0f);
  std::mt19937_64 rng(2);
  Tensor pred = random_tensor({1, 8}, rng, 1.0, true);
  Tensor target = random_tensor({1, 8}, rng, 1.0, true);
  CHECK(world_model_loss(pred, pred.detach()).item() == 0);
  backward(world_model_loss(pred, target));
  CHECK(pred.has_grad());
  CHECK(std::all_of(target.grad().begin(), target.grad().end(), [](Real g) { return g == 0; }));
  CHECK_THROWS_AS(world_model_loss(pred, random_tensor({1, 7}, rng)), UsageError);
}

TEST_CASE("il_total: weighting") {
  const Tensor a = Tensor::scalar(1.0f);
  const Tensor b = Tensor::scalar(2.0f);
  CHECK(il_total(a, b, 0.0).item() == 1.0f);
  CHECK(il_total(a, b, 0.5).item() == 2.0f);
  CHECK_THROWS_AS(il_total(a, b, -1.0), ConfigError);
}

TEST_CASE("il objective: report bookkeeping and one step reduces the loss") {
  model::PolicyModel m = model::make_model({}, 3);
  const world::Scene scene = world::generate_scene(5, world::Domain::A, 0.5);
  const world::WorldConfig wcfg;
  const Tensor o = obs_tensor(world::observe(scene, 2, wcfg));
  const Tensor o2 = obs_tensor(world::observe(scene, 3, wcfg));
  std::vector<Vec2> expert;
  for (std::size_t i = 0; i < 6; ++i) expert.push_back(world::rotate(scene.expert_actions[2 + i], -scene.ego_poses[2].heading));
  const Tensor e = actions_tensor(expert);

  const ILStep first = il_objective(m, m.il, o, o2, e, 1.0);
  CHECK(first.report.alpha == 1.0);
  CHECK(first.report.l_il == doctest::Approx(first.report.l_imi + first.report.l_wm).epsilon(1e-6));
  CHECK(first.report.l_imi >= 0);
  CHECK(first.report.l_wm >= 0);

  backward(first.loss);
  const double lr = 1e-3;
  for (ParamSet* ps : {&m.encoder, &m.world_model, &m.il.params}) {
    for (auto& entry : *ps) {
      auto v = entry.value.mutable_data();
      const auto g = entry.value.grad();
      if (g.empty()) continue;
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= static_cast<Real>(lr) * g[i];
    }
    ps->zero_grad();
  }
  const ILStep second = il_objective(m, m.il, o, o2, e, 1.0);
  CHECK(second.report.l_il < first.report.l_il);
}

TEST_CASE("positions from actions") {
  const std::vector<Vec2> ones(3, Vec2{1, 0});
  CHECK(positions_from_actions(ones) == std::vector<Vec2>{{1, 0}, {2, 0}, {3, 0}});
  const std::vector<Vec2> zeros(4);
  CHECK(positions_from_actions(zeros) == zeros);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::vector<Vec2> a(6);
  for (auto& v : a) v = {nd(rng), nd(rng)};
  const auto p = positions_from_actions(a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 d = i == 0 ? p[0] : p[i] - p[i - 1];
    CHECK(std::abs(d.x - a[i].x) <= 1e-7);
    CHECK(std::abs(d.y - a[i].y) <= 1e-7);
  }
}

TEST_CASE("rewards: closed forms and collision zeroing") {
  const world::Scene s = test::straight_scene();
  const world::WorldConfig cfg;
  const std::vector<Vec2> expert(6, Vec2{2.5, 0});
  auto r = compute_rewards(expert, expert, s, 0, cfg);
  for (double v : r.r) CHECK(v == 1.0);

  std::vector<Vec2> off = expert;
  for (auto& a : off) a.y += std::log(2.0);
  r = rewards_from(off, expert, std::vector<bool>(6, false));
  for (double v : r.r) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<bool> col(6, false);
  col[2] = true;
  r = rewards_from(off, expert, col);
  CHECK(r.r[2] == 0.0);
  CHECK(r.r_col[2] == 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    if (i != 2) CHECK(r.r[i] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.r[i] == r.r_col[i] * r.r_imi[i]);
  }

  // A real collision from the detector: the step-3 position lands on a parked car.
  world::Scene blocked = s;
  blocked.agents.push_back(test::static_agent({10.0 + 7.5, 6.0, 0.0}));
  std::vector<Vec2> swerve = expert;
  swerve[2] = {2.5, 6.0};
  swerve[3] = {2.5, -6.0};
  world::WorldConfig no_map = cfg;
  no_map.drivable_area_collision = false;
  r = compute_rewards(swerve, expert, blocked, 0, no_map);
  CHECK(r.r_col == std::vector<double>{1, 1, 0, 1, 1, 1});
}

TEST_CASE("zscore: example, degenerate rule and identities") {
  const std::vector<double> v{1, 2, 3};
  const auto z = zscore_normalize(v);
  CHECK(z[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == doctest::Approx(1.2247).epsilon(1e-4));
  const std::vector<double> same(5, 3.3);
  for (double x : zscore_normalize(same)) CHECK(x == 0.0);
  CHECK_THROWS_AS(zscore_normalize(std::vector<double>{1.0}), UsageError);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(2.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(8);
    for (auto& e : x) e = nd(rng);
    const auto zx = zscore_normalize(x);
    CHECK(std::abs(mean_of(zx)) <= 1e-9);
    CHECK(std::abs(pop_std(zx) - 1.0) <= 1e-6);
    std::vector<double> shifted = x;
    for (auto& e : shifted) e += 7.0;
    const auto zs = zscore_normalize(shifted);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(zs[i] == doctest::Approx(zx[i]).epsilon(1e-9));
    std::vector<double> affine = x;
    for (auto& e : affine) e = 2.5 * e - 1.0;
    const auto za = zscore_normalize(affine);
    const auto arg_a = std::max_element(za.begin(), za.end()) - za.begin();
    const auto arg_x = std::max_element(x.begin(), x.end()) - x.begin();
    CHECK(arg_a == arg_x);
  }
}

TEST_CASE("naive PGGS loss: zero advantages, two-sample expansion, gradient sign") {
  Tensor lp = Tensor::from({2, 1}, {-1.5f, -0.5f}, true);
  const std::vector<double> zeros{0.0, 0.0};
  const Tensor l0 = naive_pggs_loss(lp, zeros);
  CHECK(l0.item() == 0);
  backward(l0);
  for (Real g : lp.grad()) CHECK(g == 0);

  const std::vector<double> adv{1.0, -1.0};
  CHECK(naive_pggs_loss(lp, adv).item() == doctest::Approx(-(-1.5 - -0.5) / 2));

  // One-parameter policy: mu, fixed sigma; sample 0 has positive advantage.
  Tensor mu = Tensor::from({1, 2}, {0.0f, 0.0f}, true);
  const Tensor sigma = Tensor::full({1, 2}, 1.0f);
  const Tensor good = Tensor::from({1, 2}, {1.0f, 0.0f});
  const Tensor bad = Tensor::from({1, 2}, {-1.0f, 0.0f});
  auto loss_at = [&](Real m0) {
    mu.mutable_data()[0] = m0;
    const Tensor parts[] = {model::log_prob(mu, sigma, good), model::log_prob(mu, sigma, bad)};
    return naive_pggs_loss(reshape(concat_rows(parts), {2, 1}), adv);
  };
  const double up = loss_at(0.01f).item();
  const double down = loss_at(-0.01f).item();
  CHECK(up < down);  // moving toward the positive sample lowers the loss
  mu.zero_grad();
  backward(loss_at(0.0f));
  CHECK(mu.grad()[0] < 0);
}

TEST_CASE("long-term advantage: arithmetic and degenerate group") {
  const std::vector<double> totals{2.0, 1.0};
  const std::vector<double> next{1.0, 1.0};
  auto adv = long_term_advantage(totals, next, 0.5, 0.9);
  CHECK(adv.a_long[0] == doctest::Approx(2.4));
  adv = long_term_advantage(totals, next, 0.5, 0.0);
  CHECK(adv.a_long[0] == doctest::Approx(1.5));
  CHECK(adv.a_long[1] == doctest::Approx(0.5));
  const std::vector<double> same{1.0, 1.0, 1.0};
  for (double a : long_term_advantage(same, same, 0.2, 0.9).a_cri) CHECK(a == 0.0);
  CHECK_THROWS_AS(long_term_advantage(totals, next, 0.5, 1.0), ConfigError);
}

TEST_CASE("ADCGS losses: hand fixture and gradient routing") {
  model::ModelConfig cfg;
  std::mt19937_64 rng(6);
  model::CriticPair critic = model::make_critic_pair(cfg, rng, 0.9);
  const Tensor s = random_tensor({1, cfg.d_s}, rng, 0.5);
  const double v = critic.value(s, model::CriticPair::Which::kLearning).item();

  // Equal rewards with a perfect critic -> zero actor loss.
  const Tensor lp = Tensor::from({2, 1}, {-1.0f, -3.0f}, true);
  auto equal = long_term_advantage(std::vector<double>{1.0, 1.0}, std::vector<double>{0.4, 0.4}, 1.36, 0.9);
  auto out = adcgs_losses(lp, equal.a_cri, critic.value(s, model::CriticPair::Which::kLearning), equal.targets);
  CHECK(out.l_act.item() == 0);

  // Two-sample hand computation of the critic loss.
  const std::vector<double> targets{v + 1.0, v - 3.0};
  const std::vector<double> a_cri{1.0, -1.0};
  out = adcgs_losses(lp, a_cri, critic.value(s, model::CriticPair::Which::kLearning), targets);
  CHECK(out.l_cri.item() == doctest::Approx((1.0 + 9.0) / 2.0).epsilon(1e-5));
  CHECK(out.l_act.item() == doctest::Approx(-(-1.0 + 3.0) / 2.0));

  backward(out.l_cri);
  CHECK(critic.learning.any_nonzero_grad());
  CHECK_FALSE(critic.reference.any_nonzero_grad());
  CHECK_FALSE(lp.has_grad());
}

TEST_CASE("bc loss and rl_total") {
  const std::size_t n = 6;
  std::mt19937_64 rng(7);
  Tensor mu = random_tensor({n, 2}, rng, 1.0, true);
  const Tensor ones = Tensor::full({n, 2}, 1.0f);
  const Tensor at_mu = mu.detach();
  CHECK(bc_loss(mu, ones, at_mu).item() == doctest::Approx(n * std::log(2 * std::numbers::pi)).epsilon(1e-6));
  backward(bc_loss(mu, ones, at_mu));
  for (Real g : mu.grad()) CHECK(g == 0);
  const Tensor a = random_tensor({n, 2}, rng);
  const Tensor sig = Tensor::full({n, 2}, 0.7f);
  CHECK(bc_loss(mu, sig, a).item() == -model::log_prob(mu, sig, a).item());

  const auto t = [](double v) { return Tensor::scalar(static_cast<Real>(v)); };
  CHECK(rl_total(t(1), t(2), t(100), 0.005).item() == doctest::Approx(3.5));
  CHECK(rl_total(t(1), t(2), t(100), 0.0).item() == 3.0f);
  CHECK(RLLossReport{}.beta == 0.005);
}

namespace {

struct RLFixture {
  model::PolicyModel m;
  world::Scene scene;
  world::WorldConfig wcfg;
  RLContext ctx;
  Tensor s;
  model::PolicyOutput policy;

  explicit RLFixture(model::ModelConfig cfg = {}, std::size_t G = 8) : m(model::make_model(cfg, 21)) {
    wcfg.plan_steps = cfg.n;
    scene = world::generate_scene(9, world::Domain::B, 0.9, wcfg);
    ctx.model = &m;
    ctx.scene = &scene;
    ctx.t0 = 3;
    ctx.world = &wcfg;
    ctx.group_size = G;
    for (std::size_t i = 0; i < cfg.n; ++i) {
      ctx.expert.push_back(world::rotate(scene.expert_actions[3 + i], -scene.ego_poses[3].heading));
    }
    s = model::encode(m.encoder, obs_tensor(world::observe(scene, 3, wcfg)));
    policy = model::act(m.rl, s, cfg);
  }
};

}  // namespace

TEST_CASE("step-aware sampling: non-sampled steps equal the mode bitwise") {
  RLFixture f;
  std::mt19937_64 rng(8);
  const auto res = step_aware_group_sample(f.policy, f.s, f.ctx, rng);
  const std::size_t n = f.m.cfg.n;
  REQUIRE(res.samples.size() == n);
  std::size_t deviating = 0;
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(res.samples[i].size() == 8);
    for (const auto& seq : res.samples[i]) {
      for (std::size_t j = 0; j < n; ++j) {
            const bool mode = (seq[j].x == static_cast<double>(f.policy.mu.at(j, 0))) &&
                          (seq[j].y == static_cast<double>(f.policy.mu.at(j, 1)));
        if (j != i) CHECK(mode);
        if (j == i && !mode) ++deviating;
      }
    }
  }
  CHECK(deviating == n * 8);
  CHECK(std::isfinite(res.l_actor.item()));
  CHECK(res.l_critic.item() >= 0);
}

TEST_CASE("step-aware sampling: vanishing sigma gives degenerate groups and zero actor loss") {
  model::ModelConfig cfg;
  cfg.sigma_min = 1e-12;
  cfg.sigma_init = 1e-12;
  RLFixture f(cfg);
  // Force every sigma to the floor; the perturbation is then below float resolution.
  f.policy.sigma = Tensor::full(f.policy.sigma.shape(), static_cast<Real>(1e-12));
  std::mt19937_64 rng(9);
  const auto res = step_aware_group_sample(f.policy, f.s, f.ctx, rng);
  CHECK(res.l_actor.item() == 0);
  for (const auto& group : res.advantages) {
    for (double a : group) CHECK(a == 0.0);
  }
}

TEST_CASE("step-aware sampling with n = 1 equals ADCGS on one shared group") {
  model::ModelConfig cfg;
  cfg.n = 1;
  RLFixture f(cfg);
  std::mt19937_64 rng_a(10);
  const auto res = step_aware_group_sample(f.policy, f.s, f.ctx, rng_a);

  // Independent pipeline: same draws, ADCGS losses computed by hand from its pieces.
  std::mt19937_64 rng_b(10);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& m = f.m;
  std::vector<std::vector<Vec2>> seqs;
  std::vector<Real> flat;
  for (std::size_t g = 0; g < 8; ++g) {
    Vec2 a;
    const Real ex = static_cast<Real>(normal(rng_b));
    const Real ey = static_cast<Real>(normal(rng_b));
    const Real ax = f.policy.mu.at(0) + f.policy.sigma.at(0) * ex;
    const Real ay = f.policy.mu.at(1) + f.policy.sigma.at(1) * ey;
    flat.push_back(ax);
    flat.push_back(ay);
    seqs.push_back({Vec2{ax, ay}});
  }
  std::vector<double> totals;
  std::vector<double> v_next;
  std::vector<Tensor> lps;
  for (std::size_t g = 0; g < 8; ++g) {
    totals.push_back(compute_rewards(seqs[g], f.ctx.expert, f.scene, f.ctx.t0, f.wcfg).total());
    const Tensor a = Tensor::from({1, 2}, {flat[2 * g], flat[2 * g + 1]});
    lps.push_back(model::log_prob(f.policy.mu, f.policy.sigma, a));
    NoGradGuard guard;
    v_next.push_back(m.critic.value(model::world_model_step(m.world_model, f.s.detach(), a), model::CriticPair::Which::kReference).item());
  }
  const double v_s = m.critic.value(f.s.detach(), model::CriticPair::Which::kReference).item();
  const auto adv = long_term_advantage(totals, v_next, v_s, f.ctx.gamma);
  const auto ref = adcgs_losses(reshape(concat_rows(lps), {8, 1}), adv.a_cri,
                                m.critic.value(f.s.detach(), model::CriticPair::Which::kLearning), adv.targets);
  CHECK(std::abs(res.l_actor.item() - ref.l_act.item()) <= 1e-6);
  CHECK(std::abs(res.l_critic.item() - ref.l_cri.item()) <= 1e-6 * std::max(1.0, std::abs(static_cast<double>(ref.l_cri.item()))));
}

TEST_CASE("step-aware sampling: advantages never carry gradient") {
  RLFixture f;
  std::mt19937_64 rng(11);
  const auto res = step_aware_group_sample(f.policy, f.s, f.ctx, rng);
  backward(res.l_actor);
  CHECK(f.m.rl.params.any_nonzero_grad());
  // No path from the actor loss into the world model or critics.
  CHECK_FALSE(f.m.world_model.any_nonzero_grad());
  CHECK_FALSE(f.m.critic.learning.any_nonzero_grad());
  CHECK_FALSE(f.m.critic.reference.any_nonzero_grad());
}

TEST_CASE("naive PGGS on a one-dimensional bandit moves mu toward the best action") {
  const double best = 1.5;
  Tensor mu = Tensor::from({1, 1}, {-1.0f}, true);
  const Tensor sigma = Tensor::full({8, 1}, 0.5f);
  ParamSet ps;
  ps.add("mu", mu);
  AdamW opt(ps, {});
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const double initial_gap = std::abs(ps.get("mu").item() - best);
  for (int it = 0; it < 200; ++it) {
    Tensor& m = ps.get("mu");
    std::vector<Real> a(8);
    std::vector<double> rewards(8);
    for (std::size_t g = 0; g < 8; ++g) {
      a[g] = m.item() + static_cast<Real>(0.5 * nd(rng));
      rewards[g] = std::exp(-std::abs(a[g] - best));
    }
    const Tensor actions = Tensor::from({8, 1}, a);
    const Tensor lp = model::gaussian_log_density(tile_rows(m, 8), sigma, actions);
    backward(naive_pggs_loss(lp, zscore_normalize(rewards)));
    opt.step(ps, 0.05);
    ps.zero_grad();
  }
  CHECK(std::abs(ps.get("mu").item() - best) < 0.2 * initial_gap);
}

TEST_CASE("naive group sample: shapes and loss") {
  RLFixture f;
  std::mt19937_64 rng(13);
  const auto res = naive_group_sample(f.policy, f.ctx, rng);
  REQUIRE(res.samples.size() == 1);
  CHECK(res.samples[0].size() == 8);
  CHECK(res.l_critic.item() == 0);
  CHECK(res.mean_reward >= 0);
  CHECK(res.mean_reward <= 1);
  backward(res.l_actor);
  CHECK(f.m.rl.params.any_nonzero_grad());
  f.ctx.group_size = 1;
  CHECK_THROWS_AS(naive_group_sample(f.policy, f.ctx, rng), UsageError);
}
