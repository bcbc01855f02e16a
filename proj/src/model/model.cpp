#include "coirl/model/model.hpp"

#include <cmath>
#include <numbers>

#include "coirl/errors.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace model {

using namespace ad;

namespace {

Tensor uniform_tensor(Shape shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Tensor y = matmul(x, w);
  return add(y, x.rows() == 1 ? b : tile_rows(b, x.rows()));
}

Tensor row_head(const Tensor& s_w, const Tensor& wx, const Tensor& wy, const Tensor& b) {
  const Tensor cols[] = {row_sum(mul(s_w, wx)), row_sum(mul(s_w, wy))};
  return add(concat_cols(cols), b);
}

void add_row_head(ParamSet& ps, const std::string& prefix, const ModelConfig& cfg, std::mt19937_64& rng,
                  double bias) {
  const double limit = std::sqrt(6.0 / static_cast<double>(cfg.d_w + 2));
  ps.add(prefix + ".wx", uniform_tensor({cfg.n, cfg.d_w}, limit, rng));
  ps.add(prefix + ".wy", uniform_tensor({cfg.n, cfg.d_w}, limit, rng));
  ps.add(prefix + ".b", Tensor::full({cfg.n, 2}, static_cast<Real>(bias)));
}

}  // namespace

std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::kNone:
      return "none";
    case MaskMode::kCausal:
      return "causal";
    case MaskMode::kInverseCausal:
      return "inverse_causal";
  }
  return "?";
}

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "none") return MaskMode::kNone;
  if (s == "causal") return MaskMode::kCausal;
  if (s == "inverse_causal") return MaskMode::kInverseCausal;
  throw ConfigError("unknown mask mode '" + s + "' (none, causal, inverse_causal)");
}

AttentionMask make_mask(MaskMode mode, std::size_t n) {
  switch (mode) {
    case MaskMode::kCausal:
      return AttentionMask::causal(n);
    case MaskMode::kInverseCausal:
      return AttentionMask::inverse_causal(n);
    case MaskMode::kNone:
      break;
  }
  return AttentionMask::none(n, n);
}

nlohmann::json ModelConfig::to_json() const {
  return {{"obs_width", obs_width},   {"d_s", d_s},
          {"d_w", d_w},               {"n", n},
          {"kv_slots", kv_slots},     {"wm_hidden", wm_hidden},
          {"critic_hidden", critic_hidden}, {"mask", to_string(mask)},
          {"sigma_min", sigma_min},   {"sigma_max", sigma_max},
          {"sigma_init", sigma_init}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.obs_width = j.at("obs_width").get<std::size_t>();
    c.d_s = j.at("d_s").get<std::size_t>();
    c.d_w = j.at("d_w").get<std::size_t>();
    c.n = j.at("n").get<std::size_t>();
    c.kv_slots = j.at("kv_slots").get<std::size_t>();
    c.wm_hidden = j.at("wm_hidden").get<std::size_t>();
    c.critic_hidden = j.at("critic_hidden").get<std::size_t>();
    c.mask = mask_mode_from_string(j.at("mask").get<std::string>());
    c.sigma_min = j.at("sigma_min").get<double>();
    c.sigma_max = j.at("sigma_max").get<double>();
    c.sigma_init = j.at("sigma_init").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

ParamSet make_encoder(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamSet ps;
  ps.add_xavier("w1", cfg.obs_width, cfg.d_s, rng);
  ps.add_zeros("b1", {1, cfg.d_s});
  ps.add_xavier("w2", cfg.d_s, cfg.d_s, rng);
  ps.add_zeros("b2", {1, cfg.d_s});
  return ps;
}

Tensor encode(const ParamSet& enc, const Tensor& obs) {
  const std::size_t width = enc.get("w1").rows();
  if (obs.cols() != width) {
    throw ConfigError("observation width " + std::to_string(obs.cols()) + " does not match encoder input " +
                      std::to_string(width));
  }
  const Tensor h = tanh(linear(obs, enc.get("w1"), enc.get("b1")));
  return tanh(linear(h, enc.get("w2"), enc.get("b2")));
}

std::string to_string(ActorTag t) { return t == ActorTag::kIL ? "IL" : "RL"; }

ActorBundle make_actor(const ModelConfig& cfg, ActorTag tag, std::mt19937_64& rng) {
  ActorBundle a;
  a.tag = tag;
  auto& ps = a.params;
  ps.add_xavier("q_w", cfg.n, cfg.d_w, rng);
  ps.add_xavier("kv.wk", cfg.d_s, cfg.kv_slots * cfg.d_w, rng);
  ps.add_xavier("kv.wv", cfg.d_s, cfg.kv_slots * cfg.d_w, rng);
  ps.add_xavier("bp.wq", cfg.d_w, cfg.d_w, rng);
  ps.add_xavier("bp.wk", cfg.d_w, cfg.d_w, rng);
  ps.add_xavier("bp.wv", cfg.d_w, cfg.d_w, rng);
  ps.add_xavier("bp.wo", cfg.d_w, cfg.d_w, rng);
  add_row_head(ps, "plan", cfg, rng, 0.0);
  // softplus^-1 of the initial sigma
  add_row_head(ps, "sigma", cfg, rng, std::log(std::expm1(cfg.sigma_init)));
  for (const char* w : {"sigma.wx", "sigma.wy"}) {
    for (auto& v : ps.get(w).mutable_data()) v *= Real{0.1};
  }
  return a;
}

Tensor waypoint_attend(const ActorBundle& actor, const Tensor& s, const ModelConfig& cfg) {
  if (s.rows() != 1 || s.cols() != cfg.d_s) {
    throw DimensionError("waypoint_attend expects s of shape [1x" + std::to_string(cfg.d_s) + "], got " +
                         shape_str(s.shape()));
  }
  const auto& p = actor.params;
  const Tensor k = reshape(matmul(s, p.get("kv.wk")), {cfg.kv_slots, cfg.d_w});
  const Tensor v = reshape(matmul(s, p.get("kv.wv")), {cfg.kv_slots, cfg.d_w});
  return masked_attention(p.get("q_w"), k, v, AttentionMask::none(cfg.n, cfg.kv_slots));
}

Tensor backward_plan(const ActorBundle& actor, const Tensor& s_w, MaskMode mode) {
  const auto& p = actor.params;
  const Tensor q = matmul(s_w, p.get("bp.wq"));
  const Tensor k = matmul(s_w, p.get("bp.wk"));
  const Tensor v = matmul(s_w, p.get("bp.wv"));
  const Tensor att = masked_attention(q, k, v, make_mask(mode, s_w.rows()));
  return add(s_w, matmul(att, p.get("bp.wo")));
}

Tensor plan_head(const ActorBundle& actor, const Tensor& s_w) {
  const auto& p = actor.params;
  return row_head(s_w, p.get("plan.wx"), p.get("plan.wy"), p.get("plan.b"));
}

Tensor stochastic_head(const ActorBundle& actor, const Tensor& s_w, const ModelConfig& cfg) {
  const auto& p = actor.params;
  const Tensor pre = row_head(s_w, p.get("sigma.wx"), p.get("sigma.wy"), p.get("sigma.b"));
  return softplus_clamp(pre, static_cast<Real>(cfg.sigma_min), static_cast<Real>(cfg.sigma_max));
}

PolicyOutput act(const ActorBundle& actor, const Tensor& s, const ModelConfig& cfg, bool with_sigma) {
  PolicyOutput out;
  out.s_w = backward_plan(actor, waypoint_attend(actor, s, cfg), cfg.mask);
  out.mu = plan_head(actor, out.s_w);
  if (with_sigma) out.sigma = stochastic_head(actor, out.s_w, cfg);
  return out;
}

Tensor gaussian_log_density(const Tensor& mu, const Tensor& sigma, const Tensor& a) {
  const Tensor z = div(sub(a, mu), sigma);
  const Real half_log_2pi = static_cast<Real>(0.5 * std::log(2.0 * std::numbers::pi));
  return shift(sub(scale(square(z), Real{-0.5}), log(sigma)), -half_log_2pi);
}

Tensor log_prob(const Tensor& mu, const Tensor& sigma, const Tensor& a) { return sum(gaussian_log_density(mu, sigma, a)); }

ParamSet make_world_model(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamSet ps;
  ps.add_xavier("w1", cfg.d_s + 2 * cfg.n, cfg.wm_hidden, rng);
  ps.add_zeros("b1", {1, cfg.wm_hidden});
  ps.add_xavier("w2", cfg.wm_hidden, cfg.d_s, rng);
  ps.add_zeros("b2", {1, cfg.d_s});
  return ps;
}

Tensor world_model_step(const ParamSet& wm, const Tensor& s, const Tensor& actions) {
  if (s.rows() != actions.rows()) {
    throw DimensionError("world model batch mismatch: " + shape_str(s.shape()) + " vs " + shape_str(actions.shape()));
  }
  const Tensor parts[] = {s, actions};
  const Tensor h = tanh(linear(concat_cols(parts), wm.get("w1"), wm.get("b1")));
  return linear(h, wm.get("w2"), wm.get("b2"));
}

ParamSet make_critic(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamSet ps;
  ps.add_xavier("w1", cfg.d_s, cfg.critic_hidden, rng);
  ps.add_zeros("b1", {1, cfg.critic_hidden});
  ps.add_xavier("w2", cfg.critic_hidden, 1, rng);
  ps.add_zeros("b2", {1, 1});
  return ps;
}

Tensor critic_value(const ParamSet& critic, const Tensor& s) {
  const Tensor h = tanh(linear(s, critic.get("w1"), critic.get("b1")));
  return linear(h, critic.get("w2"), critic.get("b2"));
}

Tensor CriticPair::value(const Tensor& s, Which which) const {
  return critic_value(which == Which::kLearning ? learning : reference, s);
}

void CriticPair::ema_update() {
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("ema decay must lie in (0, 1)");
  check_parity(reference, learning);
  const auto d = static_cast<Real>(ema_decay);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    auto r = reference.entry(i).value.mutable_data();
    const auto l = learning.entry(i).value.data();
    // Written as r + (1 - d)(l - r) so that l == r leaves r bit-identical.
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += (Real{1} - d) * (l[j] - r[j]);
  }
}

void CriticPair::hard_sync() { reference.copy_values_from(learning); }

CriticPair make_critic_pair(const ModelConfig& cfg, std::mt19937_64& rng, double ema_decay) {
  CriticPair pair;
  pair.learning = make_critic(cfg, rng);
  pair.reference = pair.learning.clone();
  pair.ema_decay = ema_decay;
  return pair;
}

PolicyModel make_model(const ModelConfig& cfg, std::uint64_t seed, double ema_decay) {
  PolicyModel m;
  m.cfg = cfg;
  std::mt19937_64 rng(seed);
  m.encoder = make_encoder(cfg, rng);
  m.world_model = make_world_model(cfg, rng);
  m.il = make_actor(cfg, ActorTag::kIL, rng);
  m.rl = make_actor(cfg, ActorTag::kRL, rng);
  m.critic = make_critic_pair(cfg, rng, ema_decay);
  return m;
}

void save_model(Checkpoint& ckpt, const PolicyModel& m) {
  ckpt.metadata["model"] = m.cfg.to_json();
  ckpt.metadata["actors"] = {{"il", to_string(m.il.tag)}, {"rl", to_string(m.rl.tag)}};
  ckpt.metadata["critic_ema_decay"] = m.critic.ema_decay;
  ckpt.put_params("encoder.", m.encoder);
  ckpt.put_params("world_model.", m.world_model);
  ckpt.put_params("actor_il.", m.il.params);
  ckpt.put_params("actor_rl.", m.rl.params);
  ckpt.put_params("critic.", m.critic.learning);
  ckpt.put_params("critic_ref.", m.critic.reference);
}

void load_model(const Checkpoint& ckpt, PolicyModel& m) {
  ckpt.restore_params("encoder.", m.encoder);
  ckpt.restore_params("world_model.", m.world_model);
  ckpt.restore_params("actor_il.", m.il.params);
  ckpt.restore_params("actor_rl.", m.rl.params);
  ckpt.restore_params("critic.", m.critic.learning);
  ckpt.restore_params("critic_ref.", m.critic.reference);
}

}  // namespace model
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
