#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "coirl/autodiff/checkpoint.hpp"
#include "coirl/autodiff/ops.hpp"
#include "coirl/autodiff/params.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace model {

using ad::AttentionMask;
using ad::ParamSet;
using ad::Tensor;

enum class MaskMode { kNone, kCausal, kInverseCausal };

std::string to_string(MaskMode m);
MaskMode mask_mode_from_string(const std::string& s);
AttentionMask make_mask(MaskMode mode, std::size_t n);

struct ModelConfig {
  std::size_t obs_width = 55;
  std::size_t d_s = 64;
  std::size_t d_w = 64;
  std::size_t n = 6;
  std::size_t kv_slots = 4;
  std::size_t wm_hidden = 128;
  std::size_t critic_hidden = 64;
  MaskMode mask = MaskMode::kInverseCausal;
  double sigma_min = 1e-3;
  double sigma_max = 2.0;
  double sigma_init = 0.5;  // initial stochastic-head output

  [[nodiscard]] nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// ---- perception encoder -------------------------------------------------------

ParamSet make_encoder(const ModelConfig& cfg, std::mt19937_64& rng);
// [B x obs_width] -> [B x d_s]: tanh(tanh(o W1 + b1) W2 + b2)
Tensor encode(const ParamSet& enc, const Tensor& obs);

// ---- actors -------------------------------------------------------------------

enum class ActorTag { kIL, kRL };
std::string to_string(ActorTag t);

struct ActorBundle {
  ParamSet params;
  ActorTag tag = ActorTag::kIL;
};

ActorBundle make_actor(const ModelConfig& cfg, ActorTag tag, std::mt19937_64& rng);

// Learned waypoint queries cross-attend to kv_slots projections of s [1 x d_s].
Tensor waypoint_attend(const ActorBundle& actor, const Tensor& s, const ModelConfig& cfg);
// One residual self-attention layer over waypoint rows.
Tensor backward_plan(const ActorBundle& actor, const Tensor& s_w, MaskMode mode);
// Per-row linear heads: mu [n x 2] and sigma [n x 2].
Tensor plan_head(const ActorBundle& actor, const Tensor& s_w);
Tensor stochastic_head(const ActorBundle& actor, const Tensor& s_w, const ModelConfig& cfg);

struct PolicyOutput {
  Tensor s_w;  // after backward planning
  Tensor mu;
  Tensor sigma;
};

PolicyOutput act(const ActorBundle& actor, const Tensor& s, const ModelConfig& cfg, bool with_sigma = true);

// Elementwise log N(a | mu, sigma^2); all three [rows x 2].
Tensor gaussian_log_density(const Tensor& mu, const Tensor& sigma, const Tensor& a);
// Sum over all steps and both coordinates.
Tensor log_prob(const Tensor& mu, const Tensor& sigma, const Tensor& a);

// ---- latent world model ---------------------------------------------------------

ParamSet make_world_model(const ModelConfig& cfg, std::mt19937_64& rng);
// s [B x d_s], actions [B x 2n] (flattened sequence) -> s_hat' [B x d_s]
Tensor world_model_step(const ParamSet& wm, const Tensor& s, const Tensor& actions);

// ---- critic -----------------------------------------------------------------------

ParamSet make_critic(const ModelConfig& cfg, std::mt19937_64& rng);
// s [B x d_s] -> [B x 1]
Tensor critic_value(const ParamSet& critic, const Tensor& s);

struct CriticPair {
  ParamSet learning;
  ParamSet reference;
  double ema_decay = 0.99;

  enum class Which { kLearning, kReference };
  [[nodiscard]] Tensor value(const Tensor& s, Which which) const;
  // reference <- decay * reference + (1 - decay) * learning
  void ema_update();
  void hard_sync();
};

CriticPair make_critic_pair(const ModelConfig& cfg, std::mt19937_64& rng, double ema_decay);

// ---- complete model ---------------------------------------------------------------

struct PolicyModel {
  ModelConfig cfg;
  ParamSet encoder;
  ParamSet world_model;
  ActorBundle il;
  ActorBundle rl;
  CriticPair critic;

  [[nodiscard]] ActorBundle& actor(ActorTag t) { return t == ActorTag::kIL ? il : rl; }
  [[nodiscard]] const ActorBundle& actor(ActorTag t) const { return t == ActorTag::kIL ? il : rl; }
};

PolicyModel make_model(const ModelConfig& cfg, std::uint64_t seed, double ema_decay = 0.99);

void save_model(ad::Checkpoint& ckpt, const PolicyModel& m);
void load_model(const ad::Checkpoint& ckpt, PolicyModel& m);

}  // namespace model
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
