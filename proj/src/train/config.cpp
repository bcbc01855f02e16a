#include "coirl/train/config.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "coirl/util/digest.hpp"
#include "coirl/util/files.hpp"
#include "coirl/util/text.hpp"

namespace coirl::train {
namespace {

const char* const kStrategyNames[] = {"pure_il",         "pure_rl",          "loss_merging",  "il_rl_interval",
                                      "two_stage",       "decoupled_nocomp", "decoupled_comp"};
const char* const kRLMethodNames[] = {"naive_pggs", "adcgs_step_aware"};

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return util::parse_double(v);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    return util::parse_int(v);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const auto i = to_int(key, v);
  if (i < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(i);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return util::format_double(v);
}

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
#define COIRL_DOUBLE(key, member) \
  t[key] = {[](const TrainConfig& c) { return num(c.member); }, \
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }}
#define COIRL_INT(key, member) \
  t[key] = {[](const TrainConfig& c) { return std::to_string(c.member); }, \
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_int(k, v); }}
#define COIRL_SIZE(key, member) \
  t[key] = {[](const TrainConfig& c) { return std::to_string(c.member); }, \
            [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = to_size(k, v); }}
    t["strategy"] = {[](const TrainConfig& c) { return to_string(c.strategy); },
                     [](TrainConfig& c, const std::string&, const std::string& v) {
                       try {
                         c.strategy = strategy_from_string(v);
                       } catch (const UsageError& e) {
                         throw ConfigError(e.what());
                       }
                     }};
    t["rl_method"] = {[](const TrainConfig& c) { return to_string(c.rl_method); },
                      [](TrainConfig& c, const std::string&, const std::string& v) {
                        try {
                          c.rl_method = rl_method_from_string(v);
                        } catch (const UsageError& e) {
                          throw ConfigError(e.what());
                        }
                      }};
    t["seed"] = {[](const TrainConfig& c) { return std::to_string(c.seed); },
                 [](TrainConfig& c, const std::string& k, const std::string& v) {
                   c.seed = static_cast<std::uint64_t>(to_size(k, v));
                 }};
    t["pure_rl_train_world_model"] = {
        [](const TrainConfig& c) { return std::string(c.pure_rl_train_world_model ? "true" : "false"); },
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.pure_rl_train_world_model = to_bool(k, v); }};
    t["model.mask"] = {[](const TrainConfig& c) { return model::to_string(c.model.mask); },
                       [](TrainConfig& c, const std::string& k, const std::string& v) {
                         try {
                           c.model.mask = model::mask_mode_from_string(v);
                         } catch (const std::exception&) {
                           throw ConfigError(k + ": unknown mask '" + v + "'");
                         }
                       }};
    COIRL_INT("total_iters", total_iters);
    COIRL_DOUBLE("lr", lr);
    COIRL_DOUBLE("lr_min", lr_min);
    COIRL_DOUBLE("rl_lr_scale", rl_lr_scale);
    COIRL_INT("warmup", warmup);
    COIRL_DOUBLE("weight_decay", weight_decay);
    COIRL_DOUBLE("alpha", alpha);
    COIRL_DOUBLE("beta", beta);
    COIRL_DOUBLE("gamma", gamma);
    COIRL_SIZE("group_size", group_size);
    COIRL_DOUBLE("ema_decay", ema_decay);
    COIRL_INT("competition.k", competition.k);
    COIRL_DOUBLE("competition.p", competition.p);
    COIRL_DOUBLE("competition.theta_mod", competition.theta_mod);
    COIRL_DOUBLE("competition.theta_sig", competition.theta_sig);
    COIRL_SIZE("competition.eval_batch", competition.eval_batch);
    COIRL_INT("interval_period", interval_period);
    COIRL_DOUBLE("stage_split", stage_split);
    COIRL_INT("checkpoint_every", checkpoint_every);
    COIRL_SIZE("model.d_s", model.d_s);
    COIRL_SIZE("model.d_w", model.d_w);
    COIRL_SIZE("model.kv_slots", model.kv_slots);
    COIRL_SIZE("model.wm_hidden", model.wm_hidden);
    COIRL_SIZE("model.critic_hidden", model.critic_hidden);
    COIRL_DOUBLE("model.sigma_min", model.sigma_min);
    COIRL_DOUBLE("model.sigma_max", model.sigma_max);
    COIRL_DOUBLE("model.sigma_init", model.sigma_init);
#undef COIRL_DOUBLE
#undef COIRL_INT
#undef COIRL_SIZE
    return t;
  }();
  return table;
}

}  // namespace

std::string to_string(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }
std::string to_string(RLMethod m) { return kRLMethodNames[static_cast<int>(m)]; }

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names(std::begin(kStrategyNames), std::end(kStrategyNames));
  return names;
}

const std::vector<std::string>& rl_method_names() {
  static const std::vector<std::string> names(std::begin(kRLMethodNames), std::end(kRLMethodNames));
  return names;
}

Strategy strategy_from_string(const std::string& s) {
  const auto& names = strategy_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<Strategy>(i);
  }
  throw UsageError("unknown strategy '" + s + "'; valid: " + join(names));
}

RLMethod rl_method_from_string(const std::string& s) {
  const auto& names = rl_method_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<RLMethod>(i);
  }
  throw UsageError("unknown rl method '" + s + "'; valid: " + join(names));
}

bool is_decoupled(Strategy s) { return s == Strategy::kDecoupledNoComp || s == Strategy::kDecoupledComp; }

double LRSchedule::at(std::int64_t iteration) const {
  if (iteration < warmup) return peak * static_cast<double>(iteration + 1) / static_cast<double>(warmup);
  const double span = static_cast<double>(std::max<std::int64_t>(1, total - warmup));
  const double progress = std::min(1.0, static_cast<double>(iteration - warmup) / span);
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key: " + key);
  it->second.set(*this, key, value);
}

void TrainConfig::validate() const {
  if (total_iters <= 0) throw ConfigError("total_iters must be positive");
  if (!(lr > 0.0) || !(lr_min >= 0.0) || lr_min > lr) throw ConfigError("need 0 <= lr_min <= lr and lr > 0");
  if (!(rl_lr_scale > 0.0)) throw ConfigError("rl_lr_scale must be positive");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0, 1]");
  competition.validate();
  if (interval_period <= 0) throw ConfigError("interval_period must be positive");
  if (!(stage_split >= 0.0 && stage_split <= 1.0)) throw ConfigError("stage_split must lie in [0, 1]");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (model.d_s == 0 || model.d_w == 0 || model.kv_slots == 0 || model.wm_hidden == 0 || model.critic_hidden == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (!(model.sigma_min > 0.0 && model.sigma_min <= model.sigma_init && model.sigma_init <= model.sigma_max)) {
    throw ConfigError("need 0 < sigma_min <= sigma_init <= sigma_max");
  }
}

std::string TrainConfig::canonical_text() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(*this) << '\n';
  return os.str();
}

std::string TrainConfig::hash() const { return util::digest_hex(canonical_text()); }

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto trimmed = util::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = util::trim(std::string_view(trimmed).substr(0, eq));
    const auto value = util::trim(std::string_view(trimmed).substr(eq + 1));
    if (!seen.emplace(key, lineno).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const DataError& e) {
    throw UsageError(std::string("cannot read config: ") + e.what());
  }
  return parse(text);
}

}  // namespace coirl::train
