#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coirl/model/model.hpp"
#include "coirl/train/competition.hpp"

namespace coirl::train {

enum class Strategy { kPureIL, kPureRL, kLossMerging, kILRLInterval, kTwoStage, kDecoupledNoComp, kDecoupledComp };
enum class RLMethod { kNaivePGGS, kADCGSStepAware };

std::string to_string(Strategy s);
std::string to_string(RLMethod m);
// Both throw UsageError listing the valid names.
Strategy strategy_from_string(const std::string& s);
RLMethod rl_method_from_string(const std::string& s);
const std::vector<std::string>& strategy_names();
const std::vector<std::string>& rl_method_names();

bool is_decoupled(Strategy s);

// Cosine annealing with linear warmup. Iterations are 0-based.
struct LRSchedule {
  double peak = 1e-3;
  double floor = 1e-5;
  std::int64_t warmup = 200;
  std::int64_t total = 1000;

  [[nodiscard]] double at(std::int64_t iteration) const;
};

struct TrainConfig {
  Strategy strategy = Strategy::kDecoupledComp;
  RLMethod rl_method = RLMethod::kADCGSStepAware;
  std::int64_t total_iters = 20000;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  double lr_min = 1e-5;
  double rl_lr_scale = 1.0;  // multiplies the RL-phase learning rate (actor and critic)
  std::int64_t warmup = 500;
  double weight_decay = 1e-4;
  double alpha = 1.0;
  double beta = 0.005;
  double gamma = 0.9;
  std::size_t group_size = 8;
  double ema_decay = 0.99;
  CompetitionConfig competition;
  std::int64_t interval_period = 100;
  double stage_split = 0.5;
  bool pure_rl_train_world_model = true;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  model::ModelConfig model;

  // Throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  [[nodiscard]] LRSchedule schedule() const { return {lr, lr_min, warmup, total_iters}; }

  // Every key, sorted, one "key = value" per line.
  [[nodiscard]] std::string canonical_text() const;
  [[nodiscard]] std::string hash() const;

  // Flat "key = value" text; '#' starts a comment.
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

}  // namespace coirl::train
