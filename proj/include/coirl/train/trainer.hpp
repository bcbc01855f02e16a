#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coirl/autodiff/checkpoint.hpp"
#include "coirl/objectives/il.hpp"
#include "coirl/objectives/rl.hpp"
#include "coirl/train/competition.hpp"
#include "coirl/train/config.hpp"

namespace coirl::train {

enum class Phase { kIL, kRL, kMerged };
std::string to_string(Phase p);

struct IterationTrace {
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;
  std::size_t record = 0;
  double lr = 0.0;
  std::vector<Phase> phases;
  std::optional<objectives::ILLossReport> il;
  std::optional<objectives::RLLossReport> rl;
  std::optional<ContestResult> contest;
  double wall_seconds = 0.0;  // kept out of the metrics stream
};

std::string metrics_header();
// Deterministic row (no timing fields).
std::string metrics_row(const IterationTrace& t);

struct FinalScores {
  double score_il = 0.0;
  double score_rl = 0.0;
};

// Single-actor strategies return their slot; decoupled strategies return the
// higher final scorer, IL on ties.
model::ActorTag select_inference_actor(Strategy s, const std::optional<FinalScores>& scores);
// Actor slot trained by a single-actor strategy.
model::ActorTag single_actor_slot(Strategy s);

class Trainer {
 public:
  Trainer(TrainConfig cfg, const world::Dataset& data);

  // Runs one full iteration (phases plus a contest on the k boundary).
  IterationTrace step();
  [[nodiscard]] bool finished() const { return iteration_ >= cfg_.total_iters; }
  [[nodiscard]] std::int64_t iteration() const { return iteration_; }

  // Phase bodies, exposed for freeze probes. Each zeroes all gradients first
  // and leaves the gradients of its backward pass in place.
  objectives::ILLossReport il_phase(model::ActorTag actor, std::size_t record, double lr);
  objectives::RLLossReport rl_phase(model::ActorTag actor, std::size_t record, double lr, bool train_encoder,
                                    std::mt19937_64& rng);
  std::pair<objectives::ILLossReport, objectives::RLLossReport> merged_phase(std::size_t record, double lr,
                                                                             std::mt19937_64& rng);

  // Phases scheduled for an iteration.
  [[nodiscard]] std::vector<Phase> phases_at(std::int64_t iteration) const;
  // Record drawn at an iteration: epoch-wise seeded shuffle of the train split.
  [[nodiscard]] std::size_t record_at(std::int64_t iteration);

  [[nodiscard]] FinalScores final_scores() const;
  [[nodiscard]] model::ActorTag inference_actor() const;

  [[nodiscard]] ad::Checkpoint checkpoint() const;
  // Restores parameters, optimizer moments, iteration and ledger.
  void restore(const ad::Checkpoint& ckpt);

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  [[nodiscard]] model::PolicyModel& model() { return model_; }
  [[nodiscard]] const model::PolicyModel& model() const { return model_; }
  [[nodiscard]] const ContestLedger& ledger() const { return ledger_; }
  [[nodiscard]] const ContestSet& contest_set() const { return contest_set_; }

 private:
  void zero_all_grads();

  TrainConfig cfg_;
  const world::Dataset* data_;
  model::PolicyModel model_;
  ad::AdamW opt_encoder_, opt_wm_, opt_il_, opt_rl_, opt_critic_;
  std::vector<std::size_t> train_records_;
  std::int64_t order_epoch_ = -1;
  std::vector<std::size_t> order_;
  ContestSet contest_set_;
  ContestLedger ledger_;
  std::int64_t iteration_ = 0;
};

struct RunOptions {
  bool resume = false;
  bool force = false;  // overwrite an existing run directory
  // Stop (checkpointing) after this many iterations; simulates an interruption.
  std::optional<std::int64_t> stop_after;
  std::function<void(const IterationTrace&)> on_iteration;
};

inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kContestsFile = "contests.csv";
inline constexpr const char* kTimingFile = "timing.csv";
inline constexpr const char* kRunManifestFile = "run_manifest.json";
inline constexpr const char* kDiagnosticFile = "diagnostic.json";

// Trains into out_dir. Writes the checkpoint, metrics stream, contest ledger,
// timing log and run manifest. On a NumericalError a diagnostic snapshot is
// written before rethrowing.
void train_run(const TrainConfig& cfg, const world::Dataset& data, const std::string& dataset_ref,
               const std::filesystem::path& out_dir, const RunOptions& opts = {});

}  // namespace coirl::train
