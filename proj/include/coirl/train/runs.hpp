#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coirl/autodiff/checkpoint.hpp"
#include "coirl/train/evaluation.hpp"
#include "coirl/train/trainer.hpp"

namespace coirl::train {

// Rebuilds the model described by a checkpoint and loads its parameters.
model::PolicyModel model_from_checkpoint(const ad::Checkpoint& ckpt);
// Actor named in a finished checkpoint; IL when the run did not finish.
model::ActorTag inference_actor_of(const ad::Checkpoint& ckpt);
// DataError with an explanation when the checkpoint was trained on a
// different world config than the dataset uses.
void check_dataset_compat(const ad::Checkpoint& ckpt, const world::Dataset& data);

inline constexpr const char* kEvalSummaryFile = "eval_summary.json";
inline constexpr const char* kEvalDumpFile = "eval_per_record.csv";

void write_eval(const std::filesystem::path& dir, const eval::EvalResult& r, const std::string& prefix = "eval");
eval::EvalResult read_eval_summary(const std::filesystem::path& path);

// train_run followed by a test-split evaluation of the inference actor.
eval::EvalResult train_and_evaluate(const TrainConfig& cfg, const world::Dataset& data, const std::string& dataset_ref,
                                    const std::filesystem::path& out_dir, const RunOptions& opts = {});

struct RunSummary {
  std::filesystem::path dir;
  std::string strategy;
  std::string rl_method;
  std::uint64_t seed = 0;
  eval::EvalResult eval;  // aggregates only
  ContestLedger ledger;
};

// Missing or unreadable pieces -> nullopt with a line written to warn.
std::optional<RunSummary> load_run(const std::filesystem::path& dir, std::ostream& warn);

// One row per run: strategy,rl_method,seed,l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg
std::string comparison_table_csv(const std::vector<RunSummary>& runs);
// Seed means per (strategy, rl_method), same columns with a run count.
std::string strategy_means_csv(const std::vector<RunSummary>& runs);
std::string comparison_table_text(const std::vector<RunSummary>& runs);
// iteration,wins_il,wins_rl,score_diff with one row per contest.
std::string wins_series_csv(const ContestLedger& ledger);

}  // namespace coirl::train
