#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "coirl/autodiff/optim.hpp"
#include "coirl/model/model.hpp"
#include "coirl/world/dataset.hpp"

namespace coirl::train {

using model::ActorBundle;
using model::PolicyModel;

struct CompetitionConfig {
  std::int64_t k = 500;
  double p = 0.9;
  double theta_mod = 0.05;
  double theta_sig = 0.20;
  std::size_t eval_batch = 64;

  // Throws ConfigError. theta values may be +inf to disable a tier.
  void validate() const;
};

enum class Outcome { kComparable, kModerateIL, kModerateRL, kSignificantIL, kSignificantRL };
enum class MergeAction { kNone, kSoftMerge, kHardReplace };

std::string to_string(Outcome o);
std::string to_string(MergeAction a);
Outcome outcome_from_string(const std::string& s);
MergeAction action_from_string(const std::string& s);

struct ContestResult {
  std::int64_t iteration = 0;
  double score_il = 0.0;
  double score_rl = 0.0;
  Outcome outcome = Outcome::kComparable;
  MergeAction action = MergeAction::kNone;
};

// Records scored in contests; fixed for the whole run.
struct ContestSet {
  const world::Dataset* data = nullptr;
  std::vector<std::size_t> records;
};

// Draws eval_batch records (without replacement) from the contest split.
ContestSet make_contest_set(const world::Dataset& data, std::size_t eval_batch, std::uint64_t seed);

// Per-record cumulative mode-action reward.
std::vector<double> actor_returns(const ActorBundle& actor, const PolicyModel& shared, const ContestSet& set);
// Mean over the contest set of the summed per-step reward of the mode actions.
double score_actor(const ActorBundle& actor, const PolicyModel& shared, const ContestSet& set);

Outcome judge(double score_il, double score_rl, const CompetitionConfig& cfg);

// loser <- p * loser + (1 - p) * winner on every parameter except the
// stochastic head (the IL actor never trains it).
void soft_merge(const ActorBundle& winner, ActorBundle& loser, double p);
// Bitwise copy of all parameters; the loser's optimizer moments are reset.
void hard_replace(const ActorBundle& winner, ActorBundle& loser, ad::AdamW* loser_optimizer = nullptr);

bool is_stochastic_head(const std::string& param_name);

struct ContestLedger {
  std::vector<ContestResult> contests;
  std::int64_t wins_il = 0;
  std::int64_t wins_rl = 0;

  void record(const ContestResult& r);
  [[nodiscard]] std::string to_csv() const;
  static ContestLedger from_csv(const std::string& text);
};

// Runs one contest and applies the tiered merge. Only actor bundles change.
ContestResult run_contest(std::int64_t iteration, PolicyModel& m, const ContestSet& set, const CompetitionConfig& cfg,
                          ad::AdamW& il_opt, ad::AdamW& rl_opt);

}  // namespace coirl::train
