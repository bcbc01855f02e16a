#include "coirl/train/competition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "coirl/objectives/rl.hpp"
#include "coirl/train/records.hpp"
#include "coirl/util/text.hpp"

namespace coirl::train {

void CompetitionConfig::validate() const {
  if (k <= 0) throw ConfigError("competition.k must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("competition.p must lie in [0, 1]");
  if (!(theta_mod >= 0.0)) throw ConfigError("competition.theta_mod must be non-negative");
  if (!(theta_sig >= theta_mod)) throw ConfigError("competition.theta_sig must be >= theta_mod");
  if (eval_batch == 0) throw ConfigError("competition.eval_batch must be positive");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kComparable: return "comparable";
    case Outcome::kModerateIL: return "moderate_il";
    case Outcome::kModerateRL: return "moderate_rl";
    case Outcome::kSignificantIL: return "significant_il";
    case Outcome::kSignificantRL: return "significant_rl";
  }
  return "?";
}

std::string to_string(MergeAction a) {
  switch (a) {
    case MergeAction::kNone: return "none";
    case MergeAction::kSoftMerge: return "soft_merge";
    case MergeAction::kHardReplace: return "hard_replace";
  }
  return "?";
}

Outcome outcome_from_string(const std::string& s) {
  for (auto o : {Outcome::kComparable, Outcome::kModerateIL, Outcome::kModerateRL, Outcome::kSignificantIL,
                 Outcome::kSignificantRL}) {
    if (to_string(o) == s) return o;
  }
  throw DataError("unknown contest outcome: " + s);
}

MergeAction action_from_string(const std::string& s) {
  for (auto a : {MergeAction::kNone, MergeAction::kSoftMerge, MergeAction::kHardReplace}) {
    if (to_string(a) == s) return a;
  }
  throw DataError("unknown merge action: " + s);
}

ContestSet make_contest_set(const world::Dataset& data, std::size_t eval_batch, std::uint64_t seed) {
  auto pool = data.record_indices(world::Split::kContest);
  if (pool.empty()) throw UsageError("dataset has no contest records");
  std::mt19937_64 rng(world::mix_seed(seed, 0xC0C0));
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > eval_batch) pool.resize(eval_batch);
  std::sort(pool.begin(), pool.end());
  return {&data, std::move(pool)};
}

std::vector<double> actor_returns(const ActorBundle& actor, const PolicyModel& shared, const ContestSet& set) {
  if (set.data == nullptr || set.records.empty()) throw UsageError("empty contest set");
  const auto& data = *set.data;
  ad::NoGradGuard no_grad;
  std::vector<world::CollisionQuery> queries;
  std::vector<std::vector<world::Vec2>> actions;
  queries.reserve(set.records.size());
  actions.reserve(set.records.size());
  for (std::size_t idx : set.records) {
    const auto& rec = data.records.at(idx);
    const auto s = model::encode(shared.encoder, obs_tensor(rec.obs));
    const auto out = model::act(actor, s, shared.cfg, false);
    actions.push_back(tensor_actions(out.mu));
    queries.push_back({&data.scene_of(rec), rec.t, objectives::positions_from_actions(actions.back())});
  }
  const auto reports = world::check_collision_batch_parallel(queries, data.world);
  std::vector<double> out(set.records.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = objectives::rewards_from(actions[i], data.records[set.records[i]].expert, reports[i].collided).total();
  }
  return out;
}

double score_actor(const ActorBundle& actor, const PolicyModel& shared, const ContestSet& set) {
  const auto r = actor_returns(actor, shared, set);
  double total = 0.0;
  for (double v : r) total += v;
  return total / static_cast<double>(r.size());
}

Outcome judge(double score_il, double score_rl, const CompetitionConfig& cfg) {
  const double delta = score_il - score_rl;
  if (delta == 0.0) return Outcome::kComparable;
  const bool il_wins = delta > 0.0;
  const double winner = il_wins ? score_il : score_rl;
  const double gap = std::abs(delta) / std::max(std::abs(winner), 1e-6);
  if (gap < cfg.theta_mod) return Outcome::kComparable;
  if (gap < cfg.theta_sig) return il_wins ? Outcome::kModerateIL : Outcome::kModerateRL;
  return il_wins ? Outcome::kSignificantIL : Outcome::kSignificantRL;
}

bool is_stochastic_head(const std::string& param_name) { return param_name.starts_with("sigma."); }

void soft_merge(const ActorBundle& winner, ActorBundle& loser, double p) {
  ad::check_parity(winner.params, loser.params);
  const Real keep = static_cast<Real>(p);
  const Real take = static_cast<Real>(1.0 - p);
  for (std::size_t i = 0; i < loser.params.size(); ++i) {
    auto& dst_entry = loser.params.entry(i);
    if (is_stochastic_head(dst_entry.name)) continue;
    const auto& src_tensor = winner.params.entry(i).value;
    const auto src = src_tensor.data();
    auto dst = dst_entry.value.mutable_data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = keep * dst[j] + take * src[j];
  }
}

void hard_replace(const ActorBundle& winner, ActorBundle& loser, ad::AdamW* loser_optimizer) {
  loser.params.copy_values_from(winner.params);
  if (loser_optimizer != nullptr) loser_optimizer->reset();
}

void ContestLedger::record(const ContestResult& r) {
  contests.push_back(r);
  switch (r.outcome) {
    case Outcome::kModerateIL:
    case Outcome::kSignificantIL: ++wins_il; break;
    case Outcome::kModerateRL:
    case Outcome::kSignificantRL: ++wins_rl; break;
    case Outcome::kComparable: break;
  }
}

std::string ContestLedger::to_csv() const {
  std::ostringstream os;
  os << "iteration,score_il,score_rl,outcome,action\n";
  for (const auto& c : contests) {
    os << c.iteration << ',' << util::format_double(c.score_il) << ',' << util::format_double(c.score_rl) << ','
       << to_string(c.outcome) << ',' << to_string(c.action) << '\n';
  }
  return os.str();
}

ContestLedger ContestLedger::from_csv(const std::string& text) {
  ContestLedger ledger;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || util::trim(line) != "iteration,score_il,score_rl,outcome,action") {
    throw DataError("contest ledger: bad header");
  }
  while (std::getline(is, line)) {
    if (util::trim(line).empty()) continue;
    const auto f = util::split(util::trim(line), ',');
    if (f.size() != 5) throw DataError("contest ledger: expected 5 fields in '" + line + "'");
    ContestResult r;
    r.iteration = util::parse_int(f[0]);
    r.score_il = util::parse_double(f[1]);
    r.score_rl = util::parse_double(f[2]);
    r.outcome = outcome_from_string(f[3]);
    r.action = action_from_string(f[4]);
    ledger.record(r);
  }
  return ledger;
}

ContestResult run_contest(std::int64_t iteration, PolicyModel& m, const ContestSet& set, const CompetitionConfig& cfg,
                          ad::AdamW& il_opt, ad::AdamW& rl_opt) {
  ContestResult r;
  r.iteration = iteration;
  r.score_il = score_actor(m.il, m, set);
  r.score_rl = score_actor(m.rl, m, set);
  r.outcome = judge(r.score_il, r.score_rl, cfg);
  switch (r.outcome) {
    case Outcome::kComparable: r.action = MergeAction::kNone; break;
    case Outcome::kModerateIL: soft_merge(m.il, m.rl, cfg.p); r.action = MergeAction::kSoftMerge; break;
    case Outcome::kModerateRL: soft_merge(m.rl, m.il, cfg.p); r.action = MergeAction::kSoftMerge; break;
    case Outcome::kSignificantIL: hard_replace(m.il, m.rl, &rl_opt); r.action = MergeAction::kHardReplace; break;
    case Outcome::kSignificantRL: hard_replace(m.rl, m.il, &il_opt); r.action = MergeAction::kHardReplace; break;
  }
  return r;
}

}  // namespace coirl::train
