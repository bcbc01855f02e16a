#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "coirl/model/model.hpp"
#include "coirl/world/dataset.hpp"

namespace coirl::eval {

inline constexpr std::size_t kHorizons = 3;
// 1 s / 2 s / 3 s at 2 Hz
inline constexpr std::array<std::size_t, kHorizons> kHorizonSteps = {2, 4, 6};

// One evaluated record; key is "scene_id:t".
struct RecordEval {
  std::string key;
  std::string scene_id;
  std::size_t t = 0;
  std::array<double, kHorizons> l2{};
  // Collision at any step up to the horizon.
  std::array<bool, kHorizons> collided{};
};

struct EvalResult {
  std::vector<RecordEval> records;
  std::array<double, kHorizons> l2{};
  std::array<double, kHorizons> collision_rate{};  // percent
  double l2_avg = 0.0;
  double collision_avg = 0.0;
  std::string tag;
};

// Ordered-fixed aggregation of per-record entries. Empty input -> UsageError.
EvalResult aggregate(std::vector<RecordEval> records, std::string tag = {});

// Produces the n ego-frame actions for a record.
using ActionSource = std::function<std::vector<world::Vec2>(const world::ExpertRecord&)>;

ActionSource policy_actions(const model::PolicyModel& m, model::ActorTag actor);
ActionSource expert_actions();

RecordEval evaluate_record(const world::Dataset& data, std::size_t record, std::span<const world::Vec2> actions);

// Reference kernel and the OpenMP counterpart; identical results.
EvalResult evaluate_serial(const ActionSource& source, const world::Dataset& data, std::span<const std::size_t> records);
EvalResult evaluate_parallel(const ActionSource& source, const world::Dataset& data,
                             std::span<const std::size_t> records);
// Mode-action rollout of an actor over a record subset (parallel kernel).
EvalResult evaluate(const model::PolicyModel& m, model::ActorTag actor, const world::Dataset& data,
                    std::span<const std::size_t> records);

// Per-record dump: key,scene_id,t,l2_1s,l2_2s,l2_3s,col_1s,col_2s,col_3s
std::string dump_csv(const EvalResult& r);
std::vector<RecordEval> parse_dump(const std::string& csv);
std::string summary_json(const EvalResult& r);

enum class LongTailMode { kL2, kCollision };
std::string to_string(LongTailMode m);
LongTailMode longtail_mode_from_string(const std::string& s);

struct LongTailSpec {
  LongTailMode mode = LongTailMode::kCollision;
  std::array<double, kHorizons> l2_thresholds = {0.3, 0.5, 1.0};

  void validate() const;
};

// Keys of the baseline records that pass the filter (baseline order).
std::vector<std::string> build_longtail(const EvalResult& baseline, const LongTailSpec& spec);
// Record indices of data whose key is in the subset.
std::vector<std::size_t> select_records(const world::Dataset& data, std::span<const std::size_t> pool,
                                        const std::vector<std::string>& keys);
std::string record_key(const world::ExpertRecord& r);

// Throws DataError when any training scene of data is not from `domain`.
void check_domain_purity(const world::Dataset& data, world::Domain domain);

struct GeneralizationReport {
  EvalResult in_domain;
  EvalResult out_domain;
  double l2_gap = 0.0;         // out - in, average L2
  double collision_gap = 0.0;  // out - in, average collision rate
};

// Trained-domain purity is checked on train_data before anything is scored.
GeneralizationReport generalization_eval(const model::PolicyModel& m, model::ActorTag actor,
                                         const world::Dataset& train_data, world::Domain train_domain,
                                         const world::Dataset& test_in, const world::Dataset& test_out);

}  // namespace coirl::eval
