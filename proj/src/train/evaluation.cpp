#include "coirl/train/evaluation.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "coirl/objectives/rl.hpp"
#include "coirl/train/records.hpp"
#include "coirl/util/text.hpp"
#include "coirl/world/collision.hpp"

namespace coirl::eval {

std::string record_key(const world::ExpertRecord& r) { return r.scene_id + ":" + std::to_string(r.t); }

EvalResult aggregate(std::vector<RecordEval> records, std::string tag) {
  if (records.empty()) throw UsageError("empty evaluation set");
  EvalResult out;
  out.tag = std::move(tag);
  for (const auto& r : records) {
    for (std::size_t h = 0; h < kHorizons; ++h) {
      out.l2[h] += r.l2[h];
      out.collision_rate[h] += r.collided[h] ? 1.0 : 0.0;
    }
  }
  const auto n = static_cast<double>(records.size());
  for (std::size_t h = 0; h < kHorizons; ++h) {
    out.l2[h] /= n;
    out.collision_rate[h] = 100.0 * out.collision_rate[h] / n;
  }
  out.l2_avg = (out.l2[0] + out.l2[1] + out.l2[2]) / 3.0;
  out.collision_avg = (out.collision_rate[0] + out.collision_rate[1] + out.collision_rate[2]) / 3.0;
  out.records = std::move(records);
  return out;
}

ActionSource policy_actions(const model::PolicyModel& m, model::ActorTag actor) {
  return [&m, actor](const world::ExpertRecord& rec) {
    ad::NoGradGuard no_grad;
    const auto s = model::encode(m.encoder, train::obs_tensor(rec.obs));
    return train::tensor_actions(model::act(m.actor(actor), s, m.cfg, false).mu);
  };
}

ActionSource expert_actions() {
  return [](const world::ExpertRecord& rec) { return rec.expert; };
}

RecordEval evaluate_record(const world::Dataset& data, std::size_t record, std::span<const world::Vec2> actions) {
  const auto& rec = data.records.at(record);
  if (actions.size() != rec.expert.size()) throw DimensionError("action count does not match the plan horizon");
  const auto pred = objectives::positions_from_actions(actions);
  const auto truth = objectives::positions_from_actions(rec.expert);
  const auto report = world::check_collision(pred, data.scene_of(rec), rec.t, data.world);
  RecordEval e;
  e.key = record_key(rec);
  e.scene_id = rec.scene_id;
  e.t = rec.t;
  bool hit = false;
  std::size_t step = 0;
  for (std::size_t h = 0; h < kHorizons; ++h) {
    const std::size_t last = kHorizonSteps[h];
    if (last > pred.size()) throw UsageError("plan horizon shorter than the 3 s metric horizon");
    const auto d = pred[last - 1] - truth[last - 1];
    e.l2[h] = std::hypot(d.x, d.y);
    for (; step < last; ++step) hit = hit || report.collided[step];
    e.collided[h] = hit;
  }
  return e;
}

EvalResult evaluate_serial(const ActionSource& source, const world::Dataset& data, std::span<const std::size_t> records) {
  std::vector<RecordEval> out;
  out.reserve(records.size());
  for (std::size_t idx : records) out.push_back(evaluate_record(data, idx, source(data.records.at(idx))));
  return aggregate(std::move(out));
}

EvalResult evaluate_parallel(const ActionSource& source, const world::Dataset& data,
                             std::span<const std::size_t> records) {
  std::vector<RecordEval> out(records.size());
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto idx = records[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = evaluate_record(data, idx, source(data.records.at(idx)));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return aggregate(std::move(out));
}

EvalResult evaluate(const model::PolicyModel& m, model::ActorTag actor, const world::Dataset& data,
                    std::span<const std::size_t> records) {
  return evaluate_parallel(policy_actions(m, actor), data, records);
}

std::string dump_csv(const EvalResult& r) {
  std::ostringstream os;
  os << "key,scene_id,t,l2_1s,l2_2s,l2_3s,col_1s,col_2s,col_3s\n";
  for (const auto& e : r.records) {
    os << e.key << ',' << e.scene_id << ',' << e.t;
    for (double v : e.l2) os << ',' << util::format_double(v);
    for (bool c : e.collided) os << ',' << (c ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

std::vector<RecordEval> parse_dump(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || util::trim(line) != "key,scene_id,t,l2_1s,l2_2s,l2_3s,col_1s,col_2s,col_3s") {
    throw DataError("evaluation dump: bad header");
  }
  std::vector<RecordEval> out;
  while (std::getline(is, line)) {
    const auto trimmed = util::trim(line);
    if (trimmed.empty()) continue;
    const auto f = util::split(trimmed, ',');
    if (f.size() != 9) throw DataError("evaluation dump: expected 9 fields in '" + line + "'");
    RecordEval e;
    e.key = f[0];
    e.scene_id = f[1];
    e.t = static_cast<std::size_t>(util::parse_int(f[2]));
    for (std::size_t h = 0; h < kHorizons; ++h) {
      e.l2[h] = util::parse_double(f[3 + h]);
      if (f[6 + h] != "0" && f[6 + h] != "1") throw DataError("evaluation dump: collision flag must be 0 or 1");
      e.collided[h] = f[6 + h] == "1";
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string summary_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["tag"] = r.tag;
  j["records"] = r.records.size();
  j["l2_1s"] = r.l2[0];
  j["l2_2s"] = r.l2[1];
  j["l2_3s"] = r.l2[2];
  j["l2_avg"] = r.l2_avg;
  j["col_1s"] = r.collision_rate[0];
  j["col_2s"] = r.collision_rate[1];
  j["col_3s"] = r.collision_rate[2];
  j["col_avg"] = r.collision_avg;
  return j.dump(2) + "\n";
}

std::string to_string(LongTailMode m) { return m == LongTailMode::kL2 ? "l2" : "collision"; }

LongTailMode longtail_mode_from_string(const std::string& s) {
  if (s == "l2") return LongTailMode::kL2;
  if (s == "collision") return LongTailMode::kCollision;
  throw UsageError("unknown long-tail mode '" + s + "'; valid: l2, collision");
}

void LongTailSpec::validate() const {
  if (!(l2_thresholds[0] < l2_thresholds[1] && l2_thresholds[1] < l2_thresholds[2])) {
    throw ConfigError("long-tail L2 thresholds must be strictly increasing");
  }
}

std::vector<std::string> build_longtail(const EvalResult& baseline, const LongTailSpec& spec) {
  spec.validate();
  std::vector<std::string> keys;
  for (const auto& e : baseline.records) {
    bool keep = false;
    if (spec.mode == LongTailMode::kL2) {
      keep = e.l2[0] > spec.l2_thresholds[0] && e.l2[1] > spec.l2_thresholds[1] && e.l2[2] > spec.l2_thresholds[2];
    } else {
      keep = e.collided[2];
    }
    if (keep) keys.push_back(e.key);
  }
  return keys;
}

std::vector<std::size_t> select_records(const world::Dataset& data, std::span<const std::size_t> pool,
                                        const std::vector<std::string>& keys) {
  const std::unordered_set<std::string> wanted(keys.begin(), keys.end());
  std::vector<std::size_t> out;
  for (std::size_t idx : pool) {
    if (wanted.contains(record_key(data.records.at(idx)))) out.push_back(idx);
  }
  return out;
}

void check_domain_purity(const world::Dataset& data, world::Domain domain) {
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    if (data.split_of_scene(i) != world::Split::kTrain) continue;
    if (data.scenes[i].domain != domain) {
      throw DataError("domain leakage: training scene " + data.scenes[i].scene_id + " is from domain " +
                      world::to_string(data.scenes[i].domain) + ", expected " + world::to_string(domain));
    }
  }
}

GeneralizationReport generalization_eval(const model::PolicyModel& m, model::ActorTag actor,
                                         const world::Dataset& train_data, world::Domain train_domain,
                                         const world::Dataset& test_in, const world::Dataset& test_out) {
  check_domain_purity(train_data, train_domain);
  GeneralizationReport g;
  const auto in_records = test_in.record_indices(world::Split::kTest);
  const auto out_records = test_out.record_indices(world::Split::kTest);
  g.in_domain = evaluate(m, actor, test_in, in_records);
  g.in_domain.tag = "in_domain:" + test_in.domain_mix.str();
  g.out_domain = evaluate(m, actor, test_out, out_records);
  g.out_domain.tag = "out_domain:" + test_out.domain_mix.str();
  g.l2_gap = g.out_domain.l2_avg - g.in_domain.l2_avg;
  g.collision_gap = g.out_domain.collision_avg - g.in_domain.collision_avg;
  return g;
}

}  // namespace coirl::eval
