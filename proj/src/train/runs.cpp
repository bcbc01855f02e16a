#include "coirl/train/runs.hpp"

#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coirl/util/files.hpp"
#include "coirl/util/text.hpp"

namespace coirl::train {

model::PolicyModel model_from_checkpoint(const ad::Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("model")) throw DataError("checkpoint carries no model description");
  const auto cfg = model::ModelConfig::from_json(ckpt.metadata.at("model"));
  const double ema = ckpt.metadata.value("critic_ema_decay", 0.99);
  auto m = model::make_model(cfg, 0, ema);
  model::load_model(ckpt, m);
  return m;
}

model::ActorTag inference_actor_of(const ad::Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (!meta.contains("train") || !meta.at("train").contains("inference_actor")) return model::ActorTag::kIL;
  return meta.at("train").at("inference_actor").get<std::string>() == model::to_string(model::ActorTag::kRL)
             ? model::ActorTag::kRL
             : model::ActorTag::kIL;
}

void check_dataset_compat(const ad::Checkpoint& ckpt, const world::Dataset& data) {
  const auto& meta = ckpt.metadata;
  if (!meta.contains("train")) return;
  const auto trained = meta.at("train").at("dataset_config_hash").get<std::string>();
  if (trained != data.world.hash()) {
    throw DataError("config hash mismatch: the checkpoint was trained on world config " + trained.substr(0, 12) +
                    "... but the evaluation set uses " + data.world.hash().substr(0, 12) +
                    "...; observations and horizons would not line up");
  }
  const auto width = meta.at("model").at("obs_width").get<std::size_t>();
  if (!data.records.empty() && data.records.front().obs.size() != width) {
    throw DataError("observation width of the evaluation set does not match the checkpoint");
  }
}

void write_eval(const std::filesystem::path& dir, const eval::EvalResult& r, const std::string& prefix) {
  util::write_file_atomic(dir / (prefix + "_summary.json"), eval::summary_json(r));
  util::write_file_atomic(dir / (prefix + "_per_record.csv"), eval::dump_csv(r));
}

eval::EvalResult read_eval_summary(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed evaluation summary " + path.string() + ": " + e.what());
  }
  eval::EvalResult r;
  try {
    r.tag = j.at("tag").get<std::string>();
    r.l2 = {j.at("l2_1s").get<double>(), j.at("l2_2s").get<double>(), j.at("l2_3s").get<double>()};
    r.collision_rate = {j.at("col_1s").get<double>(), j.at("col_2s").get<double>(), j.at("col_3s").get<double>()};
    r.l2_avg = j.at("l2_avg").get<double>();
    r.collision_avg = j.at("col_avg").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("incomplete evaluation summary " + path.string() + ": " + e.what());
  }
  return r;
}

eval::EvalResult train_and_evaluate(const TrainConfig& cfg, const world::Dataset& data, const std::string& dataset_ref,
                                    const std::filesystem::path& out_dir, const RunOptions& opts) {
  train_run(cfg, data, dataset_ref, out_dir, opts);
  const auto ckpt = ad::Checkpoint::load(out_dir / kCheckpointFile);
  const auto m = model_from_checkpoint(ckpt);
  const auto actor = inference_actor_of(ckpt);
  auto r = eval::evaluate(m, actor, data, data.record_indices(world::Split::kTest));
  r.tag = "test:" + model::to_string(actor);
  write_eval(out_dir, r);
  return r;
}

std::optional<RunSummary> load_run(const std::filesystem::path& dir, std::ostream& warn) {
  namespace fs = std::filesystem;
  for (const char* f : {kRunManifestFile, kMetricsFile, kEvalSummaryFile}) {
    if (!fs::exists(dir / f)) {
      warn << "warning: skipping " << dir.string() << ": missing " << f << '\n';
      return std::nullopt;
    }
  }
  try {
    RunSummary s;
    s.dir = dir;
    const auto manifest = nlohmann::json::parse(util::read_file(dir / kRunManifestFile));
    s.strategy = manifest.at("strategy").get<std::string>();
    s.rl_method = manifest.at("rl_method").get<std::string>();
    s.seed = manifest.at("seed").get<std::uint64_t>();
    s.eval = read_eval_summary(dir / kEvalSummaryFile);
    if (fs::exists(dir / kContestsFile)) s.ledger = ContestLedger::from_csv(util::read_file(dir / kContestsFile));
    return s;
  } catch (const std::exception& e) {
    warn << "warning: skipping " << dir.string() << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

namespace {

constexpr const char* kTableColumns = "l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg";

std::string metric_cells(const eval::EvalResult& r) {
  std::string out;
  for (double v : {r.l2[0], r.l2[1], r.l2[2], r.l2_avg, r.collision_rate[0], r.collision_rate[1], r.collision_rate[2],
                   r.collision_avg}) {
    out += ',' + util::format_double(v);
  }
  return out;
}

struct Mean {
  std::size_t count = 0;
  eval::EvalResult sum;
};

std::map<std::pair<std::string, std::string>, Mean> group_means(const std::vector<RunSummary>& runs) {
  std::map<std::pair<std::string, std::string>, Mean> groups;
  for (const auto& r : runs) {
    auto& g = groups[{r.strategy, r.rl_method}];
    ++g.count;
    for (std::size_t h = 0; h < eval::kHorizons; ++h) {
      g.sum.l2[h] += r.eval.l2[h];
      g.sum.collision_rate[h] += r.eval.collision_rate[h];
    }
    g.sum.l2_avg += r.eval.l2_avg;
    g.sum.collision_avg += r.eval.collision_avg;
  }
  for (auto& [key, g] : groups) {
    const auto n = static_cast<double>(g.count);
    for (std::size_t h = 0; h < eval::kHorizons; ++h) {
      g.sum.l2[h] /= n;
      g.sum.collision_rate[h] /= n;
    }
    g.sum.l2_avg /= n;
    g.sum.collision_avg /= n;
  }
  return groups;
}

}  // namespace

std::string comparison_table_csv(const std::vector<RunSummary>& runs) {
  std::string out = std::string("strategy,rl_method,seed,") + kTableColumns + '\n';
  for (const auto& r : runs) {
    out += r.strategy + ',' + r.rl_method + ',' + std::to_string(r.seed) + metric_cells(r.eval) + '\n';
  }
  return out;
}

std::string strategy_means_csv(const std::vector<RunSummary>& runs) {
  std::string out = std::string("strategy,rl_method,runs,") + kTableColumns + '\n';
  for (const auto& [key, g] : group_means(runs)) {
    out += key.first + ',' + key.second + ',' + std::to_string(g.count) + metric_cells(g.sum) + '\n';
  }
  return out;
}

std::string comparison_table_text(const std::vector<RunSummary>& runs) {
  std::ostringstream os;
  os << "| strategy | rl_method | runs | L2 1s | L2 2s | L2 3s | L2 avg | Col 1s | Col 2s | Col 3s | Col avg |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& [key, g] : group_means(runs)) {
    os << "| " << key.first << " | " << key.second << " | " << g.count;
    for (double v : {g.sum.l2[0], g.sum.l2[1], g.sum.l2[2], g.sum.l2_avg, g.sum.collision_rate[0],
                     g.sum.collision_rate[1], g.sum.collision_rate[2], g.sum.collision_avg}) {
      os << " | " << v;
    }
    os << " |\n";
  }
  return os.str();
}

std::string wins_series_csv(const ContestLedger& ledger) {
  std::string out = "iteration,wins_il,wins_rl,score_diff\n";
  ContestLedger running;
  for (const auto& c : ledger.contests) {
    running.record(c);
    out += std::to_string(c.iteration) + ',' + std::to_string(running.wins_il) + ',' + std::to_string(running.wins_rl) +
           ',' + util::format_double(c.score_il - c.score_rl) + '\n';
  }
  return out;
}

}  // namespace coirl::train
