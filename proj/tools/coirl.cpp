#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "coirl/errors.hpp"
#include "coirl/train/runs.hpp"
#include "coirl/util/files.hpp"
#include "coirl/util/text.hpp"

namespace fs = std::filesystem;
using namespace coirl;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

// Relative output paths land under COIRL_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* root = std::getenv("COIRL_OUTPUT_ROOT"); root != nullptr && *root != '\0') return fs::path(root) / path;
  }
  return path;
}

int parallelism() {
  if (const char* v = std::getenv("COIRL_PARALLELISM"); v != nullptr && *v != '\0') {
    try {
      const auto n = util::parse_int(v);
      if (n >= 1) return static_cast<int>(n);
    } catch (const DataError&) {
    }
    throw UsageError(std::string("COIRL_PARALLELISM must be a positive integer, got '") + v + "'");
  }
  return 1;
}

void require_fresh_dir(const fs::path& dir, const std::vector<const char*>& files, bool force) {
  for (const char* f : files) {
    if (fs::exists(dir / f) && !force) {
      throw UsageError(dir.string() + " already holds " + f + "; pass --force to overwrite");
    }
  }
}

world::Dataset load_data(const std::string& path) {
  if (!fs::exists(fs::path(path) / world::kManifestFile)) throw UsageError("no dataset manifest in " + path);
  return world::load_dataset(path);
}

// ---- gen-data ----
struct GenData {
  std::size_t scenes = 500;
  std::uint64_t seed = 0;
  std::string mix = "1:0";
  std::string out;
  bool force = false;
};

int run_gen_data(const GenData& a) {
  world::DatasetSpec spec;
  spec.num_scenes = a.scenes;
  spec.seed = a.seed;
  spec.domain_mix = world::DomainMix::parse(a.mix);
  if (spec.num_scenes == 0) throw UsageError("--scenes must be positive");
  const auto dir = output_path(a.out);
  require_fresh_dir(dir, {world::kManifestFile, world::kDatasetFile}, a.force);
  world::build_dataset(spec, dir);
  std::cout << "wrote " << a.scenes << " scenes to " << dir.string() << " (config " << spec.world.hash().substr(0, 12)
            << ")\n";
  return kOk;
}

// ---- train ----
struct TrainArgs {
  std::string config;
  std::string strategy;
  std::string rl_method;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  bool resume = false;
  bool force = false;
  std::optional<std::int64_t> stop_after;
};

train::TrainConfig build_config(const TrainArgs& a) {
  train::TrainConfig cfg = a.config.empty() ? train::TrainConfig{} : train::TrainConfig::load(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(util::trim(kv.substr(0, eq)), util::trim(kv.substr(eq + 1)));
  }
  if (!a.strategy.empty()) cfg.strategy = train::strategy_from_string(a.strategy);
  if (!a.rl_method.empty()) cfg.rl_method = train::rl_method_from_string(a.rl_method);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const auto cfg = build_config(a);
  const auto data = load_data(a.data);
  const auto dir = output_path(a.out);
  train::RunOptions opts;
  opts.resume = a.resume;
  opts.force = a.force;
  opts.stop_after = a.stop_after;
  const auto total = cfg.total_iters;
  opts.on_iteration = [total](const train::IterationTrace& t) {
    if ((t.iteration + 1) % 1000 == 0 || t.iteration + 1 == total) {
      std::cerr << "iteration " << t.iteration + 1 << "/" << total;
      if (t.il) std::cerr << " l_imi " << t.il->l_imi;
      if (t.rl) std::cerr << " reward " << t.rl->mean_reward;
      if (t.contest) std::cerr << " contest " << train::to_string(t.contest->outcome);
      std::cerr << '\n';
    }
  };
  if (a.stop_after) {
    train::train_run(cfg, data, a.data, dir, opts);
    std::cout << "stopped after iteration " << *a.stop_after << "; resume with --resume\n";
    return kOk;
  }
  const auto r = train::train_and_evaluate(cfg, data, a.data, dir, opts);
  std::cout << "run " << dir.string() << ": " << r.tag << " L2 avg " << r.l2_avg << " m, collision avg "
            << r.collision_avg << " %\n";
  return kOk;
}

// ---- eval ----
struct EvalArgs {
  std::string checkpoint;
  std::string set;
  std::string split = "test";
  std::string actor = "inference";
  std::string longtail;
  std::string baseline;
  std::string out;
  bool force = false;
};

std::vector<std::size_t> split_records(const world::Dataset& data, const std::string& split) {
  if (split == "train") return data.record_indices(world::Split::kTrain);
  if (split == "contest") return data.record_indices(world::Split::kContest);
  if (split == "test") return data.record_indices(world::Split::kTest);
  if (split == "all") {
    std::vector<std::size_t> all(data.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw UsageError("unknown split '" + split + "'; valid: train, contest, test, all");
}

fs::path checkpoint_file(const std::string& p) {
  fs::path path(p);
  if (fs::is_directory(path)) path /= train::kCheckpointFile;
  if (!fs::exists(path)) throw UsageError("no checkpoint at " + path.string());
  return path;
}

fs::path dump_file(const std::string& p) {
  fs::path path(p);
  if (fs::is_directory(path)) path /= train::kEvalDumpFile;
  if (!fs::exists(path)) throw UsageError("no baseline dump at " + path.string());
  return path;
}

int run_eval(const EvalArgs& a) {
  const auto data = load_data(a.set);
  const auto records = split_records(data, a.split);
  const auto dir = output_path(a.out);
  require_fresh_dir(dir, {"eval_summary.json", "longtail_summary.json"}, a.force);
  if (!a.longtail.empty() && a.baseline.empty()) throw UsageError("--longtail needs --baseline");

  eval::ActionSource source;
  std::optional<model::PolicyModel> m;
  std::string label = a.actor;
  if (a.actor == "expert") {
    source = eval::expert_actions();
  } else {
    if (a.checkpoint.empty()) throw UsageError("--checkpoint is required unless --actor expert");
    const auto ckpt = ad::Checkpoint::load(checkpoint_file(a.checkpoint));
    train::check_dataset_compat(ckpt, data);
    m = train::model_from_checkpoint(ckpt);
    model::ActorTag tag;
    if (a.actor == "inference") tag = train::inference_actor_of(ckpt);
    else if (a.actor == "il") tag = model::ActorTag::kIL;
    else if (a.actor == "rl") tag = model::ActorTag::kRL;
    else throw UsageError("unknown actor '" + a.actor + "'; valid: inference, il, rl, expert");
    label = model::to_string(tag);
    source = eval::policy_actions(*m, tag);
  }

  fs::create_directories(dir);
  auto r = eval::evaluate_parallel(source, data, records);
  r.tag = a.split + ":" + label;
  train::write_eval(dir, r);
  std::cout << r.tag << " records " << r.records.size() << " L2 " << r.l2[0] << "/" << r.l2[1] << "/" << r.l2[2]
            << " avg " << r.l2_avg << " | col% " << r.collision_rate[0] << "/" << r.collision_rate[1] << "/"
            << r.collision_rate[2] << " avg " << r.collision_avg << '\n';

  if (!a.longtail.empty()) {
    eval::LongTailSpec spec;
    spec.mode = eval::longtail_mode_from_string(a.longtail);
    auto base = eval::aggregate(eval::parse_dump(util::read_file(dump_file(a.baseline))), "baseline");
    const auto keys = eval::build_longtail(base, spec);
    std::string list;
    for (const auto& k : keys) list += k + '\n';
    util::write_file_atomic(dir / "longtail_keys.txt", list);
    const auto subset = eval::select_records(data, records, keys);
    if (subset.empty()) {
      std::cerr << "warning: the " << a.longtail << " long-tail subset is empty\n";
      return kOk;
    }
    auto lt = eval::evaluate_parallel(source, data, subset);
    lt.tag = "longtail_" + a.longtail + ":" + label;
    train::write_eval(dir, lt, "longtail");
    std::cout << lt.tag << " records " << lt.records.size() << " L2 avg " << lt.l2_avg << " | col% avg "
              << lt.collision_avg << '\n';
  }
  return kOk;
}

// ---- report ----
struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

std::vector<fs::path> expand_runs(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::exists(p / train::kRunManifestFile)) {
      out.push_back(p);
      continue;
    }
    // a directory of runs (as written by ablate)
    std::vector<fs::path> children;
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_directory()) children.push_back(e.path());
      }
    }
    std::sort(children.begin(), children.end());
    if (children.empty()) children.push_back(p);
    out.insert(out.end(), children.begin(), children.end());
  }
  return out;
}

int run_report(const ReportArgs& a) {
  std::vector<train::RunSummary> runs;
  for (const auto& dir : expand_runs(a.runs)) {
    if (auto s = train::load_run(dir, std::cerr)) runs.push_back(std::move(*s));
  }
  if (runs.empty()) throw UsageError("no completed runs found");
  const auto out = output_path(a.out);
  fs::create_directories(out);
  util::write_file_atomic(out / "table.csv", train::comparison_table_csv(runs));
  util::write_file_atomic(out / "strategy_means.csv", train::strategy_means_csv(runs));
  const auto text = train::comparison_table_text(runs);
  util::write_file_atomic(out / "table.md", text);
  for (const auto& r : runs) {
    if (r.ledger.contests.empty()) continue;
    const auto name = r.dir.filename().string();
    util::write_file_atomic(out / ("wins_" + name + ".csv"), train::wins_series_csv(r.ledger));
  }
  std::cout << text;
  return kOk;
}

// ---- ablate ----
struct AblateArgs {
  std::string config;
  std::string data;
  std::string out;
  std::vector<std::string> strategies;
  std::vector<std::string> rl_methods;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
  int jobs = 0;
  bool force = false;
};

int run_ablate(const AblateArgs& a) {
  const auto data = load_data(a.data);
  const auto root = output_path(a.out);
  struct Job {
    train::TrainConfig cfg;
    fs::path dir;
  };
  std::vector<Job> jobs;
  const auto methods = a.rl_methods.empty() ? std::vector<std::string>{""} : a.rl_methods;
  for (const auto& s : a.strategies) {
    for (const auto& m : methods) {
      for (auto seed : a.seeds) {
        TrainArgs t;
        t.config = a.config;
        t.strategy = s;
        t.rl_method = m;
        t.seed = seed;
        t.overrides = a.overrides;
        auto cfg = build_config(t);
        const auto name = s + "-" + train::to_string(cfg.rl_method) + "-s" + std::to_string(seed);
        jobs.push_back({cfg, root / name});
      }
    }
  }
  if (jobs.empty()) throw UsageError("empty ablation grid");
  const int workers = std::max(1, std::min<int>(a.jobs > 0 ? a.jobs : parallelism(), static_cast<int>(jobs.size())));
  // Runs own disjoint state; the evaluation kernels stay serial per run.
  omp_set_num_threads(workers > 1 ? 1 : omp_get_max_threads());
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= jobs.size() || error) return;
        i = next++;
      }
      try {
        train::RunOptions opts;
        opts.force = a.force;
        const auto r = train::train_and_evaluate(jobs[i].cfg, data, a.data, jobs[i].dir, opts);
        std::lock_guard lock(mu);
        std::cout << jobs[i].dir.filename().string() << ": L2 avg " << r.l2_avg << " col avg " << r.collision_avg
                  << '\n';
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-policy imitation/reinforcement planner on a synthetic driving world"};
  app.require_subcommand(1);

  GenData gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--scenes", gd.scenes, "Number of scenes")->capture_default_str();
  gen->add_option("--seed", gd.seed, "Base seed")->capture_default_str();
  gen->add_option("--domain-mix", gd.mix, "Scene weights for domains A:B")->capture_default_str();
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_flag("--force", gd.force, "Overwrite an existing dataset");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train one strategy");
  tr->add_option("--config", ta.config, "Flat key = value config file");
  tr->add_option("--strategy", ta.strategy, "Integration strategy");
  tr->add_option("--rl-method", ta.rl_method, "naive_pggs or adcgs_step_aware");
  tr->add_option("--seed", ta.seed, "Run seed");
  tr->add_option("--set", ta.overrides, "Config override key=value (repeatable)");
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--out", ta.out, "Run directory")->required();
  tr->add_flag("--resume", ta.resume, "Continue from the run directory's checkpoint");
  tr->add_flag("--force", ta.force, "Overwrite an existing run");
  tr->add_option("--stop-after", ta.stop_after, "Checkpoint and stop after this many iterations");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint file or run directory");
  ev->add_option("--set", ea.set, "Dataset directory")->required();
  ev->add_option("--split", ea.split, "train, contest, test or all")->capture_default_str();
  ev->add_option("--actor", ea.actor, "inference, il, rl or expert")->capture_default_str();
  ev->add_option("--longtail", ea.longtail, "Long-tail mode: l2 or collision");
  ev->add_option("--baseline", ea.baseline, "Baseline per-record dump (file or eval directory)");
  ev->add_option("--out", ea.out, "Output directory")->required();
  ev->add_flag("--force", ea.force, "Overwrite existing reports");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Comparison tables and contest series");
  rep->add_option("--runs", ra.runs, "Run directories, or directories of runs")->required();
  rep->add_option("--out", ra.out, "Output directory")->required();

  AblateArgs aa;
  auto* abl = app.add_subcommand("ablate", "Train and evaluate a strategy x seed grid");
  abl->add_option("--config", aa.config, "Base config file");
  abl->add_option("--data", aa.data, "Dataset directory")->required();
  abl->add_option("--out", aa.out, "Root directory for the runs")->required();
  abl->add_option("--strategies", aa.strategies, "Strategies")->required()->delimiter(',');
  abl->add_option("--rl-methods", aa.rl_methods, "RL methods")->delimiter(',');
  abl->add_option("--seeds", aa.seeds, "Seeds")->required()->delimiter(',');
  abl->add_option("--set", aa.overrides, "Config override key=value (repeatable)");
  abl->add_option("--jobs", aa.jobs, "Concurrent runs (default COIRL_PARALLELISM or 1)");
  abl->add_flag("--force", aa.force, "Overwrite existing runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (const char* v = std::getenv("COIRL_PARALLELISM"); v != nullptr && *v != '\0') omp_set_num_threads(parallelism());
    if (gen->parsed()) return run_gen_data(gd);
    if (tr->parsed()) return run_train(ta);
    if (ev->parsed()) return run_eval(ea);
    if (rep->parsed()) return run_report(ra);
    if (abl->parsed()) return run_ablate(aa);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const StructuralError& e) {
    std::cerr << "checkpoint mismatch: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
