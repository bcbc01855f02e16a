#include "coirl/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coirl/autodiff/ops.hpp"
#include "coirl/train/records.hpp"
#include "coirl/util/files.hpp"
#include "coirl/util/text.hpp"
#include "coirl/world/observe.hpp"

#ifndef COIRL_BUILD_ID
#define COIRL_BUILD_ID "unknown"
#endif

namespace coirl::train {

using model::ActorTag;
using objectives::ILLossReport;
using objectives::RLLossReport;

namespace {

constexpr std::uint64_t kModelSeedSalt = 1;
constexpr std::uint64_t kSampleSeedSalt = 0x5a4d;
constexpr std::uint64_t kShuffleSeedSalt = 0x5348;

void require_finite(const ad::Tensor& loss, const char* what) {
  if (!std::isfinite(loss.item())) throw NumericalError(std::string("non-finite ") + what + " loss");
}

std::string opt_num(bool present, double v) { return present ? util::format_double(v) : std::string(); }

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kIL: return "il";
    case Phase::kRL: return "rl";
    case Phase::kMerged: return "merged";
  }
  return "?";
}

std::string metrics_header() {
  return "iteration,epoch,record,lr,phases,l_imi,l_wm,l_il,l_act,l_cri,l_bc,l_rl,mean_reward,advantage_spread,"
         "contest_outcome,score_il,score_rl";
}

std::string metrics_row(const IterationTrace& t) {
  std::ostringstream os;
  std::string phases;
  for (auto p : t.phases) phases += (phases.empty() ? "" : "+") + to_string(p);
  const bool il = t.il.has_value();
  const bool rl = t.rl.has_value();
  const bool c = t.contest.has_value();
  os << t.iteration << ',' << t.epoch << ',' << t.record << ',' << util::format_double(t.lr) << ',' << phases << ','
     << opt_num(il, il ? t.il->l_imi : 0) << ',' << opt_num(il, il ? t.il->l_wm : 0) << ','
     << opt_num(il, il ? t.il->l_il : 0) << ',' << opt_num(rl, rl ? t.rl->l_act : 0) << ','
     << opt_num(rl, rl ? t.rl->l_cri : 0) << ',' << opt_num(rl, rl ? t.rl->l_bc : 0) << ','
     << opt_num(rl, rl ? t.rl->l_rl : 0) << ',' << opt_num(rl, rl ? t.rl->mean_reward : 0) << ','
     << opt_num(rl, rl ? t.rl->advantage_spread : 0) << ',' << (c ? to_string(t.contest->outcome) : "") << ','
     << opt_num(c, c ? t.contest->score_il : 0) << ',' << opt_num(c, c ? t.contest->score_rl : 0);
  return os.str();
}

ActorTag single_actor_slot(Strategy s) { return s == Strategy::kPureRL ? ActorTag::kRL : ActorTag::kIL; }

ActorTag select_inference_actor(Strategy s, const std::optional<FinalScores>& scores) {
  if (!is_decoupled(s)) return single_actor_slot(s);
  if (!scores) throw UsageError("decoupled strategies need final scores to select an actor");
  return scores->score_rl > scores->score_il ? ActorTag::kRL : ActorTag::kIL;
}

Trainer::Trainer(TrainConfig cfg, const world::Dataset& data) : cfg_(std::move(cfg)), data_(&data) {
  cfg_.model.n = data.world.plan_steps;
  cfg_.model.obs_width = world::observation_width(data.world);
  cfg_.validate();
  model_ = model::make_model(cfg_.model, world::mix_seed(cfg_.seed, kModelSeedSalt), cfg_.ema_decay);
  const ad::AdamWConfig oc{0.9, 0.999, 1e-8, cfg_.weight_decay};
  opt_encoder_ = ad::AdamW(model_.encoder, oc);
  opt_wm_ = ad::AdamW(model_.world_model, oc);
  opt_il_ = ad::AdamW(model_.il.params, oc);
  opt_rl_ = ad::AdamW(model_.rl.params, oc);
  opt_critic_ = ad::AdamW(model_.critic.learning, oc);
  train_records_ = data.record_indices(world::Split::kTrain);
  if (train_records_.empty()) throw UsageError("dataset has no training records");
  if (is_decoupled(cfg_.strategy)) contest_set_ = make_contest_set(data, cfg_.competition.eval_batch, cfg_.seed);
}

void Trainer::zero_all_grads() {
  model_.encoder.zero_grad();
  model_.world_model.zero_grad();
  model_.il.params.zero_grad();
  model_.rl.params.zero_grad();
  model_.critic.learning.zero_grad();
  model_.critic.reference.zero_grad();
}

std::vector<Phase> Trainer::phases_at(std::int64_t it) const {
  switch (cfg_.strategy) {
    case Strategy::kPureIL: return {Phase::kIL};
    case Strategy::kPureRL: return {Phase::kRL};
    case Strategy::kLossMerging: return {Phase::kMerged};
    case Strategy::kILRLInterval: return {(it / cfg_.interval_period) % 2 == 0 ? Phase::kIL : Phase::kRL};
    case Strategy::kTwoStage: {
      const auto split = static_cast<std::int64_t>(std::llround(cfg_.stage_split * static_cast<double>(cfg_.total_iters)));
      return {it < split ? Phase::kIL : Phase::kRL};
    }
    case Strategy::kDecoupledNoComp:
    case Strategy::kDecoupledComp: return {Phase::kIL, Phase::kRL};
  }
  return {};
}

std::size_t Trainer::record_at(std::int64_t it) {
  const auto n = static_cast<std::int64_t>(train_records_.size());
  const std::int64_t epoch = it / n;
  if (epoch != order_epoch_) {
    order_ = train_records_;
    std::mt19937_64 rng(world::mix_seed(cfg_.seed ^ kShuffleSeedSalt, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order_.begin(), order_.end(), rng);
    order_epoch_ = epoch;
  }
  return order_[static_cast<std::size_t>(it % n)];
}

ILLossReport Trainer::il_phase(ActorTag actor, std::size_t record, double lr) {
  zero_all_grads();
  const auto& rec = data_->records.at(record);
  auto& bundle = model_.actor(actor);
  const auto step = objectives::il_objective(model_, bundle, obs_tensor(rec.obs), obs_tensor(rec.next_obs),
                                             actions_tensor(rec.expert), cfg_.alpha);
  require_finite(step.loss, "imitation");
  ad::backward(step.loss);
  opt_encoder_.step(model_.encoder, lr);
  opt_wm_.step(model_.world_model, lr);
  (actor == ActorTag::kIL ? opt_il_ : opt_rl_).step(bundle.params, lr);
  return step.report;
}

RLLossReport Trainer::rl_phase(ActorTag actor, std::size_t record, double lr, bool train_encoder, std::mt19937_64& rng) {
  zero_all_grads();
  const auto& rec = data_->records.at(record);
  auto& bundle = model_.actor(actor);
  ad::Tensor s;
  if (train_encoder) {
    s = model::encode(model_.encoder, obs_tensor(rec.obs));
  } else {
    ad::NoGradGuard frozen;
    s = model::encode(model_.encoder, obs_tensor(rec.obs));
  }
  const auto policy = model::act(bundle, s, model_.cfg, true);
  objectives::RLContext ctx{&model_, &data_->scene_of(rec), rec.t, &data_->world, rec.expert, cfg_.group_size,
                            cfg_.gamma};
  const bool adcgs = cfg_.rl_method == RLMethod::kADCGSStepAware;
  const auto res = adcgs ? objectives::step_aware_group_sample(policy, s, ctx, rng)
                         : objectives::naive_group_sample(policy, ctx, rng);
  const auto expert = actions_tensor(rec.expert);
  const auto l_bc = objectives::bc_loss(policy.mu, policy.sigma, expert);
  const auto total = objectives::rl_total(res.l_actor, res.l_critic, l_bc, cfg_.beta);
  require_finite(total, "reinforcement");
  ad::backward(total);

  // A single RL actor would otherwise leave the world model untrained.
  const bool train_wm = cfg_.strategy == Strategy::kPureRL && cfg_.pure_rl_train_world_model;
  if (train_wm) {
    const auto l_wm = objectives::world_model_objective(model_, s.detach(), policy.mu.detach(), obs_tensor(rec.next_obs));
    require_finite(l_wm, "world model");
    ad::backward(l_wm);
    opt_wm_.step(model_.world_model, lr);
  }
  (actor == ActorTag::kIL ? opt_il_ : opt_rl_).step(bundle.params, lr);
  if (adcgs) {
    opt_critic_.step(model_.critic.learning, lr);
    model_.critic.ema_update();
  }
  if (train_encoder) opt_encoder_.step(model_.encoder, lr);

  RLLossReport r;
  r.l_act = res.l_actor.item();
  r.l_cri = res.l_critic.item();
  r.l_bc = l_bc.item();
  r.l_rl = total.item();
  r.beta = cfg_.beta;
  r.mean_reward = res.mean_reward;
  r.advantage_spread = res.advantage_spread;
  return r;
}

std::pair<ILLossReport, RLLossReport> Trainer::merged_phase(std::size_t record, double lr, std::mt19937_64& rng) {
  zero_all_grads();
  const auto& rec = data_->records.at(record);
  auto& bundle = model_.il;
  const auto s = model::encode(model_.encoder, obs_tensor(rec.obs));
  const auto policy = model::act(bundle, s, model_.cfg, true);
  const auto expert = actions_tensor(rec.expert);
  const auto l_imi = objectives::imitation_loss(policy.mu, expert);
  const auto l_wm = objectives::world_model_objective(model_, s, policy.mu, obs_tensor(rec.next_obs));
  const auto l_il = objectives::il_total(l_imi, l_wm, cfg_.alpha);

  objectives::RLContext ctx{&model_, &data_->scene_of(rec), rec.t, &data_->world, rec.expert, cfg_.group_size,
                            cfg_.gamma};
  const bool adcgs = cfg_.rl_method == RLMethod::kADCGSStepAware;
  const auto res = adcgs ? objectives::step_aware_group_sample(policy, s, ctx, rng)
                         : objectives::naive_group_sample(policy, ctx, rng);
  const auto l_bc = objectives::bc_loss(policy.mu, policy.sigma, expert);
  const auto l_rl = objectives::rl_total(res.l_actor, res.l_critic, l_bc, cfg_.beta);
  const auto total = ad::add(l_il, l_rl);
  require_finite(total, "merged");
  ad::backward(total);
  opt_encoder_.step(model_.encoder, lr);
  opt_wm_.step(model_.world_model, lr);
  opt_il_.step(bundle.params, lr);
  if (adcgs) {
    opt_critic_.step(model_.critic.learning, lr);
    model_.critic.ema_update();
  }

  ILLossReport il{l_imi.item(), l_wm.item(), l_il.item(), cfg_.alpha};
  RLLossReport r;
  r.l_act = res.l_actor.item();
  r.l_cri = res.l_critic.item();
  r.l_bc = l_bc.item();
  r.l_rl = l_rl.item();
  r.beta = cfg_.beta;
  r.mean_reward = res.mean_reward;
  r.advantage_spread = res.advantage_spread;
  return {il, r};
}

IterationTrace Trainer::step() {
  if (finished()) throw UsageError("training already finished");
  const auto start = std::chrono::steady_clock::now();
  IterationTrace t;
  t.iteration = iteration_;
  t.epoch = iteration_ / static_cast<std::int64_t>(train_records_.size());
  t.record = record_at(iteration_);
  t.lr = cfg_.schedule().at(iteration_);
  t.phases = phases_at(iteration_);
  std::mt19937_64 rng(world::mix_seed(cfg_.seed ^ kSampleSeedSalt, static_cast<std::uint64_t>(iteration_)));
  const bool decoupled = is_decoupled(cfg_.strategy);
  const ActorTag slot = single_actor_slot(cfg_.strategy);
  for (auto phase : t.phases) {
    switch (phase) {
      case Phase::kIL: t.il = il_phase(decoupled ? ActorTag::kIL : slot, t.record, t.lr); break;
      case Phase::kRL:
        t.rl = rl_phase(decoupled ? ActorTag::kRL : slot, t.record, t.lr * cfg_.rl_lr_scale, !decoupled, rng);
        break;
      case Phase::kMerged: {
        auto [il, rl] = merged_phase(t.record, t.lr, rng);
        t.il = il;
        t.rl = rl;
        break;
      }
    }
  }
  zero_all_grads();
  ++iteration_;
  if (cfg_.strategy == Strategy::kDecoupledComp && iteration_ % cfg_.competition.k == 0) {
    t.contest = run_contest(iteration_, model_, contest_set_, cfg_.competition, opt_il_, opt_rl_);
    ledger_.record(*t.contest);
  }
  t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

FinalScores Trainer::final_scores() const {
  if (contest_set_.records.empty()) throw UsageError("final scores need a contest set (decoupled strategies only)");
  return {score_actor(model_.il, model_, contest_set_), score_actor(model_.rl, model_, contest_set_)};
}

ActorTag Trainer::inference_actor() const {
  if (!is_decoupled(cfg_.strategy)) return select_inference_actor(cfg_.strategy, std::nullopt);
  return select_inference_actor(cfg_.strategy, final_scores());
}

ad::Checkpoint Trainer::checkpoint() const {
  ad::Checkpoint ck;
  model::save_model(ck, model_);
  ck.put_optimizer("opt.encoder.", opt_encoder_, model_.encoder);
  ck.put_optimizer("opt.world_model.", opt_wm_, model_.world_model);
  ck.put_optimizer("opt.actor_il.", opt_il_, model_.il.params);
  ck.put_optimizer("opt.actor_rl.", opt_rl_, model_.rl.params);
  ck.put_optimizer("opt.critic.", opt_critic_, model_.critic.learning);
  auto& train = ck.metadata["train"];
  train["iteration"] = iteration_;
  train["config"] = cfg_.canonical_text();
  train["config_hash"] = cfg_.hash();
  train["strategy"] = to_string(cfg_.strategy);
  train["rl_method"] = to_string(cfg_.rl_method);
  train["dataset_config_hash"] = data_->world.hash();
  train["dataset_seed"] = data_->seed;
  train["ledger"] = ledger_.to_csv();
  train["finished"] = finished();
  if (finished()) {
    if (is_decoupled(cfg_.strategy)) {
      const auto scores = final_scores();
      train["final_score_il"] = scores.score_il;
      train["final_score_rl"] = scores.score_rl;
      train["inference_actor"] = model::to_string(select_inference_actor(cfg_.strategy, scores));
    } else {
      train["inference_actor"] = model::to_string(select_inference_actor(cfg_.strategy, std::nullopt));
    }
  }
  return ck;
}

void Trainer::restore(const ad::Checkpoint& ck) {
  const auto& train = ck.metadata.at("train");
  if (train.at("config_hash").get<std::string>() != cfg_.hash()) {
    throw DataError("checkpoint was written with a different training config");
  }
  if (train.at("dataset_config_hash").get<std::string>() != data_->world.hash()) {
    throw DataError("checkpoint was trained on a dataset with a different world config");
  }
  model::load_model(ck, model_);
  ck.restore_optimizer("opt.encoder.", opt_encoder_, model_.encoder);
  ck.restore_optimizer("opt.world_model.", opt_wm_, model_.world_model);
  ck.restore_optimizer("opt.actor_il.", opt_il_, model_.il.params);
  ck.restore_optimizer("opt.actor_rl.", opt_rl_, model_.rl.params);
  ck.restore_optimizer("opt.critic.", opt_critic_, model_.critic.learning);
  iteration_ = train.at("iteration").get<std::int64_t>();
  ledger_ = ContestLedger::from_csv(train.at("ledger").get<std::string>());
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::istringstream is(util::read_file(path));
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::string join_lines(const std::string& header, const std::vector<std::string>& rows) {
  std::string out = header + '\n';
  for (const auto& r : rows) out += r + '\n';
  return out;
}

struct RunFiles {
  std::filesystem::path dir;
  std::vector<std::string> metrics;
  std::vector<std::string> timing;

  void flush(const Trainer& tr) const {
    // metrics first: a checkpoint on disk never runs ahead of its metrics
    util::write_file_atomic(dir / kMetricsFile, join_lines(metrics_header(), metrics));
    util::write_file_atomic(dir / kTimingFile, join_lines("iteration,wall_seconds", timing));
    util::write_file_atomic(dir / kContestsFile, tr.ledger().to_csv());
    tr.checkpoint().save(dir / kCheckpointFile);
  }
};

// Keeps the first `count` data rows of a resumed CSV.
std::vector<std::string> resume_rows(const std::filesystem::path& path, const std::string& header, std::int64_t count) {
  if (!std::filesystem::exists(path)) throw DataError("cannot resume: missing " + path.string());
  auto lines = read_lines(path);
  if (lines.empty() || lines.front() != header) throw DataError("cannot resume: bad header in " + path.string());
  lines.erase(lines.begin());
  if (static_cast<std::int64_t>(lines.size()) < count) {
    throw DataError("cannot resume: " + path.string() + " has fewer rows than the checkpoint iteration");
  }
  lines.resize(static_cast<std::size_t>(count));
  return lines;
}

}  // namespace

void train_run(const TrainConfig& cfg, const world::Dataset& data, const std::string& dataset_ref,
               const std::filesystem::path& out_dir, const RunOptions& opts) {
  namespace fs = std::filesystem;
  const bool existing = fs::exists(out_dir / kCheckpointFile) || fs::exists(out_dir / kMetricsFile);
  if (opts.resume && !fs::exists(out_dir / kCheckpointFile)) {
    throw UsageError("cannot resume: no checkpoint in " + out_dir.string());
  }
  if (existing && !opts.resume && !opts.force) {
    throw UsageError("run directory " + out_dir.string() + " is not empty; pass --force to overwrite or --resume");
  }
  fs::create_directories(out_dir);
  if (existing && opts.force && !opts.resume) {
    for (const char* f : {kCheckpointFile, kMetricsFile, kContestsFile, kTimingFile, kRunManifestFile, kDiagnosticFile}) {
      fs::remove(out_dir / f);
    }
  }

  Trainer tr(cfg, data);
  RunFiles files{out_dir, {}, {}};
  if (opts.resume) {
    tr.restore(ad::Checkpoint::load(out_dir / kCheckpointFile));
    files.metrics = resume_rows(out_dir / kMetricsFile, metrics_header(), tr.iteration());
    if (fs::exists(out_dir / kTimingFile)) {
      files.timing = resume_rows(out_dir / kTimingFile, "iteration,wall_seconds", tr.iteration());
    }
  }

  try {
    while (!tr.finished()) {
      if (opts.stop_after && tr.iteration() >= *opts.stop_after) break;
      const auto t = tr.step();
      files.metrics.push_back(metrics_row(t));
      files.timing.push_back(std::to_string(t.iteration) + ',' + util::format_double(t.wall_seconds));
      if (opts.on_iteration) opts.on_iteration(t);
      if (tr.config().checkpoint_every > 0 && tr.iteration() % tr.config().checkpoint_every == 0 && !tr.finished()) {
        files.flush(tr);
      }
    }
  } catch (const NumericalError& e) {
    auto snap = tr.checkpoint();
    snap.metadata["error"] = e.what();
    snap.save(out_dir / kDiagnosticFile);
    util::write_file_atomic(out_dir / kMetricsFile, join_lines(metrics_header(), files.metrics));
    throw;
  }
  files.flush(tr);

  nlohmann::ordered_json manifest;
  manifest["format"] = "coirl-run";
  manifest["version"] = 1;
  manifest["config_hash"] = tr.config().hash();
  manifest["config"] = tr.config().canonical_text();
  manifest["strategy"] = to_string(tr.config().strategy);
  manifest["rl_method"] = to_string(tr.config().rl_method);
  manifest["seed"] = tr.config().seed;
  manifest["dataset"] = dataset_ref;
  manifest["dataset_config_hash"] = data.world.hash();
  manifest["dataset_seed"] = data.seed;
  manifest["build"] = COIRL_BUILD_ID;
  manifest["iteration"] = tr.iteration();
  manifest["finished"] = tr.finished();
  manifest["outputs"] = {kCheckpointFile, kMetricsFile, kContestsFile, kTimingFile};
  util::write_file_atomic(out_dir / kRunManifestFile, manifest.dump(2) + "\n");
}

}  // namespace coirl::train
