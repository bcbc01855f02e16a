#include "coirl/world/dataset.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "coirl/errors.hpp"
#include "coirl/util/files.hpp"

namespace coirl::world {
namespace {

using ordered_json = nlohmann::ordered_json;

double parse_weight(std::string_view text, const std::string& whole) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v) || v < 0.0) {
    throw UsageError("invalid domain mix '" + whole + "' (expected A:B with non-negative weights)");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ordered_json record_json(const ExpertRecord& r, const Scene& scene) {
  ordered_json j;
  j["scene_id"] = r.scene_id;
  j["seed"] = scene.seed;
  j["domain"] = to_string(scene.domain);
  j["difficulty"] = scene.difficulty;
  j["t"] = r.t;
  j["obs"] = r.obs;
  ordered_json expert = ordered_json::array();
  for (const Vec2& a : r.expert) expert.push_back({a.x, a.y});
  j["expert"] = std::move(expert);
  j["next_obs"] = r.next_obs;
  return j;
}

bool close(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-9) return false;
  }
  return true;
}

}  // namespace

DomainMix DomainMix::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || text.find(':', colon + 1) != std::string::npos) {
    throw UsageError("invalid domain mix '" + text + "' (expected A:B, e.g. 1:0)");
  }
  const std::string_view view(text);
  DomainMix mix{parse_weight(view.substr(0, colon), text), parse_weight(view.substr(colon + 1), text)};
  if (mix.weight_a + mix.weight_b <= 0.0) throw UsageError("domain mix '" + text + "' has zero total weight");
  return mix;
}

std::string DomainMix::str() const { return format_double(weight_a) + ":" + format_double(weight_b); }

std::vector<SceneSpec> plan_scenes(const DatasetSpec& spec) {
  std::vector<SceneSpec> out;
  out.reserve(spec.num_scenes);
  const double p_a = spec.domain_mix.weight_a / (spec.domain_mix.weight_a + spec.domain_mix.weight_b);
  for (std::size_t i = 0; i < spec.num_scenes; ++i) {
    const std::uint64_t seed = mix_seed(spec.seed, i);
    std::mt19937_64 rng(mix_seed(seed, 1));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Domain d = u(rng) < p_a ? Domain::A : Domain::B;
    const double difficulty = 0.25 + 0.75 * u(rng);
    out.push_back({seed, d, difficulty});
  }
  return out;
}

std::vector<Vec2> positions_from(std::span<const Vec2> actions) {
  std::vector<Vec2> out;
  out.reserve(actions.size());
  Vec2 acc{};
  for (const Vec2& a : actions) {
    acc = acc + a;
    out.push_back(acc);
  }
  return out;
}

std::vector<ExpertRecord> scene_records(const Scene& scene, std::size_t scene_index, const WorldConfig& cfg) {
  std::vector<ExpertRecord> out;
  if (scene.horizon() < cfg.plan_steps) return out;
  for (std::size_t t = 0; t < scene.horizon() - cfg.plan_steps; ++t) {
    ExpertRecord r;
    r.scene_index = scene_index;
    r.scene_id = scene.scene_id;
    r.t = t;
    r.obs = observe(scene, t, cfg);
    r.next_obs = observe(scene, t + 1, cfg);
    const double h = scene.ego_poses[t].heading;
    for (std::size_t i = 0; i < cfg.plan_steps; ++i) r.expert.push_back(rotate(scene.expert_actions[t + i], -h));
    out.push_back(std::move(r));
  }
  return out;
}

Split Dataset::split_of_scene(std::size_t scene_index) const {
  const std::size_t n = scenes.size();
  const std::size_t train_end = n * 7 / 10;
  const std::size_t contest_end = n * 8 / 10;
  if (scene_index < train_end) return Split::kTrain;
  if (scene_index < contest_end) return Split::kContest;
  return Split::kTest;
}

std::vector<std::size_t> Dataset::record_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (split_of_scene(records[i].scene_index) == split) out.push_back(i);
  }
  return out;
}

Dataset make_dataset(const DatasetSpec& spec) {
  Dataset data;
  data.world = spec.world;
  data.seed = spec.seed;
  data.domain_mix = spec.domain_mix;
  data.scene_specs = plan_scenes(spec);
  data.scenes.resize(data.scene_specs.size());
  const auto count = static_cast<long long>(data.scene_specs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    const auto& s = data.scene_specs[static_cast<std::size_t>(i)];
    data.scenes[static_cast<std::size_t>(i)] = generate_scene(s.seed, s.domain, s.difficulty, spec.world);
  }
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    auto recs = scene_records(data.scenes[i], i, spec.world);
    data.records.insert(data.records.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return data;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  std::string lines;
  for (const auto& r : data.records) {
    lines += record_json(r, data.scene_of(r)).dump();
    lines += '\n';
  }

  ordered_json manifest;
  manifest["format"] = "coirl-dataset";
  manifest["version"] = 1;
  manifest["config_hash"] = data.world.hash();
  manifest["config"] = data.world.canonical_text();
  manifest["seed"] = data.seed;
  manifest["domain_mix"] = data.domain_mix.str();
  manifest["num_scenes"] = data.scenes.size();
  manifest["num_records"] = data.records.size();
  ordered_json scenes = ordered_json::array();
  for (const auto& s : data.scene_specs) {
    scenes.push_back({{"seed", s.seed}, {"domain", to_string(s.domain)}, {"difficulty", s.difficulty}});
  }
  manifest["scenes"] = std::move(scenes);

  const auto data_path = dir / kDatasetFile;
  util::write_file_atomic(data_path, lines);
  try {
    util::write_file_atomic(dir / kManifestFile, manifest.dump(1) + "\n");
  } catch (...) {
    std::filesystem::remove(data_path, ec);
    throw;
  }
}

void build_dataset(const DatasetSpec& spec, const std::filesystem::path& dir) { write_dataset(make_dataset(spec), dir); }

Dataset load_dataset(const std::filesystem::path& dir) {
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(util::read_file(dir / kManifestFile));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest: " + std::string(e.what()));
  }
  Dataset data;
  try {
    if (manifest.at("format") != "coirl-dataset") throw DataError("not a dataset manifest: " + dir.string());
    data.world = WorldConfig::from_canonical_text(manifest.at("config").get<std::string>());
    if (manifest.at("config_hash").get<std::string>() != data.world.hash()) {
      throw DataError("dataset config hash " + manifest.at("config_hash").get<std::string>() +
                      " does not match the hash of its recorded world config " + data.world.hash());
    }
    data.seed = manifest.at("seed").get<std::uint64_t>();
    data.domain_mix = DomainMix::parse(manifest.at("domain_mix").get<std::string>());
    for (const auto& s : manifest.at("scenes")) {
      data.scene_specs.push_back({s.at("seed").get<std::uint64_t>(), domain_from_string(s.at("domain").get<std::string>()),
                                  s.at("difficulty").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest: " + std::string(e.what()));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
  if (manifest.at("num_scenes").get<std::size_t>() != data.scene_specs.size()) {
    throw DataError("manifest scene count disagrees with its scene list");
  }

  data.scenes.resize(data.scene_specs.size());
  const auto count = static_cast<long long>(data.scene_specs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    const auto& s = data.scene_specs[static_cast<std::size_t>(i)];
    data.scenes[static_cast<std::size_t>(i)] = generate_scene(s.seed, s.domain, s.difficulty, data.world);
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) by_id[data.scenes[i].scene_id] = i;

  std::istringstream lines(util::read_file(dir / kDatasetFile));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.empty()) continue;
    ExpertRecord r;
    try {
      const auto j = ordered_json::parse(line);
      r.scene_id = j.at("scene_id").get<std::string>();
      r.t = j.at("t").get<std::size_t>();
      r.obs = j.at("obs").get<std::vector<double>>();
      r.next_obs = j.at("next_obs").get<std::vector<double>>();
      for (const auto& a : j.at("expert")) r.expert.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto it = by_id.find(r.scene_id);
    if (it == by_id.end()) throw DataError("dataset line " + std::to_string(lineno) + " names unknown scene " + r.scene_id);
    r.scene_index = it->second;
    const Scene& scene = data.scenes[r.scene_index];
    if (r.t + data.world.plan_steps >= scene.horizon() + 1 || r.expert.size() != data.world.plan_steps ||
        !close(r.obs, observe(scene, r.t, data.world))) {
      throw DataError("dataset line " + std::to_string(lineno) + " does not match regenerated scene " + r.scene_id);
    }
    data.records.push_back(std::move(r));
  }
  if (data.records.size() != manifest.at("num_records").get<std::size_t>()) {
    throw DataError("manifest lists " + manifest.at("num_records").dump() + " records but the dataset holds " +
                    std::to_string(data.records.size()));
  }
  return data;
}

}  // namespace coirl::world
