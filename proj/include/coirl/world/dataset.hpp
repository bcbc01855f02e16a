#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coirl/world/collision.hpp"
#include "coirl/world/observe.hpp"
#include "coirl/world/scene.hpp"

namespace coirl::world {

// Relative scene weights for domains A and B, parsed from "A:B" (e.g. "1:0", "3:1").
struct DomainMix {
  double weight_a = 1.0;
  double weight_b = 0.0;

  static DomainMix parse(const std::string& text);
  [[nodiscard]] std::string str() const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  Domain domain = Domain::A;
  double difficulty = 0.0;
};

struct DatasetSpec {
  std::size_t num_scenes = 10;
  std::uint64_t seed = 0;
  DomainMix domain_mix;
  WorldConfig world;
};

// Per-scene seeds, domains and difficulties derived from the base seed.
std::vector<SceneSpec> plan_scenes(const DatasetSpec& spec);

struct ExpertRecord {
  std::size_t scene_index = 0;  // into Dataset::scenes
  std::string scene_id;
  std::size_t t = 0;
  std::vector<double> obs;
  std::vector<Vec2> expert;  // n displacements in the ego frame at t
  std::vector<double> next_obs;
};

enum class Split { kTrain, kContest, kTest };

struct Dataset {
  WorldConfig world;
  std::uint64_t seed = 0;
  DomainMix domain_mix;
  std::vector<SceneSpec> scene_specs;
  std::vector<Scene> scenes;
  std::vector<ExpertRecord> records;

  [[nodiscard]] const Scene& scene_of(const ExpertRecord& r) const { return scenes[r.scene_index]; }
  // Scene-level split: first 70% train, next 10% contest, last 20% test.
  [[nodiscard]] Split split_of_scene(std::size_t scene_index) const;
  [[nodiscard]] std::vector<std::size_t> record_indices(Split split) const;
};

// Records for t in [0, H - n) of every scene.
std::vector<ExpertRecord> scene_records(const Scene& scene, std::size_t scene_index, const WorldConfig& cfg);

Dataset make_dataset(const DatasetSpec& spec);

// Writes DIR/dataset.jsonl and DIR/manifest.json atomically (temp files renamed
// into place; temporaries removed on failure).
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
void build_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

// Reads a dataset directory, regenerates scene geometry from the manifest and
// verifies record counts, config hash and observations.
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

// Expert positions (cumulative sums of the record's actions).
std::vector<Vec2> positions_from(std::span<const Vec2> actions);

}  // namespace coirl::world
