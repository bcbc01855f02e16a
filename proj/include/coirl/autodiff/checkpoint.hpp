#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coirl/autodiff/optim.hpp"
#include "coirl/autodiff/params.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

// Self-describing checkpoint document:
//   { "format": "coirl-checkpoint", "version": 1, "metadata": {...},
//     "params": { name: { "shape": [...], "dtype": "f32", "data": <base64 little-endian> } } }
class Checkpoint {
 public:
  struct Array {
    Shape shape;
    std::vector<float> data;
  };

  nlohmann::json metadata = nlohmann::json::object();

  void put(const std::string& name, const Shape& shape, std::span<const Real> values);
  void put_params(const std::string& prefix, const ParamSet& params);
  void put_optimizer(const std::string& prefix, const AdamW& opt, const ParamSet& params);

  [[nodiscard]] bool contains(const std::string& name) const { return arrays_.contains(name); }
  [[nodiscard]] const Array& get(const std::string& name) const;
  // Validates every name and shape against the live model definition.
  void restore_params(const std::string& prefix, ParamSet& params) const;
  void restore_optimizer(const std::string& prefix, AdamW& opt, const ParamSet& params) const;

  [[nodiscard]] std::string dump() const;
  static Checkpoint parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::map<std::string, Array> arrays_;
};

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
