#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "coirl/autodiff/tensor.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

struct ParamEntry {
  std::string name;
  Tensor value;
};

// Ordered, named collection of trainable leaves.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor value);
  // Xavier-uniform weight [fan_in x fan_out].
  Tensor& add_xavier(std::string name, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
  Tensor& add_zeros(std::string name, Shape shape);

  [[nodiscard]] bool contains(const std::string& name) const;
  [[nodiscard]] const Tensor& get(const std::string& name) const;
  [[nodiscard]] Tensor& get(const std::string& name);

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] std::size_t num_elements() const;
  [[nodiscard]] auto begin() { return entries_.begin(); }
  [[nodiscard]] auto end() { return entries_.end(); }
  [[nodiscard]] auto begin() const { return entries_.begin(); }
  [[nodiscard]] auto end() const { return entries_.end(); }
  [[nodiscard]] const ParamEntry& entry(std::size_t i) const { return entries_[i]; }
  [[nodiscard]] ParamEntry& entry(std::size_t i) { return entries_[i]; }

  void zero_grad();
  // Deep copy with fresh leaves.
  [[nodiscard]] ParamSet clone() const;
  // Overwrites values from a structurally identical set.
  void copy_values_from(const ParamSet& other);

  [[nodiscard]] std::vector<std::pair<std::string, Shape>> manifest() const;
  // Digest over names, shapes and raw values.
  [[nodiscard]] std::string value_hash() const;
  // True when any parameter holds a non-zero gradient.
  [[nodiscard]] bool any_nonzero_grad() const;

 private:
  std::vector<ParamEntry> entries_;
};

// Throws StructuralError unless both sets expose identical name/shape manifests.
void check_parity(const ParamSet& a, const ParamSet& b);

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
