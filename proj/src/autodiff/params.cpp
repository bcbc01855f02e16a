#include "coirl/autodiff/params.hpp"

#include <algorithm>
#include <cmath>

#include "coirl/util/digest.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

Tensor& ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw StructuralError("duplicate parameter name: " + name);
  entries_.push_back({std::move(name), value.clone_leaf(true)});
  return entries_.back().value;
}

Tensor& ParamSet::add_xavier(std::string name, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<Real> values(fan_in * fan_out);
  for (auto& v : values) v = static_cast<Real>(dist(rng));
  return add(std::move(name), Tensor::from({fan_in, fan_out}, std::move(values)));
}

Tensor& ParamSet::add_zeros(std::string name, Shape shape) { return add(std::move(name), Tensor::zeros(std::move(shape))); }

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const ParamEntry& e) { return e.name == name; });
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw StructuralError("unknown parameter: " + name);
}

Tensor& ParamSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

std::size_t ParamSet::num_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& e : entries_) out.add(e.name, e.value);
  return out;
}

void ParamSet::copy_values_from(const ParamSet& other) {
  check_parity(*this, other);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].value.mutable_data();
    const auto src = other.entries_[i].value.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

std::vector<std::pair<std::string, Shape>> ParamSet::manifest() const {
  std::vector<std::pair<std::string, Shape>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.emplace_back(e.name, e.value.shape());
  return out;
}

std::string ParamSet::value_hash() const {
  util::Hasher h;
  for (const auto& e : entries_) {
    h.update(e.name).update(shape_str(e.value.shape()));
    h.update_values(e.value.data());
  }
  return h.hex();
}

bool ParamSet::any_nonzero_grad() const {
  for (const auto& e : entries_) {
    for (Real g : e.value.grad()) {
      if (g != Real{0}) return true;
    }
  }
  return false;
}

void check_parity(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) {
    throw StructuralError("parameter sets differ in size: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ea = a.entry(i);
    const auto& eb = b.entry(i);
    if (ea.name != eb.name || ea.value.shape() != eb.value.shape()) {
      throw StructuralError("parameter mismatch at index " + std::to_string(i) + ": " + ea.name +
                            shape_str(ea.value.shape()) + " vs " + eb.name + shape_str(eb.value.shape()));
    }
  }
}

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
