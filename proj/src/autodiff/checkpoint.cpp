#include "coirl/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coirl/util/digest.hpp"
#include "coirl/util/files.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {
namespace {

std::string encode_f32(const std::vector<float>& values) {
  std::vector<std::byte> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::byte>((bits >> (8 * b)) & 0xffu);
  }
  return util::base64_encode(bytes);
}

std::vector<float> decode_f32(const std::string& text) {
  const auto bytes = util::base64_decode(text);
  if (bytes.size() % 4 != 0) throw DataError("checkpoint payload is not a whole number of f32 values");
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Shape& shape, std::span<const Real> values) {
  Array a{shape, std::vector<float>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) a.data[i] = static_cast<float>(values[i]);
  arrays_[name] = std::move(a);
}

void Checkpoint::put_params(const std::string& prefix, const ParamSet& params) {
  for (const auto& e : params) put(prefix + e.name, e.value.shape(), e.value.data());
}

void Checkpoint::put_optimizer(const std::string& prefix, const AdamW& opt, const ParamSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    put(prefix + "m." + e.name, e.value.shape(), opt.first_moments()[i]);
    put(prefix + "v." + e.name, e.value.shape(), opt.second_moments()[i]);
  }
  metadata["optimizer_steps"][prefix] = opt.step_count();
}

const Checkpoint::Array& Checkpoint::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw StructuralError("checkpoint has no entry " + name);
  return it->second;
}

void Checkpoint::restore_params(const std::string& prefix, ParamSet& params) const {
  for (auto& e : params) {
    const auto& a = get(prefix + e.name);
    if (a.shape != e.value.shape()) {
      throw StructuralError("checkpoint shape " + shape_str(a.shape) + " for " + prefix + e.name +
                            " does not match model shape " + shape_str(e.value.shape()));
    }
    auto dst = e.value.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(a.data[i]);
  }
}

void Checkpoint::restore_optimizer(const std::string& prefix, AdamW& opt, const ParamSet& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    const auto& m = get(prefix + "m." + e.name);
    const auto& v = get(prefix + "v." + e.name);
    if (m.shape != e.value.shape() || v.shape != e.value.shape()) {
      throw StructuralError("optimizer state shape mismatch for " + e.name);
    }
    auto& mm = opt.first_moments()[i];
    auto& vv = opt.second_moments()[i];
    for (std::size_t j = 0; j < mm.size(); ++j) {
      mm[j] = static_cast<Real>(m.data[j]);
      vv[j] = static_cast<Real>(v.data[j]);
    }
  }
  opt.set_step_count(metadata.at("optimizer_steps").at(prefix).get<std::int64_t>());
}

std::string Checkpoint::dump() const {
  nlohmann::json doc;
  doc["format"] = "coirl-checkpoint";
  doc["version"] = 1;
  doc["metadata"] = metadata;
  auto& params = doc["params"];
  params = nlohmann::json::object();
  for (const auto& [name, a] : arrays_) {
    params[name] = {{"shape", a.shape}, {"dtype", "f32"}, {"data", encode_f32(a.data)}};
  }
  return doc.dump(1) + "\n";
}

Checkpoint Checkpoint::parse(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "coirl-checkpoint") throw DataError("not a coirl checkpoint");
  Checkpoint out;
  out.metadata = doc.value("metadata", nlohmann::json::object());
  for (const auto& [name, entry] : doc.at("params").items()) {
    if (entry.at("dtype") != "f32") throw DataError("unsupported dtype for " + name);
    Array a{entry.at("shape").get<Shape>(), decode_f32(entry.at("data").get<std::string>())};
    if (shape_size(a.shape) != a.data.size()) throw DataError("checkpoint entry " + name + " has inconsistent length");
    out.arrays_[name] = std::move(a);
  }
  return out;
}

void Checkpoint::save(const std::filesystem::path& path) const { util::write_file_atomic(path, dump()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return parse(util::read_file(path)); }

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
