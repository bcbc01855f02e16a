#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coirl::util {

// Incremental BLAKE2b-256 (libsodium generichash), hex-encoded.
class Hasher {
 public:
  Hasher();
  Hasher& update(std::span<const std::byte> bytes);
  Hasher& update(std::string_view text);
  template <typename T>
  Hasher& update_values(std::span<const T> values) {
    return update(std::as_bytes(values));
  }
  [[nodiscard]] std::string hex();

 private:
  alignas(64) unsigned char state_[384];
};

std::string digest_hex(std::string_view text);

std::string base64_encode(std::span<const std::byte> bytes);
std::vector<std::byte> base64_decode(std::string_view text);

}  // namespace coirl::util
