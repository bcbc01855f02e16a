#include "coirl/util/digest.hpp"

#include <sodium.h>

#include <stdexcept>

#include "coirl/errors.hpp"

namespace coirl::util {
namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

crypto_generichash_state* as_state(unsigned char* raw) { return reinterpret_cast<crypto_generichash_state*>(raw); }

}  // namespace

static_assert(sizeof(crypto_generichash_state) <= 384);

Hasher::Hasher() {
  ensure_sodium();
  crypto_generichash_init(as_state(state_), nullptr, 0, crypto_generichash_BYTES);
}

Hasher& Hasher::update(std::span<const std::byte> bytes) {
  crypto_generichash_update(as_state(state_), reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return *this;
}

Hasher& Hasher::update(std::string_view text) { return update(std::as_bytes(std::span(text.data(), text.size()))); }

std::string Hasher::hex() {
  unsigned char out[crypto_generichash_BYTES];
  crypto_generichash_final(as_state(state_), out, sizeof out);
  std::string hex(2 * sizeof out + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), out, sizeof out);
  hex.pop_back();
  return hex;
}

std::string digest_hex(std::string_view text) { return Hasher().update(text).hex(); }

std::string base64_encode(std::span<const std::byte> bytes) {
  ensure_sodium();
  const auto variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                    variant);
  out.pop_back();
  return out;
}

std::vector<std::byte> base64_decode(std::string_view text) {
  ensure_sodium();
  std::vector<std::byte> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(), nullptr,
                        &len, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw DataError("malformed base64 payload");
  }
  out.resize(len);
  return out;
}

}  // namespace coirl::util
