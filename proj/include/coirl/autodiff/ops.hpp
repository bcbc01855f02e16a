#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coirl/autodiff/tensor.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {

enum class UnaryOp { kExp, kLog, kTanh, kRelu, kSoftplus, kSquare, kNeg, kAbs };
enum class BinaryOp { kAdd, kSub, kMul, kDiv };

// Operands must have equal shapes, or one of them must hold a single element
// (scalar broadcast). No other broadcasting is supported.
Tensor binary(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor unary(UnaryOp op, const Tensor& x);

inline Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryOp::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryOp::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryOp::kMul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return binary(BinaryOp::kDiv, a, b); }
inline Tensor exp(const Tensor& x) { return unary(UnaryOp::kExp, x); }
inline Tensor log(const Tensor& x) { return unary(UnaryOp::kLog, x); }
inline Tensor tanh(const Tensor& x) { return unary(UnaryOp::kTanh, x); }
inline Tensor relu(const Tensor& x) { return unary(UnaryOp::kRelu, x); }
inline Tensor softplus(const Tensor& x) { return unary(UnaryOp::kSoftplus, x); }
inline Tensor square(const Tensor& x) { return unary(UnaryOp::kSquare, x); }
inline Tensor neg(const Tensor& x) { return unary(UnaryOp::kNeg, x); }
inline Tensor abs(const Tensor& x) { return unary(UnaryOp::kAbs, x); }

// x * c and x + c for a constant c.
Tensor scale(const Tensor& x, Real c);
Tensor shift(const Tensor& x, Real c);

// clamp(softplus(x), lo, hi); gradient is zero where the clamp is active.
Tensor softplus_clamp(const Tensor& x, Real lo, Real hi);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// [n x d] -> [n x 1]
Tensor row_sum(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// Stacks `times` copies of x vertically.
Tensor tile_rows(const Tensor& x, std::size_t times);

// mask(i, j) == true means position i may NOT attend position j.
class AttentionMask {
 public:
  AttentionMask(std::size_t rows, std::size_t cols);

  static AttentionMask none(std::size_t rows, std::size_t cols);
  // Row i may attend j <= i.
  static AttentionMask causal(std::size_t n);
  // Row i may attend j >= i.
  static AttentionMask inverse_causal(std::size_t n);
  static AttentionMask diagonal(std::size_t n);

  [[nodiscard]] bool blocked(std::size_t i, std::size_t j) const { return bits_[i * cols_ + j] != 0; }
  void set_blocked(std::size_t i, std::size_t j, bool value) { bits_[i * cols_ + j] = value ? 1 : 0; }
  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bits_;
};

// Row-wise softmax over allowed entries; blocked entries are exactly zero.
// Throws ConfigError when a row allows no position.
Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask);

// softmax(q k^T / sqrt(d), mask) v with q [n x d], k [m x d], v [m x d_v].
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask);

Tensor mse_loss(const Tensor& prediction, const Tensor& target);
Tensor l1_loss(const Tensor& prediction, const Tensor& target);

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
