#include "coirl/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coirl/kernels/gemm.hpp"

namespace coirl {
inline namespace COIRL_PRECISION_NS {
namespace ad {
namespace {

Tensor make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> inputs, const char* op,
                   std::function<void(Node&)> backward_fn) {
  for (Real v : values) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

// Grad buffer of input i, or nullptr when that input does not need one.
Real* input_grad(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() > 2) throw DimensionError(std::string(op) + " expects a rank-1 or rank-2 tensor, got " + shape_str(t.shape()));
}

Real sigmoid(Real x) {
  if (x >= 0) return Real{1} / (Real{1} + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real{1} + e);
}

Real softplus_value(Real x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, Real{0}); }

}  // namespace

Tensor binary(BinaryOp op, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = !same && a.size() == 1;
  const bool b_scalar = !same && b.size() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError("elementwise shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_size(out_shape);
  const auto av = a.data();
  const auto bv = b.data();
  auto ai = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto bi = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };

  std::vector<Real> out(n);
  const char* name = "add";
  switch (op) {
    case BinaryOp::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) + bi(i);
      break;
    case BinaryOp::kSub:
      name = "sub";
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) - bi(i);
      break;
    case BinaryOp::kMul:
      name = "mul";
      for (std::size_t i = 0; i < n; ++i) out[i] = ai(i) * bi(i);
      break;
    case BinaryOp::kDiv:
      name = "div";
      for (std::size_t i = 0; i < n; ++i) {
        if (bi(i) == Real{0}) throw DomainError("division by zero");
        out[i] = ai(i) / bi(i);
      }
      break;
  }

  return make_result(out_shape, std::move(out), {a, b}, name, [op, a_scalar, b_scalar, n](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    auto aval = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
    auto bval = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
    // d(out)/d(a) and d(out)/d(b) at element i.
    auto da = [&](std::size_t i) -> Real {
      switch (op) {
        case BinaryOp::kAdd:
        case BinaryOp::kSub: return Real{1};
        case BinaryOp::kMul: return bval(i);
        case BinaryOp::kDiv: return Real{1} / bval(i);
      }
      return Real{0};
    };
    auto db = [&](std::size_t i) -> Real {
      switch (op) {
        case BinaryOp::kAdd: return Real{1};
        case BinaryOp::kSub: return Real{-1};
        case BinaryOp::kMul: return aval(i);
        case BinaryOp::kDiv: return -aval(i) / (bval(i) * bval(i));
      }
      return Real{0};
    };
    if (Real* ga = input_grad(self, 0)) {
      if (a_scalar) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(g[i]) * da(i);
        ga[0] += static_cast<Real>(acc);
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * da(i);
      }
    }
    if (Real* gb = input_grad(self, 1)) {
      if (b_scalar) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(g[i]) * db(i);
        gb[0] += static_cast<Real>(acc);
      } else {
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * db(i);
      }
    }
  });
}

Tensor unary(UnaryOp op, const Tensor& x) {
  const auto xv = x.data();
  const std::size_t n = xv.size();
  std::vector<Real> out(n);
  const char* name = "exp";
  switch (op) {
    case UnaryOp::kExp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(xv[i]);
      break;
    case UnaryOp::kLog:
      name = "log";
      for (std::size_t i = 0; i < n; ++i) {
        if (!(xv[i] > Real{0})) throw DomainError("log of non-positive value");
        out[i] = std::log(xv[i]);
      }
      break;
    case UnaryOp::kTanh:
      name = "tanh";
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(xv[i]);
      break;
    case UnaryOp::kRelu:
      name = "relu";
      for (std::size_t i = 0; i < n; ++i) out[i] = std::max(xv[i], Real{0});
      break;
    case UnaryOp::kSoftplus:
      name = "softplus";
      for (std::size_t i = 0; i < n; ++i) out[i] = softplus_value(xv[i]);
      break;
    case UnaryOp::kSquare:
      name = "square";
      for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] * xv[i];
      break;
    case UnaryOp::kNeg:
      name = "neg";
      for (std::size_t i = 0; i < n; ++i) out[i] = -xv[i];
      break;
    case UnaryOp::kAbs:
      name = "abs";
      for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(xv[i]);
      break;
  }

  return make_result(x.shape(), std::move(out), {x}, name, [op](Node& self) {
    Real* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& g = self.grad;
    const auto& y = self.value;
    const auto& xin = self.inputs[0]->value;
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) {
      Real d = 0;
      switch (op) {
        case UnaryOp::kExp: d = y[i]; break;
        case UnaryOp::kLog: d = Real{1} / xin[i]; break;
        case UnaryOp::kTanh: d = Real{1} - y[i] * y[i]; break;
        case UnaryOp::kRelu: d = xin[i] > Real{0} ? Real{1} : Real{0}; break;
        case UnaryOp::kSoftplus: d = sigmoid(xin[i]); break;
        case UnaryOp::kSquare: d = Real{2} * xin[i]; break;
        case UnaryOp::kNeg: d = Real{-1}; break;
        case UnaryOp::kAbs: d = xin[i] > Real{0} ? Real{1} : (xin[i] < Real{0} ? Real{-1} : Real{0}); break;
      }
      gx[i] += g[i] * d;
    }
  });
}

Tensor scale(const Tensor& x, Real c) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= c;
  return make_result(x.shape(), std::move(out), {x}, "scale", [c](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * c;
    }
  });
}

Tensor shift(const Tensor& x, Real c) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += c;
  return make_result(x.shape(), std::move(out), {x}, "shift", [](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }
  });
}

Tensor softplus_clamp(const Tensor& x, Real lo, Real hi) {
  if (!(lo < hi)) throw ConfigError("softplus_clamp requires lo < hi");
  const auto xv = x.data();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::clamp(softplus_value(xv[i]), lo, hi);
  return make_result(x.shape(), std::move(out), {x}, "softplus_clamp", [lo, hi](Node& self) {
    Real* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xin = self.inputs[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const Real sp = softplus_value(xin[i]);
      if (sp < lo || sp > hi) continue;
      gx[i] += self.grad[i] * sigmoid(xin[i]);
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t p = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<Real> out(m * p);
  kernels::gemm({a.data().data(), b.data().data(), out.data(), m, k, p});
  return make_result({m, p}, std::move(out), {a, b}, "matmul", [m, k, p](Node& self) {
    const Real* g = self.grad.data();
    const Real* av = self.inputs[0]->value.data();
    const Real* bv = self.inputs[1]->value.data();
    if (Real* ga = input_grad(self, 0)) {
      // ga[m x k] += g[m x p] * b^T
      kernels::gemm({g, bv, ga, m, p, k, false, true, true});
    }
    if (Real* gb = input_grad(self, 1)) {
      // gb[k x p] += a^T * g
      kernels::gemm({av, g, gb, k, m, p, true, false, true});
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_rank2(x, "transpose");
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  const auto xv = x.data();
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  }
  return make_result({c, r}, std::move(out), {x}, "transpose", [r, c](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (Real v : x.data()) acc += v;
  return make_result({1}, {static_cast<Real>(acc)}, {x}, "sum", [](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      const Real g = self.grad[0];
      for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) gx[i] += g;
    }
  });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (Real v : x.data()) acc += v;
  const std::size_t n = x.size();
  return make_result({1}, {static_cast<Real>(acc / static_cast<double>(n))}, {x}, "mean", [n](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      const Real g = self.grad[0] / static_cast<Real>(n);
      for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    }
  });
}

Tensor row_sum(const Tensor& x) {
  require_rank2(x, "row_sum");
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  const auto xv = x.data();
  std::vector<Real> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += xv[i * c + j];
    out[i] = static_cast<Real>(acc);
  }
  return make_result({r, 1}, std::move(out), {x}, "row_sum", [r, c](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += self.grad[i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, "reshape", [](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_cols of zero tensors");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& t : parts) {
    require_rank2(t, "concat_cols");
    if (t.rows() != r) throw DimensionError("concat_cols row counts disagree");
    widths.push_back(t.cols());
    total += t.cols();
  }
  std::vector<Real> out(r * total);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].data();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * widths[p]), widths[p],
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    }
    offset += widths[p];
  }
  return make_result({r, total}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), "concat_cols",
                     [r, total, widths](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         if (Real* gp = input_grad(self, p)) {
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < widths[p]; ++j) {
                               gp[i * widths[p] + j] += self.grad[i * total + off + j];
                             }
                           }
                         }
                         off += widths[p];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_rows of zero tensors");
  const std::size_t c = parts[0].cols();
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  std::vector<Real> out;
  for (const auto& t : parts) {
    require_rank2(t, "concat_rows");
    if (t.cols() != c) throw DimensionError("concat_rows column counts disagree");
    rows += t.rows();
    sizes.push_back(t.size());
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  return make_result({rows, c}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), "concat_rows",
                     [sizes](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < sizes.size(); ++p) {
                         if (Real* gp = input_grad(self, p)) {
                           for (std::size_t i = 0; i < sizes[p]; ++i) gp[i] += self.grad[off + i];
                         }
                         off += sizes[p];
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.rows()) throw DimensionError("slice_rows range out of bounds");
  const std::size_t c = x.cols();
  const auto xv = x.data();
  std::vector<Real> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * c),
                        xv.begin() + static_cast<std::ptrdiff_t>(end * c));
  return make_result({end - begin, c}, std::move(out), {x}, "slice_rows", [begin, c](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[begin * c + i] += self.grad[i];
    }
  });
}

Tensor tile_rows(const Tensor& x, std::size_t times) {
  require_rank2(x, "tile_rows");
  if (times == 0) throw DimensionError("tile_rows with zero copies");
  const std::size_t block = x.size();
  std::vector<Real> out;
  out.reserve(block * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), x.data().begin(), x.data().end());
  return make_result({x.rows() * times, x.cols()}, std::move(out), {x}, "tile_rows", [block, times](Node& self) {
    if (Real* gx = input_grad(self, 0)) {
      for (std::size_t i = 0; i < block; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < times; ++t) acc += self.grad[t * block + i];
        gx[i] += static_cast<Real>(acc);
      }
    }
  });
}

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

AttentionMask AttentionMask::none(std::size_t rows, std::size_t cols) { return AttentionMask(rows, cols); }

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m.set_blocked(i, j, true);
  }
  return m;
}

AttentionMask AttentionMask::inverse_causal(std::size_t n) {
  AttentionMask m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) m.set_blocked(i, j, true);
  }
  return m;
}

AttentionMask AttentionMask::diagonal(std::size_t n) {
  AttentionMask m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.set_blocked(i, j, i != j);
  }
  return m;
}

Tensor masked_softmax(const Tensor& scores, const AttentionMask& mask) {
  require_rank2(scores, "masked_softmax");
  const std::size_t r = scores.rows();
  const std::size_t c = scores.cols();
  if (mask.rows() != r || mask.cols() != c) throw DimensionError("attention mask shape does not match scores");
  const auto sv = scores.data();
  std::vector<Real> out(r * c, Real{0});
  for (std::size_t i = 0; i < r; ++i) {
    Real mx = 0;
    bool any = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.blocked(i, j)) continue;
      mx = any ? std::max(mx, sv[i * c + j]) : sv[i * c + j];
      any = true;
    }
    if (!any) throw ConfigError("attention row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.blocked(i, j)) continue;
      const Real e = std::exp(sv[i * c + j] - mx);
      out[i * c + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = static_cast<Real>(out[i * c + j] / z);
  }
  return make_result({r, c}, std::move(out), {scores}, "masked_softmax", [r, c](Node& self) {
    Real* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& p = self.value;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += static_cast<double>(p[i * c + j]) * g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += p[i * c + j] * (g[i * c + j] - static_cast<Real>(dot));
      }
    }
  });
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask) {
  if (q.cols() != k.cols()) throw DimensionError("attention query/key widths disagree");
  if (k.rows() != v.rows()) throw DimensionError("attention key/value counts disagree");
  const Real inv_sqrt_d = Real{1} / std::sqrt(static_cast<Real>(q.cols()));
  const Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(masked_softmax(scores, mask), v);
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss shape mismatch: " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  return mean(square(sub(prediction, target)));
}

Tensor l1_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("l1_loss shape mismatch: " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  return mean(abs(sub(prediction, target)));
}

}  // namespace ad
}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
