#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "scg/errors.hpp"
#include "scg/rng.hpp"
#include "scg/tape.hpp"
#include "scg/tensor.hpp"

namespace scg {

namespace detail {

// Row-major accumulating gemm: C += op(A) * op(B) with optional transposes.
// A is (m x k) after op, B is (k x n) after op, C is (m x n).
template <class T>
void gemm_acc(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
              const T* b, T* c) {
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * n;
      const T* arow = a + i * k;
      for (std::size_t l = 0; l < k; ++l) {
        const T av = arow[l];
        const T* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!ta && tb) {
    // B stored as (n x k)
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = a + i * k;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = T(0);
        for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
        crow[j] += acc;
      }
    }
  } else if (ta && !tb) {
    // A stored as (k x m)
    for (std::size_t l = 0; l < k; ++l) {
      const T* arow = a + l * m;
      const T* brow = b + l * n;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = arow[i];
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // A stored as (k x m), B stored as (n x k)
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = T(0);
        for (std::size_t l = 0; l < k; ++l) acc += a[l * m + i] * brow[l];
        crow[j] += acc;
      }
    }
  }
}

template <class T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data()) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <class T>
bool wants_grad(TapeT<T>* tape, const TensorT<T>& a) {
  return tape != nullptr && a.requires_grad();
}

template <class T>
TensorT<T> make_out(TapeT<T>* tape, std::vector<std::size_t> shape, bool any_input_grad) {
  return TensorT<T>::zeros(std::move(shape), tape != nullptr && any_input_grad);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

// add/sub support equal shapes, plus a rank-1 right operand broadcast across
// the rows of a rank-2 left operand (bias add). No other broadcasting.
template <class T>
TensorT<T> add(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  const bool row_broadcast =
      a.rank() == 2 && b.rank() == 1 && b.numel() == a.cols() && !a.same_shape(b);
  if (!a.same_shape(b) && !row_broadcast) throw DimensionError("add: shape mismatch");
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad() || b.requires_grad());
  const std::size_t n = a.numel();
  if (row_broadcast) {
    const std::size_t c = a.cols();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i % c];
  } else {
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  }
  if (out.requires_grad()) {
    tape->record(out, [a = a, b = b, out = out, row_broadcast]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        if (row_broadcast) {
          const std::size_t c = b.numel();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> sub(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  const bool row_broadcast =
      a.rank() == 2 && b.rank() == 1 && b.numel() == a.cols() && !a.same_shape(b);
  if (!a.same_shape(b) && !row_broadcast) throw DimensionError("sub: shape mismatch");
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad() || b.requires_grad());
  const std::size_t n = a.numel();
  if (row_broadcast) {
    const std::size_t c = a.cols();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i % c];
  } else {
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  }
  if (out.requires_grad()) {
    tape->record(out, [a = a, b = b, out = out, row_broadcast]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        if (row_broadcast) {
          const std::size_t c = b.numel();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] -= g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> mul(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw DimensionError("elementwise-mul: shape mismatch");
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (out.requires_grad()) {
    tape->record(out, [a = a, b = b, out = out]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> scalar_mul(TapeT<T>* tape, const TensorT<T>& a, T c) {
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out, c]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

// a: rank-1 (treated as a single row) or rank-2; b: rank-2, optionally used
// transposed. The output rank follows a.
template <class T>
TensorT<T> matmul(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b,
                  bool transpose_b = false) {
  if (b.rank() != 2 || a.rank() < 1 || a.rank() > 2) {
    throw DimensionError("matmul: operands must be rank-1/2 (a) and rank-2 (b)");
  }
  const std::size_t m = a.rows_as_matrix();
  const std::size_t k = a.cols_as_matrix();
  const std::size_t bk = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (k != bk) throw DimensionError("matmul: inner dimensions disagree");

  std::vector<std::size_t> out_shape =
      a.rank() == 1 ? std::vector<std::size_t>{n} : std::vector<std::size_t>{m, n};
  TensorT<T> out = detail::make_out(tape, out_shape, a.requires_grad() || b.requires_grad());
  detail::gemm_acc<T>(false, transpose_b, m, n, k, a.data().data(), b.data().data(),
                      out.data().data());
  if (out.requires_grad()) {
    tape->record(out, [a = a, b = b, out = out, transpose_b, m, n, k]() mutable {
      const T* g = out.grad().data();
      if (a.requires_grad()) {
        // C = A*B:  gA += g * B^T ; C = A*B^T: gA += g * B
        detail::gemm_acc<T>(false, !transpose_b, m, k, n, g, b.data().data(), a.grad().data());
      }
      if (b.requires_grad()) {
        if (!transpose_b) {
          // gB += A^T * g
          detail::gemm_acc<T>(true, false, k, n, m, a.data().data(), g, b.grad().data());
        } else {
          // gB += g^T * A
          detail::gemm_acc<T>(true, false, n, k, m, g, a.data().data(), b.grad().data());
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> concat(TapeT<T>* tape, const std::vector<TensorT<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const std::size_t rank = parts.front().rank();
  if (rank == 1 && axis != 0) throw DimensionError("concat: rank-1 tensors concat on axis 0");
  if (rank == 2 && axis > 1) throw DimensionError("concat: axis out of range");
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw DimensionError("concat: mixed ranks");
    any_grad = any_grad || p.requires_grad();
  }

  std::vector<std::size_t> out_shape;
  if (rank == 1) {
    std::size_t total = 0;
    for (const auto& p : parts) total += p.numel();
    out_shape = {total};
  } else if (axis == 0) {
    const std::size_t c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
      if (p.cols() != c) throw DimensionError("concat: column counts differ on axis 0");
      r += p.rows();
    }
    out_shape = {r, c};
  } else {
    const std::size_t r = parts.front().rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
      if (p.rows() != r) throw DimensionError("concat: row counts differ on axis 1");
      c += p.cols();
    }
    out_shape = {r, c};
  }

  TensorT<T> out = detail::make_out(tape, out_shape, any_grad);
  if (rank == 1 || axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
      off += p.numel();
    }
  } else {
    const std::size_t rows = out_shape[0];
    const std::size_t out_c = out_shape[1];
    std::size_t col_off = 0;
    for (const auto& p : parts) {
      const std::size_t c = p.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        std::copy(p.data().begin() + i * c, p.data().begin() + (i + 1) * c,
                  out.data().begin() + i * out_c + col_off);
      }
      col_off += c;
    }
  }

  if (out.requires_grad()) {
    tape->record(out, [parts = parts, out = out, rank, axis]() mutable {
      const auto& g = out.grad();
      if (rank == 1 || axis == 0) {
        std::size_t off = 0;
        for (auto& p : parts) {
          if (p.requires_grad()) {
            auto& gp = p.grad();
            for (std::size_t i = 0; i < p.numel(); ++i) gp[i] += g[off + i];
          }
          off += p.numel();
        }
      } else {
        const std::size_t rows = out.rows();
        const std::size_t out_c = out.cols();
        std::size_t col_off = 0;
        for (auto& p : parts) {
          const std::size_t c = p.cols();
          if (p.requires_grad()) {
            auto& gp = p.grad();
            for (std::size_t i = 0; i < rows; ++i) {
              for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * out_c + col_off + j];
            }
          }
          col_off += c;
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> concat(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& b, std::size_t axis) {
  return concat(tape, std::vector<TensorT<T>>{a, b}, axis);
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> relu(TapeT<T>* tape, const TensorT<T>& a) {
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.data()[i] > T(0)) ga[i] += g[i];
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> exp(TapeT<T>* tape, const TensorT<T>& a) {
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = std::exp(a.data()[i]);
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out.data()[i];
    });
  }
  return out;
}

template <class T>
TensorT<T> log(TapeT<T>* tape, const TensorT<T>& a) {
  if (!detail::all_finite(a)) throw NumericDomainError("log: non-finite input");
  for (T v : a.data()) {
    if (v <= T(0)) throw NumericDomainError("log: non-positive input");
  }
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = std::log(a.data()[i]);
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a.data()[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax with temperature (row-wise on rank-2, whole tensor on rank-1)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> softmax_t(TapeT<T>* tape, const TensorT<T>& a, T tau) {
  if (!(tau > T(0))) throw ContractError("softmax-with-temperature: tau must be positive");
  if (!detail::all_finite(a)) {
    throw NumericDomainError("softmax-with-temperature: non-finite input");
  }
  const std::size_t rows = a.rows_as_matrix();
  const std::size_t cols = a.cols_as_matrix();
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * cols;
    T* z = out.data().data() + r * cols;
    T mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < cols; ++j) {
      z[j] = std::exp((x[j] - mx) / tau);
      sum += z[j];
    }
    for (std::size_t j = 0; j < cols; ++j) z[j] /= sum;
  }
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out, tau, rows, cols]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* z = out.data().data() + r * cols;
        const T* gr = g.data() + r * cols;
        T dot = T(0);
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * z[j];
        for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += z[j] * (gr[j] - dot) / tau;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Row selection / embedding lookup
// ---------------------------------------------------------------------------

// Stacks table rows picked by `ids` into a (len x dim) matrix; gradients
// scatter-add back into the table.
template <class T>
TensorT<T> embedding_lookup(TapeT<T>* tape, const TensorT<T>& table,
                            const std::vector<std::size_t>& ids) {
  if (table.rank() != 2) throw DimensionError("embedding-lookup: table must be rank-2");
  const std::size_t dim = table.cols();
  for (std::size_t id : ids) {
    if (id >= table.rows()) throw ContractError("embedding-lookup: index out of range");
  }
  TensorT<T> out = detail::make_out(tape, {ids.size(), dim}, table.requires_grad());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(table.data().begin() + ids[i] * dim, table.data().begin() + (ids[i] + 1) * dim,
              out.data().begin() + i * dim);
  }
  if (out.requires_grad()) {
    tape->record(out, [table = table, out = out, ids, dim]() mutable {
      const auto& g = out.grad();
      auto& gt = table.grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) gt[ids[i] * dim + j] += g[i * dim + j];
      }
    });
  }
  return out;
}

// Single row of a rank-2 tensor as a rank-1 tensor.
template <class T>
TensorT<T> row_select(TapeT<T>* tape, const TensorT<T>& a, std::size_t row) {
  if (a.rank() != 2) throw DimensionError("row-select: input must be rank-2");
  if (row >= a.rows()) throw ContractError("row-select: row out of range");
  const std::size_t dim = a.cols();
  TensorT<T> out = detail::make_out(tape, {dim}, a.requires_grad());
  std::copy(a.data().begin() + row * dim, a.data().begin() + (row + 1) * dim, out.data().begin());
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out, row, dim]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t j = 0; j < dim; ++j) ga[row * dim + j] += g[j];
    });
  }
  return out;
}

// Multiple rows of a rank-2 tensor; unlike embedding_lookup the source is
// any matrix-valued node, not only a parameter table.
template <class T>
TensorT<T> row_select(TapeT<T>* tape, const TensorT<T>& a, const std::vector<std::size_t>& rows) {
  if (a.rank() != 2) throw DimensionError("row-select: input must be rank-2");
  for (std::size_t r : rows) {
    if (r >= a.rows()) throw ContractError("row-select: row out of range");
  }
  return embedding_lookup(tape, a, rows);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> sum(TapeT<T>* tape, const TensorT<T>& a) {
  TensorT<T> out = detail::make_out(tape, {1}, a.requires_grad());
  T acc = T(0);
  for (T v : a.data()) acc += v;
  out.data()[0] = acc;
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out]() mutable {
      const T g = out.grad()[0];
      auto& ga = a.grad();
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> mean(TapeT<T>* tape, const TensorT<T>& a) {
  if (a.numel() == 0) throw ContractError("mean: empty tensor");
  TensorT<T> out = detail::make_out(tape, {1}, a.requires_grad());
  T acc = T(0);
  for (T v : a.data()) acc += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  out.data()[0] = acc * inv;
  if (out.requires_grad()) {
    tape->record(out, [a = a, out = out, inv]() mutable {
      const T g = out.grad()[0] * inv;
      auto& ga = a.grad();
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout mask application
// ---------------------------------------------------------------------------

// Multiplies by a precomputed (constant) mask. Inverted-dropout scaling is
// baked into the mask values by the caller.
template <class T>
TensorT<T> dropout_mask_apply(TapeT<T>* tape, const TensorT<T>& a, const TensorT<T>& mask) {
  if (!a.same_shape(mask)) throw DimensionError("dropout-mask-apply: shape mismatch");
  if (mask.requires_grad()) {
    throw ContractError("dropout-mask-apply: mask must not require grad");
  }
  TensorT<T> out = detail::make_out(tape, a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * mask.data()[i];
  if (out.requires_grad()) {
    tape->record(out, [a = a, mask = mask, out = out]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask.data()[i];
    });
  }
  return out;
}

// Builds an inverted-dropout mask: entries are 0 with probability p, else
// 1/(1-p).
template <class T>
TensorT<T> make_dropout_mask(const std::vector<std::size_t>& shape, double p, Rng& rng) {
  TensorT<T> mask = TensorT<T>::zeros(shape);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (auto& v : mask.data()) v = rng.bernoulli(p) ? T(0) : keep_scale;
  return mask;
}

// ---------------------------------------------------------------------------
// Cross-entropy with logits
// ---------------------------------------------------------------------------

// Mean over rows of (logsumexp(row) - row[target]); stable under large
// logits via max-subtraction.
template <class T>
TensorT<T> cross_entropy_with_logits(TapeT<T>* tape, const TensorT<T>& logits,
                                     const std::vector<std::size_t>& targets) {
  const std::size_t rows = logits.rows_as_matrix();
  const std::size_t cols = logits.cols_as_matrix();
  if (targets.size() != rows) {
    throw DimensionError("cross-entropy-with-logits: one target per row required");
  }
  for (std::size_t t : targets) {
    if (t >= cols) throw ContractError("cross-entropy-with-logits: target out of range");
  }
  if (!detail::all_finite(logits)) {
    throw NumericDomainError("cross-entropy-with-logits: non-finite input");
  }
  TensorT<T> out = detail::make_out(tape, {1}, logits.requires_grad());
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = logits.data().data() + r * cols;
    T mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    T lse = T(0);
    for (std::size_t j = 0; j < cols; ++j) lse += std::exp(x[j] - mx);
    lse = mx + std::log(lse);
    total += lse - x[targets[r]];
  }
  out.data()[0] = total / static_cast<T>(rows);
  if (out.requires_grad()) {
    tape->record(out, [logits = logits, out = out, targets = targets, rows, cols]() mutable {
      const T g = out.grad()[0] / static_cast<T>(rows);
      auto& gl = logits.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* x = logits.data().data() + r * cols;
        T mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) {
          T p = std::exp(x[j] - mx) / sum;
          gl[r * cols + j] += g * (p - (j == targets[r] ? T(1) : T(0)));
        }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> cross_entropy_with_logits(TapeT<T>* tape, const TensorT<T>& logits,
                                     std::size_t target) {
  return cross_entropy_with_logits(tape, logits, std::vector<std::size_t>{target});
}

// ---------------------------------------------------------------------------
// Generic dispatcher keyed by operation id
// ---------------------------------------------------------------------------

using AttrValue = std::variant<double, long long, bool, std::vector<long long>>;
using AttrMap = std::map<std::string, AttrValue>;

namespace detail {
inline long long attr_int(const AttrMap& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw ContractError("op_forward: missing attribute " + key);
  return std::get<long long>(it->second);
}
inline double attr_real(const AttrMap& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw ContractError("op_forward: missing attribute " + key);
  if (std::holds_alternative<long long>(it->second)) {
    return static_cast<double>(std::get<long long>(it->second));
  }
  return std::get<double>(it->second);
}
inline std::vector<std::size_t> attr_index_list(const AttrMap& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw ContractError("op_forward: missing attribute " + key);
  std::vector<std::size_t> out;
  for (long long v : std::get<std::vector<long long>>(it->second)) {
    if (v < 0) throw ContractError("op_forward: negative index in " + key);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}
inline bool attr_flag(const AttrMap& attrs, const std::string& key, bool fallback) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return fallback;
  return std::get<bool>(it->second);
}
}  // namespace detail

template <class T>
TensorT<T> op_forward(TapeT<T>* tape, const std::string& name,
                      const std::vector<TensorT<T>>& inputs, const AttrMap& attrs = {}) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ContractError("op_forward(" + name + "): expected " + std::to_string(n) + " inputs");
    }
  };
  if (name == "add") {
    need(2);
    return add(tape, inputs[0], inputs[1]);
  }
  if (name == "sub") {
    need(2);
    return sub(tape, inputs[0], inputs[1]);
  }
  if (name == "elementwise-mul") {
    need(2);
    return mul(tape, inputs[0], inputs[1]);
  }
  if (name == "scalar-mul") {
    need(1);
    return scalar_mul(tape, inputs[0], static_cast<T>(detail::attr_real(attrs, "scalar")));
  }
  if (name == "matmul") {
    need(2);
    return matmul(tape, inputs[0], inputs[1], detail::attr_flag(attrs, "transpose_b", false));
  }
  if (name == "concat") {
    if (inputs.size() < 2) throw ContractError("op_forward(concat): needs >= 2 inputs");
    return concat(tape, inputs,
                  static_cast<std::size_t>(detail::attr_int(attrs, "axis")));
  }
  if (name == "relu") {
    need(1);
    return relu(tape, inputs[0]);
  }
  if (name == "exp") {
    need(1);
    return exp(tape, inputs[0]);
  }
  if (name == "log") {
    need(1);
    return log(tape, inputs[0]);
  }
  if (name == "softmax-with-temperature") {
    need(1);
    return softmax_t(tape, inputs[0], static_cast<T>(detail::attr_real(attrs, "tau")));
  }
  if (name == "embedding-lookup") {
    need(1);
    return embedding_lookup(tape, inputs[0], detail::attr_index_list(attrs, "indices"));
  }
  if (name == "row-select") {
    need(1);
    if (attrs.count("indices")) {
      return row_select(tape, inputs[0], detail::attr_index_list(attrs, "indices"));
    }
    return row_select(tape, inputs[0],
                      static_cast<std::size_t>(detail::attr_int(attrs, "index")));
  }
  if (name == "sum") {
    need(1);
    return sum(tape, inputs[0]);
  }
  if (name == "mean") {
    need(1);
    return mean(tape, inputs[0]);
  }
  if (name == "dropout-mask-apply") {
    need(2);
    return dropout_mask_apply(tape, inputs[0], inputs[1]);
  }
  if (name == "cross-entropy-with-logits") {
    need(1);
    return cross_entropy_with_logits(tape, inputs[0], detail::attr_index_list(attrs, "targets"));
  }
  throw ContractError("op_forward: unknown operation id '" + name + "'");
}

// Plain (non-recorded) softmax over a raw vector; shared by samplers and
// closed-form oracles.
template <class T>
std::vector<T> softmax_values(const std::vector<T>& x, T tau) {
  std::vector<T> z(x.size());
  T mx = x[0];
  for (T v : x) mx = std::max(mx, v);
  T sum = T(0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    z[j] = std::exp((x[j] - mx) / tau);
    sum += z[j];
  }
  for (auto& v : z) v /= sum;
  return z;
}

template <class T>
std::size_t argmax_index(const T* x, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (x[j] > x[best]) best = j;  // ties keep the lowest index
  }
  return best;
}

}  // namespace scg
