#pragma once

#include <cmath>

#include "scg/rng.hpp"
#include "scg/tensor.hpp"

namespace scg {

// Glorot-uniform (in x out) weight matrix.
inline Tensor glorot_uniform(std::size_t in, std::size_t out, Rng& rng) {
  Tensor w = Tensor::zeros({in, out}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return w;
}

// Gaussian embedding table scaled by 1/sqrt(dim).
inline Tensor gaussian_embeddings(std::size_t rows, std::size_t dim, Rng& rng,
                                  double scale = 0.0) {
  Tensor e = Tensor::zeros({rows, dim}, true);
  const double s = scale > 0.0 ? scale : 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : e.data()) v = rng.gaussian() * s;
  return e;
}

inline Tensor zero_bias(std::size_t dim) { return Tensor::zeros({dim}, true); }

}  // namespace scg
