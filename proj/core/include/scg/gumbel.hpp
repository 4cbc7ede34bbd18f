#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "scg/errors.hpp"
#include "scg/ops.hpp"
#include "scg/rng.hpp"
#include "scg/tape.hpp"
#include "scg/tensor.hpp"

namespace scg {

// Gumbel noise with location 0 and scale beta; beta = 0 means deterministic
// zero noise.
struct GumbelNoiseSpec {
  double location = 0.0;
  double scale = 1.0;
};

// Point on the (k-1)-simplex produced by the Gumbel-softmax, together with
// the noise draws that produced it. `hard` marks one-hot vertices.
template <class T>
struct RelaxedSampleT {
  TensorT<T> z;
  bool hard = false;
  TensorT<T> epsilon;
};

using RelaxedSample = RelaxedSampleT<double>;

namespace detail {
template <class T>
void check_logits(const TensorT<T>& theta) {
  if (theta.cols_as_matrix() < 2) throw ContractError("categorical logits need k >= 2");
  if (!all_finite(theta)) throw NumericDomainError("categorical logits must be finite");
}
}  // namespace detail

// iid Gumbel(0, beta) draws of the given shape; beta = 0 returns exact zeros.
template <class T>
TensorT<T> sample_gumbel(const std::vector<std::size_t>& shape, const GumbelNoiseSpec& spec,
                         Rng& rng) {
  if (spec.scale < 0.0) throw ContractError("sample_gumbel: scale must be nonnegative");
  TensorT<T> out = TensorT<T>::zeros(shape);
  if (spec.scale == 0.0 && spec.location == 0.0) return out;
  for (auto& v : out.data()) v = static_cast<T>(spec.location + rng.gumbel(spec.scale));
  return out;
}

// Gumbel-max: argmax_j(theta_j + eps_j), eps ~ Gumbel(0, beta). Ties break
// toward the lowest index.
template <class T>
std::size_t gumbel_max_sample(const TensorT<T>& theta, const GumbelNoiseSpec& spec, Rng& rng) {
  detail::check_logits(theta);
  const std::size_t k = theta.numel();
  std::size_t best = 0;
  T best_v = T(0);
  for (std::size_t j = 0; j < k; ++j) {
    const T v = theta.data()[j] + static_cast<T>(spec.location + rng.gumbel(spec.scale));
    if (j == 0 || v > best_v) {
      best = j;
      best_v = v;
    }
  }
  return best;
}

// Gumbel-softmax relaxation at temperature tau with noise scale beta; the
// result is differentiable with respect to theta and recorded on the tape.
// Works row-wise when theta is rank-2.
template <class T>
RelaxedSampleT<T> gumbel_softmax(TapeT<T>* tape, const TensorT<T>& theta,
                                 const GumbelNoiseSpec& spec, T tau, Rng& rng) {
  if (!(tau > T(0))) throw ContractError("gumbel_softmax: tau must be positive");
  detail::check_logits(theta);
  RelaxedSampleT<T> s;
  s.epsilon = sample_gumbel<T>(theta.shape(), spec, rng);
  s.z = softmax_t(tape, add(tape, theta, s.epsilon), tau);
  s.hard = false;
  return s;
}

// Same relaxation with caller-provided (fixed) noise; used by gradient
// checks and the residual-gradient diagnostics.
template <class T>
RelaxedSampleT<T> gumbel_softmax_fixed(TapeT<T>* tape, const TensorT<T>& theta,
                                       const TensorT<T>& eps, T tau) {
  if (!(tau > T(0))) throw ContractError("gumbel_softmax: tau must be positive");
  detail::check_logits(theta);
  RelaxedSampleT<T> s;
  s.epsilon = eps;
  s.z = softmax_t(tape, add(tape, theta, eps), tau);
  s.hard = false;
  return s;
}

// One-hot vertex sample built from an index.
template <class T>
RelaxedSampleT<T> one_hot_sample(std::size_t index, std::size_t k) {
  RelaxedSampleT<T> s;
  s.z = TensorT<T>::zeros({k});
  s.z.data()[index] = T(1);
  s.hard = true;
  return s;
}

// Softmax Jacobian at a relaxed sample: (i,j) entry is z_i(1-z_i)/tau on the
// diagonal and -z_i z_j / tau off it.
template <class T>
TensorT<T> softmax_jacobian(const RelaxedSampleT<T>& sample, T tau) {
  if (!(tau > T(0))) throw ContractError("softmax_jacobian: tau must be positive");
  const auto& z = sample.z.data();
  const std::size_t k = z.size();
  TensorT<T> jac = TensorT<T>::zeros({k, k});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      jac.data()[i * k + j] = i == j ? z[i] * (T(1) - z[i]) / tau : -z[i] * z[j] / tau;
    }
  }
  return jac;
}

// Upper bound sqrt(2)/tau * z_j on the Frobenius norm of the Jacobian column
// for category j.
inline double grad_norm_bound(double z_j, double tau) {
  if (!(tau > 0.0)) throw ContractError("grad_norm_bound: tau must be positive");
  if (z_j < 0.0 || z_j > 1.0) throw ContractError("grad_norm_bound: z_j must lie in [0, 1]");
  return std::sqrt(2.0) / tau * z_j;
}

// Distribution implied by Gumbel-max sampling at scale beta: softmax(theta /
// beta). beta = 0 returns the one-hot argmax limit.
template <class T>
TensorT<T> implied_distribution(const TensorT<T>& theta, T beta) {
  detail::check_logits(theta);
  if (beta < T(0)) throw ContractError("implied_distribution: beta must be nonnegative");
  const std::size_t k = theta.numel();
  if (beta == T(0)) {
    TensorT<T> out = TensorT<T>::zeros({k});
    out.data()[argmax_index(theta.data().data(), k)] = T(1);
    return out;
  }
  return TensorT<T>::from_vector(softmax_values(theta.data(), beta));
}

}  // namespace scg
