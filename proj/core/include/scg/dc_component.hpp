#pragma once

#include <functional>
#include <vector>

#include "scg/errors.hpp"
#include "scg/gumbel.hpp"
#include "scg/ops.hpp"
#include "scg/rng.hpp"
#include "scg/tape.hpp"
#include "scg/tensor.hpp"

namespace scg {

// Execution mode of a discrete-continuous component. Training uses the
// relaxed sample; the two discrete test modes emit exact one-hot vertices
// (sampled via Gumbel-max or taken as the argmax of the logits). TestRelaxed
// keeps the noise-free softmax at test time and exists for the continuous
// chaining baselines.
enum class DcMode { TrainRelaxed, TestSample, TestArgmax, TestRelaxed };

// u -> theta = g(u) -> z ~ GumbelSoftmax(theta; beta, tau) -> v = h(z),
// with an optional residual connection around the stochastic bottleneck.
// g and h operate row-wise: a rank-2 u is treated as a batch of independent
// component applications sharing parameters.
template <class T>
struct DcComponentT {
  std::function<TensorT<T>(TapeT<T>*, const TensorT<T>&)> g;
  std::function<TensorT<T>(TapeT<T>*, const TensorT<T>&)> h;
  std::size_t k = 0;
  DcMode mode = DcMode::TrainRelaxed;
};

using DcComponent = DcComponentT<double>;

// Residual gate: the residual connection is dropped with probability alpha
// (one Bernoulli per row per forward pass). At test time the residual is
// always dropped regardless of alpha.
struct DropResGate {
  double alpha = 1.0;
};

template <class T>
struct DcResultT {
  TensorT<T> v;
  RelaxedSampleT<T> z;
  TensorT<T> theta;
  std::vector<bool> residual_fired;  // per row, train mode only
};

using DcResult = DcResultT<double>;

namespace detail {
template <class T>
TensorT<T> hard_rows(const TensorT<T>& theta, DcMode mode, double beta, Rng& rng) {
  const std::size_t rows = theta.rows_as_matrix();
  const std::size_t k = theta.cols_as_matrix();
  TensorT<T> z = TensorT<T>::zeros(theta.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = theta.data().data() + r * k;
    std::size_t idx;
    if (mode == DcMode::TestSample) {
      std::size_t best = 0;
      T best_v = T(0);
      for (std::size_t j = 0; j < k; ++j) {
        const T v = row[j] + static_cast<T>(rng.gumbel(beta));
        if (j == 0 || v > best_v) {
          best = j;
          best_v = v;
        }
      }
      idx = best;
    } else {
      idx = argmax_index(row, k);
    }
    z.data()[r * k + idx] = T(1);
  }
  return z;
}
}  // namespace detail

// Runs the component. In train mode the relaxed path is recorded on the
// tape and the residual u is added back on the rows whose gate kept it; in
// the test modes z is an exact vertex and the residual path never fires.
template <class T>
DcResultT<T> dc_forward(TapeT<T>* tape, const DcComponentT<T>& comp, const TensorT<T>& u,
                        const DropResGate& gate, double beta, double tau, Rng& rng) {
  DcResultT<T> out;
  if (comp.mode == DcMode::TrainRelaxed) {
    out.theta = comp.g(tape, u);
    if (out.theta.cols_as_matrix() != comp.k) {
      throw DimensionError("dc_forward: g(u) does not emit k logits");
    }
    GumbelNoiseSpec spec{0.0, beta};
    out.z = gumbel_softmax(tape, out.theta, spec, static_cast<T>(tau), rng);
    out.v = comp.h(tape, out.z.z);
    if (gate.alpha < 1.0) {
      if (!out.v.same_shape(u)) {
        throw ContractError("dc_forward: residual needs matching u and h(z) dimensions");
      }
      const std::size_t rows = u.rows_as_matrix();
      const std::size_t cols = u.cols_as_matrix();
      out.residual_fired.resize(rows);
      TensorT<T> mask = TensorT<T>::zeros(u.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const bool keep = rng.bernoulli(1.0 - gate.alpha);
        out.residual_fired[r] = keep;
        if (keep) {
          for (std::size_t c = 0; c < cols; ++c) mask.data()[r * cols + c] = T(1);
        }
      }
      out.v = add(tape, out.v, dropout_mask_apply(tape, u, mask));
    } else {
      out.residual_fired.assign(u.rows_as_matrix(), false);
    }
    return out;
  }

  // Test modes: no tape recording, pure discrete (or noise-free relaxed)
  // representations, residual always off.
  out.theta = comp.g(nullptr, u);
  if (out.theta.cols_as_matrix() != comp.k) {
    throw DimensionError("dc_forward: g(u) does not emit k logits");
  }
  if (comp.mode == DcMode::TestRelaxed) {
    out.z.z = softmax_t<T>(nullptr, out.theta, static_cast<T>(tau));
    out.z.hard = false;
  } else {
    out.z.z = detail::hard_rows(out.theta, comp.mode, beta, rng);
    out.z.hard = true;
  }
  out.v = comp.h(nullptr, out.z.z);
  return out;
}

// Monte-Carlo estimate of E[dv/du] over the gate's Bernoulli at fixed Gumbel
// noise; converges to (1-alpha)*I + (dv/dz)(dz/dtheta)(dtheta/du). Also
// reports the per-entry standard error of the estimate. u must be rank-1.
template <class T>
struct ExpectedGradientT {
  TensorT<T> mean;       // (dim(v) x dim(u))
  TensorT<T> std_error;  // same shape
  std::size_t n_samples = 0;
};

template <class T>
ExpectedGradientT<T> expected_residual_gradient(const DcComponentT<T>& comp, const TensorT<T>& u,
                                                const DropResGate& gate, double beta, double tau,
                                                std::size_t n_samples, Rng& rng) {
  if (n_samples < 1) throw ContractError("expected_residual_gradient: n_samples >= 1");
  if (u.rank() != 1) throw ContractError("expected_residual_gradient: u must be rank-1");

  // Freeze one noise draw; only the gate varies across samples.
  TensorT<T> theta_probe = comp.g(nullptr, u);
  GumbelNoiseSpec spec{0.0, beta};
  TensorT<T> eps = sample_gumbel<T>(theta_probe.shape(), spec, rng);
  const std::size_t n = u.numel();
  const std::size_t m =
      comp.h(nullptr, softmax_t<T>(nullptr, add<T>(nullptr, theta_probe, eps),
                                   static_cast<T>(tau)))
          .numel();

  std::vector<double> sum(m * n, 0.0), sumsq(m * n, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const bool keep = gate.alpha < 1.0 && rng.bernoulli(1.0 - gate.alpha);
    // One seeded replay per output coordinate yields a Jacobian row; the
    // graph is rebuilt each time so intermediate grads start from zero.
    for (std::size_t i = 0; i < m; ++i) {
      TensorT<T> uc = TensorT<T>::from_vector(u.data());
      uc.set_requires_grad(true);
      TapeT<T> tape;
      TensorT<T> theta = comp.g(&tape, uc);
      RelaxedSampleT<T> z = gumbel_softmax_fixed(&tape, theta, eps, static_cast<T>(tau));
      TensorT<T> v = comp.h(&tape, z.z);
      if (keep) {
        if (!v.same_shape(uc)) {
          throw ContractError("expected_residual_gradient: residual dimension mismatch");
        }
        v = add(&tape, v, uc);
      }
      v.grad()[i] = T(1);
      tape.replay();
      for (std::size_t j = 0; j < n; ++j) {
        const double gij = static_cast<double>(uc.grad()[j]);
        sum[i * n + j] += gij;
        sumsq[i * n + j] += gij * gij;
      }
    }
  }

  ExpectedGradientT<T> out;
  out.mean = TensorT<T>::zeros({m, n});
  out.std_error = TensorT<T>::zeros({m, n});
  out.n_samples = n_samples;
  const double inv = 1.0 / static_cast<double>(n_samples);
  for (std::size_t i = 0; i < m * n; ++i) {
    const double mu = sum[i] * inv;
    const double var = std::max(0.0, sumsq[i] * inv - mu * mu);
    out.mean.data()[i] = static_cast<T>(mu);
    out.std_error.data()[i] =
        static_cast<T>(std::sqrt(var / static_cast<double>(n_samples)));
  }
  return out;
}

}  // namespace scg
