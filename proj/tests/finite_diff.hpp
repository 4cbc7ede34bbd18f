#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code
// only and never touches the reverse-mode path it verifies.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "scg/tape.hpp"
#include "scg/tensor.hpp"

namespace scg::testing {

// `build_loss(tape)` assembles the scalar loss; with a null tape nothing is
// recorded, which is how the finite-difference evaluations run. The builder
// must be deterministic: pre-sample any noise and capture it.
template <class T>
using LossBuilder = std::function<TensorT<T>(TapeT<T>*)>;

template <class T>
double eval_loss(const LossBuilder<T>& build_loss) {
  return static_cast<double>(build_loss(nullptr).value());
}

template <class T>
void check_gradients(const LossBuilder<T>& build_loss, const std::vector<TensorT<T>>& params,
                     double h = 1e-3, double rel_tol = 1e-4, double abs_floor = 1e-6) {
  for (auto p : params) p.zero_grad();
  TapeT<T> tape;
  TensorT<T> loss = build_loss(&tape);
  tape.backward(loss);

  for (auto param : params) {
    REQUIRE(param.requires_grad());
    const std::vector<T> ad_grad = param.grad();
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const T saved = param.data()[i];
      param.data()[i] = saved + static_cast<T>(h);
      const double f_plus = eval_loss(build_loss);
      param.data()[i] = saved - static_cast<T>(h);
      const double f_minus = eval_loss(build_loss);
      param.data()[i] = saved;
      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double ad = static_cast<double>(ad_grad[i]);
      const double denom = std::max({std::abs(ad), std::abs(fd), abs_floor / rel_tol});
      INFO("entry ", i, ": ad=", ad, " fd=", fd);
      CHECK(std::abs(ad - fd) <= rel_tol * denom);
    }
  }
}

}  // namespace scg::testing
