#pragma once

#include <cmath>
#include <vector>

#include "scg/errors.hpp"
#include "scg/tensor.hpp"

namespace scg {

enum class OptKind { SGD, Adam };

// SGD/Adam over parameter groups. Weight decay is plain L2 folded into the
// gradient before the update. Tensors with requires_grad = false are never
// touched.
template <class T>
class OptimizerT {
 public:
  OptimizerT(OptKind kind, T lr) : kind_(kind), lr_(lr) {
    if (!(lr > T(0))) throw ContractError("optimizer: learning rate must be positive");
  }

  void add_group(std::vector<TensorT<T>> params, T weight_decay = T(0)) {
    groups_.push_back({std::move(params), weight_decay, {}});
  }

  void add_params(std::vector<TensorT<T>> params) { add_group(std::move(params)); }

  void zero_grad() {
    for (auto& g : groups_) {
      for (auto& p : g.params) {
        if (p.requires_grad()) p.zero_grad();
      }
    }
  }

  void step() {
    ++step_count_;  // Adam bias correction counts from 1
    for (auto& g : groups_) {
      if (kind_ == OptKind::Adam && g.moments.empty()) {
        g.moments.resize(g.params.size());
        for (std::size_t i = 0; i < g.params.size(); ++i) {
          g.moments[i].m.assign(g.params[i].numel(), T(0));
          g.moments[i].v.assign(g.params[i].numel(), T(0));
        }
      }
      for (std::size_t i = 0; i < g.params.size(); ++i) {
        auto& p = g.params[i];
        if (!p.requires_grad()) continue;
        if (!p.grad_allocated()) {
          throw ContractError("optimizer_step: parameter gradient missing");
        }
        auto& data = p.data();
        const auto& grad = p.grad();
        if (kind_ == OptKind::SGD) {
          for (std::size_t j = 0; j < data.size(); ++j) {
            const T gj = grad[j] + g.weight_decay * data[j];
            data[j] -= lr_ * gj;
          }
        } else {
          auto& m = g.moments[i].m;
          auto& v = g.moments[i].v;
          const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(step_count_));
          const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(step_count_));
          for (std::size_t j = 0; j < data.size(); ++j) {
            const T gj = grad[j] + g.weight_decay * data[j];
            m[j] = beta1_ * m[j] + (T(1) - beta1_) * gj;
            v[j] = beta2_ * v[j] + (T(1) - beta2_) * gj * gj;
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
          }
        }
      }
    }
  }

  long step_count() const { return step_count_; }
  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }

 private:
  struct Moments {
    std::vector<T> m, v;
  };
  struct Group {
    std::vector<TensorT<T>> params;
    T weight_decay;
    std::vector<Moments> moments;
  };

  OptKind kind_;
  T lr_;
  T beta1_ = T(0.9);
  T beta2_ = T(0.999);
  T eps_ = T(1e-8);
  long step_count_ = 0;
  std::vector<Group> groups_;
};

using Optimizer = OptimizerT<double>;

}  // namespace scg
