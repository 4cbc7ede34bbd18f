#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "scg/errors.hpp"

namespace scg {

namespace detail {
template <class T>
struct TensorStorage {
  std::vector<std::size_t> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until allocated; same length as data afterwards
  bool requires_grad = false;
};

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}
}  // namespace detail

// Dense rank-1/rank-2 tensor with an attached gradient slot. Handles share
// storage: copying a TensorT copies the handle, not the buffer, so the tape
// can hold cheap references to every node of the graph.
template <class T>
class TensorT {
 public:
  using Scalar = T;

  TensorT() : st_(std::make_shared<detail::TensorStorage<T>>()) {}

  static TensorT zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    TensorT t;
    t.st_->shape = std::move(shape);
    t.st_->data.assign(detail::shape_numel(t.st_->shape), T(0));
    t.st_->requires_grad = requires_grad;
    return t;
  }

  static TensorT full(std::vector<std::size_t> shape, T value, bool requires_grad = false) {
    TensorT t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.st_->data) x = value;
    return t;
  }

  static TensorT scalar(T value, bool requires_grad = false) {
    return from_vector({value}, requires_grad);
  }

  static TensorT from_vector(std::vector<T> values, bool requires_grad = false) {
    TensorT t;
    t.st_->shape = {values.size()};
    t.st_->data = std::move(values);
    t.st_->requires_grad = requires_grad;
    return t;
  }

  static TensorT from_vector(std::initializer_list<T> values, bool requires_grad = false) {
    return from_vector(std::vector<T>(values), requires_grad);
  }

  static TensorT from_matrix(std::size_t rows, std::size_t cols, std::vector<T> values,
                             bool requires_grad = false) {
    if (values.size() != rows * cols) {
      throw DimensionError("from_matrix: element count does not match rows*cols");
    }
    TensorT t;
    t.st_->shape = {rows, cols};
    t.st_->data = std::move(values);
    t.st_->requires_grad = requires_grad;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return st_->shape; }
  std::size_t rank() const { return st_->shape.size(); }
  std::size_t numel() const { return st_->data.size(); }
  bool defined() const { return !st_->shape.empty(); }

  std::size_t rows() const {
    if (rank() != 2) throw ContractError("rows(): tensor is not rank-2");
    return st_->shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw ContractError("cols(): tensor is not rank-2");
    return st_->shape[1];
  }
  // Row count when a rank-1 tensor is viewed as a single row.
  std::size_t rows_as_matrix() const { return rank() == 2 ? st_->shape[0] : 1; }
  std::size_t cols_as_matrix() const { return rank() == 2 ? st_->shape[1] : st_->shape[0]; }

  bool same_shape(const TensorT& o) const { return st_->shape == o.st_->shape; }
  bool is_scalar() const { return numel() == 1 && rank() == 1; }

  std::vector<T>& data() { return st_->data; }
  const std::vector<T>& data() const { return st_->data; }

  T value() const {
    if (!is_scalar()) throw ContractError("value(): tensor is not scalar");
    return st_->data[0];
  }

  T& at(std::size_t i) { return st_->data[i]; }
  T at(std::size_t i) const { return st_->data[i]; }
  T& at(std::size_t r, std::size_t c) { return st_->data[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return st_->data[r * cols() + c]; }

  bool requires_grad() const { return st_->requires_grad; }
  void set_requires_grad(bool v) { st_->requires_grad = v; }

  bool grad_allocated() const { return !st_->grad.empty(); }

  // Gradient buffer, allocated to zeros on first use.
  std::vector<T>& grad() {
    if (st_->grad.empty()) st_->grad.assign(st_->data.size(), T(0));
    return st_->grad;
  }
  const std::vector<T>& grad() const {
    if (st_->grad.empty()) {
      throw ContractError("grad(): gradient has not been populated");
    }
    return st_->grad;
  }

  void zero_grad() { grad().assign(st_->data.size(), T(0)); }

  // Stable identity of the underlying storage (probe keys, aliasing checks).
  const void* id() const { return static_cast<const void*>(st_.get()); }

 private:
  std::shared_ptr<detail::TensorStorage<T>> st_;
};

using Tensor = TensorT<double>;

}  // namespace scg
