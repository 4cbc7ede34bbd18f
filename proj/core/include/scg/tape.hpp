#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "scg/errors.hpp"
#include "scg/tensor.hpp"

namespace scg {

// Reverse-mode record of executed operations. Records are appended in
// execution order, so inputs of every record were produced earlier; one
// backward traversal walks the list once, in reverse.
template <class T>
class TapeT {
 public:
  using BackwardFn = std::function<void()>;

  void record(const TensorT<T>& output, BackwardFn fn) {
    records_.push_back({output, std::move(fn)});
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  void clear() { records_.clear(); }

  // Accumulates d(loss)/d(leaf) into every leaf tensor's grad slot. Grads of
  // recorded intermediates are reset before each traversal, so calling
  // backward twice without zero_grad doubles leaf gradients (documented
  // behavior). loss must be scalar and the tape nonempty.
  void backward(TensorT<T>& loss) {
    if (!loss.is_scalar()) throw ContractError("backward: loss is not scalar");
    if (records_.empty()) throw ContractError("backward: tape is empty");
    for (auto& r : records_) r.output.zero_grad();
    loss.grad()[0] += T(1);
    replay();
  }

  // Runs the recorded backward rules in reverse without seeding or clearing;
  // callers that need vector-valued cotangents set output grads beforehand.
  void replay() {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
  }

 private:
  struct Record {
    TensorT<T> output;
    BackwardFn fn;
  };
  std::vector<Record> records_;
};

using Tape = TapeT<double>;

}  // namespace scg
