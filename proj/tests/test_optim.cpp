#include <cmath>

#include <doctest.h>

#include "scg/optim.hpp"
#include "scg/tensor.hpp"

using namespace scg;

TEST_CASE("sgd update rule") {
  Tensor p = Tensor::scalar(1.0, true);
  p.grad()[0] = 2.0;
  Optimizer opt(OptKind::SGD, 0.1);
  opt.add_params({p});
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("adam first step moves by about lr for unit gradient") {
  // Hand computation: m=0.1, v=0.001, mhat=1, vhat=1, delta = lr/(1+eps).
  Tensor p = Tensor::scalar(5.0, true);
  p.grad()[0] = 1.0;
  Optimizer opt(OptKind::Adam, 0.001);
  opt.add_params({p});
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(5.0 - 0.001).epsilon(1e-6));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::scalar(3.5, true);
  p.zero_grad();
  Optimizer sgd(OptKind::SGD, 0.5);
  sgd.add_params({p});
  sgd.step();
  CHECK(p.data()[0] == 3.5);

  Tensor q = Tensor::scalar(3.5, true);
  q.zero_grad();
  Optimizer adam(OptKind::Adam, 0.5);
  adam.add_params({q});
  adam.step();
  CHECK(q.data()[0] == 3.5);
}

TEST_CASE("missing gradient is a contract error") {
  Tensor p = Tensor::scalar(1.0, true);
  Optimizer opt(OptKind::SGD, 0.1);
  opt.add_params({p});
  CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("parameters without requires_grad are never touched") {
  Tensor frozen = Tensor::scalar(7.0, false);
  Tensor live = Tensor::scalar(1.0, true);
  live.grad()[0] = 1.0;
  Optimizer opt(OptKind::SGD, 0.5);
  opt.add_params({frozen, live});
  opt.step();
  CHECK(frozen.data()[0] == 7.0);
  CHECK(live.data()[0] == doctest::Approx(0.5));
}

TEST_CASE("weight decay folds into the gradient") {
  Tensor p = Tensor::scalar(2.0, true);
  p.zero_grad();
  Optimizer opt(OptKind::SGD, 0.1);
  opt.add_group({p}, /*weight_decay=*/0.5);
  opt.step();
  // g = 0 + 0.5*2 = 1; p -= 0.1*1
  CHECK(p.data()[0] == doctest::Approx(1.9).epsilon(1e-15));
}
