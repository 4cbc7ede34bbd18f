#include <array>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "finite_diff.hpp"
#include "scg/gumbel.hpp"
#include "scg/ops.hpp"
#include "scg/rng.hpp"
#include "scg/tape.hpp"

using namespace scg;

namespace {
constexpr double kEulerMascheroni = 0.5772156649015329;

// Upper-tail chi-square critical values at significance 0.001.
constexpr std::array<double, 9> kChi2Crit001 = {10.828, 13.816, 16.266, 18.467, 20.515,
                                                22.458, 24.322, 26.125, 27.877};

double chi2_statistic(const std::vector<std::size_t>& counts, const std::vector<double>& probs,
                      std::size_t n) {
  double stat = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double expected = probs[j] * static_cast<double>(n);
    const double d = static_cast<double>(counts[j]) - expected;
    stat += d * d / expected;
  }
  return stat;
}
}  // namespace

TEST_CASE("zero scale gives exact zero noise") {
  Rng rng(1);
  Tensor eps = sample_gumbel<double>({4, 3}, {0.0, 0.0}, rng);
  for (double v : eps.data()) CHECK(v == 0.0);
}

TEST_CASE("gumbel sample mean approaches beta times Euler-Mascheroni") {
  Rng rng(2024);
  const std::size_t n = 1000000;
  for (auto [beta, tol] : {std::pair{1.0, 0.005}, std::pair{2.0, 0.01}}) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += rng.gumbel(beta);
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - beta * kEulerMascheroni) < tol);
  }
}

TEST_CASE("gumbel max at zero scale is the argmax of the logits") {
  Rng rng(3);
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  for (int i = 0; i < 50; ++i) CHECK(gumbel_max_sample(theta, {0.0, 0.0}, rng) == 0);
}

TEST_CASE("gumbel max frequencies follow softmax(theta/beta)") {
  Rng rng(17);
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  const std::size_t n = 100000;

  SUBCASE("beta = 1 reproduces softmax(theta)") {
    // Closed-form oracle: softmax((2, 0.5, 1)) = (0.6285, 0.1402, 0.2312).
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i = 0; i < n; ++i) counts[gumbel_max_sample(theta, {0.0, 1.0}, rng)]++;
    const std::vector<double> expected = {0.6285, 0.1402, 0.2312};
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(static_cast<double>(counts[j]) / n - expected[j]) < 0.01);
    }
  }

  SUBCASE("large beta is uniform over categories") {
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i = 0; i < n; ++i) counts[gumbel_max_sample(theta, {0.0, 100.0}, rng)]++;
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(static_cast<double>(counts[j]) / n - 1.0 / 3.0) < 0.01);
    }
  }
}

TEST_CASE("empirical gumbel-max distribution passes chi-square against the implied one") {
  Rng rng(99);
  const std::size_t n = 100000;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(9);
    std::vector<double> th(k);
    for (auto& v : th) v = rng.gaussian() * 1.5;
    const double beta = 0.3 + 3.0 * rng.uniform();
    Tensor theta = Tensor::from_vector(th);
    Tensor probs = implied_distribution(theta, beta);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) counts[gumbel_max_sample(theta, {0.0, beta}, rng)]++;
    const double stat = chi2_statistic(counts, probs.data(), n);
    CHECK(stat < kChi2Crit001[k - 2]);
  }
}

TEST_CASE("gumbel softmax at zero noise equals the tempered softmax bit for bit") {
  Rng rng(5);
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  for (double tau : {0.3, 1.0, 4.0}) {
    RelaxedSample s = gumbel_softmax<double>(nullptr, theta, {0.0, 0.0}, tau, rng);
    Tensor direct = softmax_t<double>(nullptr, theta, tau);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.z.data()[j] == direct.data()[j]);
  }
}

TEST_CASE("relaxed samples live on the simplex") {
  Rng rng(6);
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  for (int i = 0; i < 200; ++i) {
    RelaxedSample s = gumbel_softmax<double>(nullptr, theta, {0.0, 1.0}, 0.5, rng);
    double total = 0.0;
    for (double v : s.z.data()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("low tau with matched beta gives near-discrete samples distributed as softmax(theta/beta)") {
  Rng rng(7);
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  const double tau = 0.1, beta = 0.1;
  const std::size_t n = 10000;
  std::size_t saturated = 0;
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    RelaxedSample s = gumbel_softmax<double>(nullptr, theta, {0.0, beta}, tau, rng);
    const std::size_t best = argmax_index(s.z.data().data(), 3);
    counts[best]++;
    if (s.z.data()[best] > 0.99) ++saturated;
  }
  CHECK(static_cast<double>(saturated) / n > 0.95);
  Tensor probs = implied_distribution(theta, beta);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(static_cast<double>(counts[j]) / n - probs.data()[j]) < 0.02);
  }
}

TEST_CASE("softmax jacobian closed form") {
  RelaxedSample s = one_hot_sample<double>(0, 2);
  s.z = Tensor::from_vector({0.5, 0.5});
  s.hard = false;
  Tensor jac = softmax_jacobian(s, 1.0);
  CHECK(jac.at(0, 0) == doctest::Approx(0.25));
  CHECK(jac.at(0, 1) == doctest::Approx(-0.25));
  CHECK(jac.at(1, 0) == doctest::Approx(-0.25));
  CHECK(jac.at(1, 1) == doctest::Approx(0.25));
}

TEST_CASE("softmax jacobian vanishes at one-hot vertices") {
  RelaxedSample s = one_hot_sample<double>(1, 4);
  Tensor jac = softmax_jacobian(s, 0.5);
  for (double v : jac.data()) CHECK(v == 0.0);
}

TEST_CASE("softmax jacobian matches finite differences of gumbel_softmax at fixed noise") {
  Rng rng(20);
  const std::size_t k = 4;
  std::vector<double> th(k);
  for (auto& v : th) v = rng.gaussian();
  Tensor theta = Tensor::from_vector(th, true);
  Tensor eps = sample_gumbel<double>({k}, {0.0, 1.0}, rng);
  const double tau = 0.8;

  RelaxedSample s = gumbel_softmax_fixed<double>(nullptr, theta, eps, tau);
  Tensor jac = softmax_jacobian(s, tau);

  const double h = 1e-6;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> plus = th, minus = th;
    plus[j] += h;
    minus[j] -= h;
    Tensor zp = softmax_t<double>(nullptr, add<double>(nullptr, Tensor::from_vector(plus), eps), tau);
    Tensor zm =
        softmax_t<double>(nullptr, add<double>(nullptr, Tensor::from_vector(minus), eps), tau);
    for (std::size_t i = 0; i < k; ++i) {
      const double fd = (zp.data()[i] - zm.data()[i]) / (2 * h);
      const double an = jac.at(i, j);
      CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-3}));
    }
  }
}

TEST_CASE("gradient bound endpoints and jacobian norm inequality") {
  CHECK(grad_norm_bound(0.0, 1.0) == 0.0);
  CHECK(grad_norm_bound(1.0, 1.0) == doctest::Approx(std::sqrt(2.0)));

  Rng rng(31);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(7);
    // Random simplex point via normalized exponentials.
    std::vector<double> z(k);
    double total = 0.0;
    for (auto& v : z) {
      v = -std::log(rng.uniform_open());
      total += v;
    }
    for (auto& v : z) v /= total;
    const double tau = 0.25 * std::pow(2.0, static_cast<double>(rng.uniform_index(6)));
    RelaxedSample s;
    s.z = Tensor::from_vector(z);
    Tensor jac = softmax_jacobian(s, tau);
    for (std::size_t j = 0; j < k; ++j) {
      double norm2 = 0.0;
      for (std::size_t i = 0; i < k; ++i) norm2 += jac.at(i, j) * jac.at(i, j);
      CHECK(std::sqrt(norm2) <= grad_norm_bound(z[j], tau) + 1e-15);
    }
  }
}

TEST_CASE("measured backward gradients obey the sub-multiplicative chain bound") {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 3 + rng.uniform_index(5);
    std::vector<double> th(k), w(k);
    for (auto& v : th) v = rng.gaussian();
    for (auto& v : w) v = rng.gaussian();
    Tensor theta = Tensor::from_vector(th, true);
    Tensor eps = sample_gumbel<double>({k}, {0.0, 1.0}, rng);
    const double tau = 0.5 + rng.uniform() * 3.0;

    Tape tape;
    RelaxedSample s = gumbel_softmax_fixed(&tape, theta, eps, tau);
    s.z.set_requires_grad(true);  // ensure grad is captured at z as well
    Tensor loss = sum(&tape, mul(&tape, s.z, Tensor::from_vector(w)));
    theta.zero_grad();
    tape.backward(loss);

    double dLdz_norm = 0.0;
    for (double v : s.z.grad()) dLdz_norm += v * v;
    dLdz_norm = std::sqrt(dLdz_norm);
    for (std::size_t j = 0; j < k; ++j) {
      const double bound = std::sqrt(2.0) / tau * dLdz_norm * s.z.data()[j];
      CHECK(std::abs(theta.grad()[j]) <= bound + 1e-12);
    }
  }
}

TEST_CASE("backward through gumbel softmax equals jacobian-vector product") {
  Rng rng(53);
  const std::size_t k = 5;
  std::vector<double> th(k), up(k);
  for (auto& v : th) v = rng.gaussian();
  for (auto& v : up) v = rng.gaussian();
  Tensor theta = Tensor::from_vector(th, true);
  Tensor eps = sample_gumbel<double>({k}, {0.0, 2.0}, rng);
  const double tau = 1.3;

  Tape tape;
  RelaxedSample s = gumbel_softmax_fixed(&tape, theta, eps, tau);
  Tensor loss = sum(&tape, mul(&tape, s.z, Tensor::from_vector(up)));
  theta.zero_grad();
  tape.backward(loss);

  Tensor jac = softmax_jacobian(s, tau);
  for (std::size_t j = 0; j < k; ++j) {
    double expect = 0.0;
    for (std::size_t i = 0; i < k; ++i) expect += up[i] * jac.at(i, j);
    CHECK(std::abs(theta.grad()[j] - expect) < 1e-9);
  }
}

TEST_CASE("implied distribution closed form and limits") {
  Tensor theta = Tensor::from_vector({2.0, 0.5, 1.0});
  Tensor p = implied_distribution(theta, 1.0);
  CHECK(p.data()[0] == doctest::Approx(0.6285).epsilon(1e-3));
  CHECK(p.data()[1] == doctest::Approx(0.1402).epsilon(1e-3));
  CHECK(p.data()[2] == doctest::Approx(0.2312).epsilon(1e-3));

  Tensor wide = implied_distribution(theta, 1e9);
  for (double v : wide.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  Tensor uniform_theta = Tensor::from_vector({0.7, 0.7, 0.7, 0.7});
  for (double beta : {0.1, 1.0, 10.0}) {
    Tensor q = implied_distribution(uniform_theta, beta);
    for (double v : q.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }

  Tensor hard = implied_distribution(theta, 0.0);
  CHECK(hard.data() == std::vector<double>{1.0, 0.0, 0.0});
}
