#include <cmath>

#include <doctest.h>

#include "scg/schedule.hpp"

using namespace scg;

TEST_CASE("temp match beta closed form") {
  CHECK(temp_match_beta(0, 1.0, 0.008) == 0.0);
  CHECK(temp_match_beta(100, 1.0, 0.008) == doctest::Approx(1.0 - std::exp(-0.8)).epsilon(1e-12));
  CHECK(temp_match_beta(100, 1.0, 0.008) == doctest::Approx(0.55067).epsilon(1e-4));
  // t*gamma >= 14 puts beta within 1e-6 of tau
  CHECK(std::abs(temp_match_beta(1750, 1.0, 0.008) - 1.0) < 1e-6);
  CHECK(std::abs(temp_match_beta(14000, 4.0, 0.001) - 4.0) < 1e-5);
}

TEST_CASE("temp match beta stays strictly below tau and is nondecreasing") {
  double prev = -1.0;
  for (long t = 0; t <= 100000; t += 97) {
    const double b = temp_match_beta(t, 2.0, 0.008);
    CHECK(b >= prev);
    CHECK(b < 2.0);
    prev = b;
  }
}

TEST_CASE("dropres alpha ramp") {
  CHECK(dropres_alpha(0, 0.002) == 0.0);
  CHECK(dropres_alpha(250, 0.002) == doctest::Approx(0.5));
  CHECK(dropres_alpha(500, 0.002) == 1.0);
  CHECK(dropres_alpha(5000, 0.002) == 1.0);
  double prev = -1.0;
  for (long t = 0; t < 2000; t += 13) {
    const double a = dropres_alpha(t, 0.002);
    CHECK(a >= prev);
    CHECK(a <= 1.0);
    prev = a;
  }
}

TEST_CASE("tau anneal closed form") {
  CHECK(tau_anneal(0, 8.0, 0.008, 1.0) == 8.0);
  CHECK(tau_anneal(100, 8.0, 0.008, 1.0) == doctest::Approx(8.0 * std::exp(-0.8)).epsilon(1e-12));
  CHECK(tau_anneal(100, 8.0, 0.008, 1.0) == doctest::Approx(3.5946).epsilon(1e-4));
  CHECK(tau_anneal(1000000, 8.0, 0.008, 1.0) == 1.0);
  double prev = 9.0;
  for (long t = 0; t < 3000; t += 11) {
    const double v = tau_anneal(t, 8.0, 0.008, 1.0);
    CHECK(v <= prev);
    CHECK(v >= 1.0);
    prev = v;
  }
}

TEST_CASE("schedule tick advances on cadence crossings") {
  ScheduleState st;
  st.mode = ScheduleMode::TempMatch;
  st.tau = 1.0;
  st.gamma = 0.008;
  st.updates_per_epoch = 10;
  st.dropres = true;
  st.alpha_ramp = true;
  st.alpha_rate = 0.002;

  auto v0 = st.tick(0.0);
  CHECK(st.t == 0);
  CHECK(v0.beta == 0.0);
  CHECK(v0.alpha == 0.0);
  CHECK(v0.tau == 1.0);

  st.tick(0.05);  // before the first crossing
  CHECK(st.t == 0);
  st.tick(0.1);
  CHECK(st.t == 1);
  st.tick(0.95);
  CHECK(st.t == 9);

  // 10 updates/epoch over 100 epochs -> final t = 1000.
  st.tick(100.0);
  CHECK(st.t == 1000);
}

TEST_CASE("constant mode emits fixed values at every tick") {
  ScheduleState st;
  st.mode = ScheduleMode::Constant;
  st.tau = 8.0;
  st.beta_const = 1.0;
  st.dropres = true;
  st.alpha_ramp = false;
  st.alpha_const = 0.25;
  for (double f : {0.0, 0.4, 1.7, 30.0}) {
    auto v = st.tick(f);
    CHECK(v.beta == 1.0);
    CHECK(v.alpha == 0.25);
    CHECK(v.tau == 8.0);
  }
}

TEST_CASE("disabled dropres pins alpha to one") {
  ScheduleState st;
  st.mode = ScheduleMode::TempMatch;
  st.dropres = false;
  st.tick(50.0);
  CHECK(st.current().alpha == 1.0);
}

TEST_CASE("tau anneal mode emits floor-clamped taus and constant beta") {
  ScheduleState st;
  st.mode = ScheduleMode::TauAnneal;
  st.tau = 8.0;
  st.gamma = 0.008;
  st.tau_floor = 1.0;
  st.beta_const = 1.0;
  st.updates_per_epoch = 8;
  auto v = st.tick(0.0);
  CHECK(v.tau == 8.0);
  CHECK(v.beta == 1.0);
  st.tick(1000.0);
  CHECK(st.current().tau == 1.0);
}
