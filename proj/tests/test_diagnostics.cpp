#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "scg/diagnostics.hpp"
#include "scg/gumbel.hpp"
#include "scg/rng.hpp"

using namespace scg;

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("probe means of simple observations") {
  GradProbe p("unit");
  p.observe(std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p.mean_abs() == 0.0);
  p.reset();
  p.observe(std::vector<double>{1.0, -1.0});
  p.observe(std::vector<double>{3.0, -3.0});
  CHECK(p.mean_abs() == doctest::Approx(2.0));
  CHECK(p.count() == 4);
}

TEST_CASE("probe means are invariant to batch partitioning") {
  Rng rng(5);
  std::vector<double> big(64);
  for (auto& v : big) v = rng.gaussian();

  GradProbe whole("whole");
  whole.observe(big);

  GradProbe halves("halves");
  halves.observe(std::vector<double>(big.begin(), big.begin() + 32));
  halves.observe(std::vector<double>(big.begin() + 32, big.end()));

  CHECK(std::abs(whole.mean_abs() - halves.mean_abs()) < 1e-12);
}

TEST_CASE("metric writer formats rows at 9 significant digits with LF endings") {
  auto dir = temp_dir("scg_diag_test");
  const std::string path = (dir / "metrics.csv").string();
  {
    MetricWriter w(path, {"step", "value"});
    w.row({1.0, 0.123456789123});
    w.row({2.0, 3e-10});
  }
  const std::string text = read_file(path);
  CHECK(text == "step,value\n1,0.123456789\n2,3e-10\n");
}

TEST_CASE("toy saturation starts from the documented parameters and is reproducible") {
  ToySaturationConfig cfg;
  cfg.beta = 1.0;
  cfg.steps = 40;
  cfg.seed = 9;
  auto dir = temp_dir("scg_toy_test");
  const std::string p1 = (dir / "a.csv").string();
  const std::string p2 = (dir / "b.csv").string();
  ToySaturationResult r1 = toy_saturation_run(cfg, p1);
  ToySaturationResult r2 = toy_saturation_run(cfg, p2);
  CHECK(read_file(p1) == read_file(p2));
  CHECK(r1.theta_final == r2.theta_final);

  // First CSV row must carry the initial parameters (-0.9442, 0.3893).
  std::ifstream in(p1);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(first.substr(0, 17) == std::string("0,-0.9442,0.3893,"));
}

TEST_CASE("beta=0 toy run converges monotonically toward the target") {
  ToySaturationConfig cfg;
  cfg.beta = 0.0;
  cfg.steps = 3000;
  cfg.seed = 0;
  ToySaturationResult r = toy_saturation_run(cfg);
  // p_1 approaches 1: theta_1 - theta_2 grows well past the start gap.
  CHECK(r.theta_final[0] - r.theta_final[1] > 3.0);
}

TEST_CASE("saturated small-beta runs keep smaller tail gradients than large-beta runs") {
  ToySaturationConfig small;
  small.beta = 0.5;
  small.steps = 5000;
  small.seed = 3;
  ToySaturationConfig large = small;
  large.beta = 4.0;
  ToySaturationResult rs = toy_saturation_run(small);
  ToySaturationResult rl = toy_saturation_run(large);
  CHECK(rl.mean_abs_grad_tail > rs.mean_abs_grad_tail);
}

TEST_CASE("simplex sweep: beta=0 cells are point masses") {
  Rng rng(1);
  auto cells = simplex_density_sweep({2.0, 0.5, 1.0}, {1.0}, {0.0}, 200, rng);
  REQUIRE(cells.size() == 1);
  // Every sample is softmax(theta); its argmax frequency is all on entry 0.
  CHECK(cells[0].argmax_freq[0] == 1.0);
  const auto z = softmax_values(std::vector<double>{2.0, 0.5, 1.0}, 1.0);
  CHECK(cells[0].mean_max_entry == doctest::Approx(z[0]).epsilon(1e-12));
}

TEST_CASE("simplex sweep: tau annealing drives samples toward vertices") {
  Rng rng(2);
  auto cells = simplex_density_sweep({2.0, 0.5, 1.0}, {4.0, 1.0, 0.1, 0.02}, {1.0}, 2000, rng);
  REQUIRE(cells.size() == 4);
  CHECK(cells[3].mean_max_entry > 0.99);
  CHECK(cells[0].mean_max_entry < cells[3].mean_max_entry);
}

TEST_CASE("simplex sweep: beta to tau makes argmax frequencies follow softmax(theta/beta)") {
  Rng rng(3);
  const std::vector<double> theta = {2.0, 0.5, 1.0};
  auto cells = simplex_density_sweep(theta, {1.0}, {1.0}, 50000, rng);
  Tensor probs = implied_distribution(Tensor::from_vector(theta), 1.0);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(cells[0].argmax_freq[j] - probs.data()[j]) < 0.01);
  }
}

TEST_CASE("simplex sweep writes one sample file per cell") {
  Rng rng(4);
  auto dir = temp_dir("scg_sweep_test");
  simplex_density_sweep({2.0, 0.5, 1.0}, {1.0, 2.0}, {0.5, 1.0}, 10, rng, dir.string());
  CHECK(std::filesystem::exists(dir / "samples_tau1_beta0.5.csv"));
  CHECK(std::filesystem::exists(dir / "samples_tau1_beta1.csv"));
  CHECK(std::filesystem::exists(dir / "samples_tau2_beta0.5.csv"));
  CHECK(std::filesystem::exists(dir / "samples_tau2_beta1.csv"));
}
