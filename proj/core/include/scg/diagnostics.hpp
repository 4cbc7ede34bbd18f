#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "scg/rng.hpp"
#include "scg/tensor.hpp"

namespace scg {

// Running mean of absolute gradient entries observed at one named site.
class GradProbe {
 public:
  GradProbe() = default;
  explicit GradProbe(std::string site) : site_(std::move(site)) {}

  void observe(const std::vector<double>& grad_entries) {
    for (double g : grad_entries) abs_sum_ += g < 0 ? -g : g;
    count_ += grad_entries.size();
  }

  void observe(const Tensor& t) {
    if (t.grad_allocated()) observe(t.grad());
  }

  double mean_abs() const { return count_ == 0 ? 0.0 : abs_sum_ / static_cast<double>(count_); }
  std::size_t count() const { return count_; }
  const std::string& site() const { return site_; }

  void reset() {
    abs_sum_ = 0.0;
    count_ = 0;
  }

 private:
  std::string site_;
  double abs_sum_ = 0.0;
  std::size_t count_ = 0;
};

// Probe registry keyed by site id; iteration order is the insertion order.
class ProbeSet {
 public:
  GradProbe& at(const std::string& site);
  const std::vector<std::string>& sites() const { return order_; }
  bool has(const std::string& site) const { return probes_.count(site) > 0; }
  void reset_all();

 private:
  std::map<std::string, GradProbe> probes_;
  std::vector<std::string> order_;
};

// Append-only CSV stream: one header row, then one row per logging event,
// floats at 9 significant digits, LF line endings.
class MetricWriter {
 public:
  MetricWriter(const std::string& path, std::vector<std::string> columns);
  ~MetricWriter();
  MetricWriter(const MetricWriter&) = delete;
  MetricWriter& operator=(const MetricWriter&) = delete;

  void row(const std::vector<double>& values);
  void flush();
  const std::string& path() const { return path_; }

  static std::string format_value(double v);

 private:
  std::string path_;
  std::size_t n_columns_;
  std::string buffer_;
  void* file_;  // FILE*
};

// Two-parameter saturation study: the model Softmax(theta + eps) with
// eps ~ Gumbel(0, beta) is trained by SGD against the constant target
// (1, 0) under cross-entropy, logging parameters, gradients, the sampled
// output z and the noise-free probabilities at every step.
struct ToySaturationConfig {
  double beta = 1.0;
  int steps = 5000;
  double lr = 0.01;
  double tau = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> theta_init = {-0.9442, 0.3893};
};

struct ToySaturationResult {
  double beta = 0.0;
  long saturation_onset = -1;   // first step with z_1 > 0.999, -1 if never
  double mean_abs_grad_tail = 0.0;  // mean |dL/dtheta| over the final 500 steps
  std::vector<double> theta_final;
};

// Runs one (beta, seed) cell; when `csv_path` is nonempty the per-step rows
// are streamed there with columns step,theta_1,theta_2,grad_abs_1,
// grad_abs_2,z_1,z_2,p_1,p_2.
ToySaturationResult toy_saturation_run(const ToySaturationConfig& cfg,
                                       const std::string& csv_path = "");

// Per-cell summary of a Gumbel-softmax sample cloud on the 2-simplex.
struct SimplexCellStats {
  double tau = 0.0;
  double beta = 0.0;
  double mean_max_entry = 0.0;
  std::vector<double> argmax_freq;
};

// Draws n Gumbel-softmax samples for every (tau, beta) cell; sample files
// named samples_tau<tau>_beta<beta>.csv land in out_dir when nonempty.
std::vector<SimplexCellStats> simplex_density_sweep(const std::vector<double>& theta,
                                                    const std::vector<double>& taus,
                                                    const std::vector<double>& betas,
                                                    std::size_t n, Rng& rng,
                                                    const std::string& out_dir = "");

}  // namespace scg
