#include "scg/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "scg/gumbel.hpp"
#include "scg/ops.hpp"
#include "scg/optim.hpp"
#include "scg/tape.hpp"

namespace scg {

GradProbe& ProbeSet::at(const std::string& site) {
  auto it = probes_.find(site);
  if (it == probes_.end()) {
    it = probes_.emplace(site, GradProbe(site)).first;
    order_.push_back(site);
  }
  return it->second;
}

void ProbeSet::reset_all() {
  for (auto& [_, probe] : probes_) probe.reset();
}

MetricWriter::MetricWriter(const std::string& path, std::vector<std::string> columns)
    : path_(path), n_columns_(columns.size()) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("MetricWriter: cannot open " + path);
  file_ = f;
  std::string header;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) header += ',';
    header += columns[i];
  }
  header += '\n';
  std::fwrite(header.data(), 1, header.size(), f);
}

MetricWriter::~MetricWriter() {
  if (file_) {
    std::fflush(static_cast<FILE*>(file_));
    std::fclose(static_cast<FILE*>(file_));
  }
}

std::string MetricWriter::format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void MetricWriter::row(const std::vector<double>& values) {
  if (values.size() != n_columns_) {
    throw std::runtime_error("MetricWriter: row width does not match header");
  }
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += format_value(values[i]);
  }
  line += '\n';
  std::fwrite(line.data(), 1, line.size(), static_cast<FILE*>(file_));
}

void MetricWriter::flush() { std::fflush(static_cast<FILE*>(file_)); }

ToySaturationResult toy_saturation_run(const ToySaturationConfig& cfg,
                                       const std::string& csv_path) {
  Rng rng(cfg.seed);
  Tensor theta = Tensor::from_vector(cfg.theta_init, /*requires_grad=*/true);
  Optimizer opt(OptKind::SGD, cfg.lr);
  opt.add_params({theta});

  std::unique_ptr<MetricWriter> writer;
  if (!csv_path.empty()) {
    writer = std::make_unique<MetricWriter>(
        csv_path, std::vector<std::string>{"step", "theta_1", "theta_2", "grad_abs_1",
                                           "grad_abs_2", "z_1", "z_2", "p_1", "p_2"});
  }

  ToySaturationResult res;
  res.beta = cfg.beta;
  double tail_sum = 0.0;
  std::size_t tail_count = 0;
  const int tail_start = cfg.steps - 500;

  for (int step = 0; step < cfg.steps; ++step) {
    Tape tape;
    GumbelNoiseSpec spec{0.0, cfg.beta};
    RelaxedSample s = gumbel_softmax(&tape, theta, spec, cfg.tau, rng);
    // Cross-entropy against the constant target (1, 0) = CE with class 0.
    Tensor loss = cross_entropy_with_logits(&tape, add(&tape, theta, s.epsilon),
                                            std::size_t{0});
    // The relaxed output itself (z) is what saturates; loss depends on the
    // same perturbed logits, so one backward serves both.
    opt.zero_grad();
    tape.backward(loss);

    const double g1 = std::abs(theta.grad()[0]);
    const double g2 = std::abs(theta.grad()[1]);
    const double z1 = s.z.data()[0];
    const double z2 = s.z.data()[1];
    const std::vector<double> p = softmax_values(theta.data(), 1.0);

    if (res.saturation_onset < 0 && z1 > 0.999) res.saturation_onset = step;
    if (step >= tail_start) {
      tail_sum += 0.5 * (g1 + g2);
      ++tail_count;
    }
    if (writer) {
      writer->row({static_cast<double>(step), theta.data()[0], theta.data()[1], g1, g2, z1, z2,
                   p[0], p[1]});
    }
    opt.step();
  }

  res.mean_abs_grad_tail = tail_count == 0 ? 0.0 : tail_sum / static_cast<double>(tail_count);
  res.theta_final = theta.data();
  return res;
}

std::vector<SimplexCellStats> simplex_density_sweep(const std::vector<double>& theta,
                                                    const std::vector<double>& taus,
                                                    const std::vector<double>& betas,
                                                    std::size_t n, Rng& rng,
                                                    const std::string& out_dir) {
  const std::size_t k = theta.size();
  Tensor logits = Tensor::from_vector(theta);
  std::vector<SimplexCellStats> cells;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  for (double tau : taus) {
    for (double beta : betas) {
      SimplexCellStats cell;
      cell.tau = tau;
      cell.beta = beta;
      cell.argmax_freq.assign(k, 0.0);

      std::unique_ptr<MetricWriter> writer;
      if (!out_dir.empty()) {
        char name[96];
        std::snprintf(name, sizeof(name), "samples_tau%g_beta%g.csv", tau, beta);
        std::vector<std::string> cols;
        for (std::size_t j = 0; j < k; ++j) cols.push_back("z_" + std::to_string(j + 1));
        writer = std::make_unique<MetricWriter>(out_dir + "/" + name, cols);
      }

      double max_sum = 0.0;
      GumbelNoiseSpec spec{0.0, beta};
      for (std::size_t i = 0; i < n; ++i) {
        RelaxedSample s = gumbel_softmax<double>(nullptr, logits, spec, tau, rng);
        const auto& z = s.z.data();
        std::size_t best = argmax_index(z.data(), k);
        cell.argmax_freq[best] += 1.0;
        max_sum += z[best];
        if (writer) writer->row(z);
      }
      cell.mean_max_entry = max_sum / static_cast<double>(n);
      for (auto& f : cell.argmax_freq) f /= static_cast<double>(n);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace scg
