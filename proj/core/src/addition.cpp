#include "scg/addition.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scg/errors.hpp"
#include "scg/init.hpp"
#include "scg/ops.hpp"

namespace scg::addition {

namespace {
// 8x8 bit rows per digit.
constexpr std::uint8_t kGlyphRows[10][8] = {
    {0x3c, 0x42, 0x46, 0x4a, 0x52, 0x62, 0x3c, 0x00},  // 0
    {0x18, 0x28, 0x08, 0x08, 0x08, 0x08, 0x3e, 0x00},  // 1
    {0x3c, 0x42, 0x02, 0x0c, 0x30, 0x40, 0x7e, 0x00},  // 2
    {0x3c, 0x42, 0x02, 0x1c, 0x02, 0x42, 0x3c, 0x00},  // 3
    {0x04, 0x0c, 0x14, 0x24, 0x7e, 0x04, 0x04, 0x00},  // 4
    {0x7e, 0x40, 0x7c, 0x02, 0x02, 0x42, 0x3c, 0x00},  // 5
    {0x1c, 0x20, 0x40, 0x7c, 0x42, 0x42, 0x3c, 0x00},  // 6
    {0x7e, 0x02, 0x04, 0x08, 0x10, 0x20, 0x20, 0x00},  // 7
    {0x3c, 0x42, 0x42, 0x3c, 0x42, 0x42, 0x3c, 0x00},  // 8
    {0x3c, 0x42, 0x42, 0x3e, 0x02, 0x04, 0x38, 0x00},  // 9
};
}  // namespace

const std::array<double, kImagePixels>& glyph(int digit) {
  static const auto glyphs = [] {
    std::array<std::array<double, kImagePixels>, 10> all{};
    for (int d = 0; d < 10; ++d) {
      for (int row = 0; row < 8; ++row) {
        for (int col = 0; col < 8; ++col) {
          all[d][row * 8 + col] = (kGlyphRows[d][row] >> (7 - col)) & 1 ? 1.0 : 0.0;
        }
      }
    }
    return all;
  }();
  return glyphs[digit];
}

std::vector<Pair> generate_pairs(int n, double noise, Rng& rng) {
  if (noise < 0.0) throw ContractError("generate_pairs: noise must be nonnegative");
  std::vector<Pair> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Pair p;
    p.digit_a = rng.uniform_int(0, 9);
    p.digit_b = rng.uniform_int(0, 9);
    p.label = p.digit_a + p.digit_b;
    p.image_a = glyph(p.digit_a);
    p.image_b = glyph(p.digit_b);
    if (noise > 0.0) {
      for (auto& v : p.image_a) v += noise * rng.gaussian();
      for (auto& v : p.image_b) v += noise * rng.gaussian();
    }
    out.push_back(p);
  }
  return out;
}

void save_pairs(const std::string& path, const std::vector<Pair>& pairs) {
  std::filesystem::path fp(path);
  if (fp.has_parent_path()) std::filesystem::create_directories(fp.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_pairs: cannot open " + path);
  char buf[40];
  for (const auto& p : pairs) {
    std::string line;
    auto append = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      line += buf;
      line += ',';
    };
    for (double v : p.image_a) append(v);
    for (double v : p.image_b) append(v);
    line += std::to_string(p.digit_a);
    line += ',';
    line += std::to_string(p.digit_b);
    line += ',';
    line += std::to_string(p.label);
    line += '\n';
    out << line;
  }
}

std::vector<Pair> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_pairs: cannot open " + path);
  std::vector<Pair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    Pair p;
    for (int i = 0; i < kImagePixels; ++i) {
      std::getline(ss, field, ',');
      p.image_a[i] = std::stod(field);
    }
    for (int i = 0; i < kImagePixels; ++i) {
      std::getline(ss, field, ',');
      p.image_b[i] = std::stod(field);
    }
    std::getline(ss, field, ',');
    p.digit_a = std::stoi(field);
    std::getline(ss, field, ',');
    p.digit_b = std::stoi(field);
    std::getline(ss, field, ',');
    p.label = std::stoi(field);
    if (p.label != p.digit_a + p.digit_b) throw ParseError("load_pairs: inconsistent label");
    out.push_back(p);
  }
  return out;
}

Model Model::init(const ModelConfig& cfg, Rng& rng) {
  Model m;
  m.cfg = cfg;
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  const std::size_t hidden = static_cast<std::size_t>(cfg.encoder_hidden);
  m.We1 = glorot_uniform(kImagePixels, hidden, rng);
  m.be1 = zero_bias(hidden);
  m.We2 = glorot_uniform(hidden, dim, rng);
  m.be2 = zero_bias(dim);
  m.C = glorot_uniform(kNumClasses, dim, rng);  // stored (19 x dim)
  m.Wa1 = glorot_uniform(2 * dim, 2 * dim, rng);
  m.ba1 = zero_bias(2 * dim);
  m.Wa2 = glorot_uniform(2 * dim, dim, rng);
  m.ba2 = zero_bias(dim);
  return m;
}

std::vector<Tensor> Model::params() const {
  return {We1, be1, We2, be2, C, Wa1, ba1, Wa2, ba2};
}

namespace {

Tensor encode(Tape* tape, const Model& m, const std::array<double, kImagePixels>& image) {
  Tensor x = Tensor::from_vector(std::vector<double>(image.begin(), image.end()));
  Tensor h = relu(tape, add(tape, matmul(tape, x, m.We1), m.be1));
  return add(tape, matmul(tape, h, m.We2), m.be2);
}

DcComponent make_component(const Model& m, DcMode mode) {
  DcComponent dc;
  dc.k = kNumClasses;
  dc.mode = mode;
  dc.g = [&m](Tape* t, const Tensor& u) { return matmul(t, u, m.C, /*transpose_b=*/true); };
  dc.h = [&m](Tape* t, const Tensor& z) { return matmul(t, z, m.C); };
  return dc;
}

}  // namespace

Forward forward_pair(Tape* tape, const Model& model, const Pair& pair,
                     const ForwardOptions& opt, Rng& rng) {
  const bool training = opt.mode == DcMode::TrainRelaxed;
  DcComponent dc = make_component(model, opt.mode);
  DropResGate gate{training ? opt.alpha : 1.0};

  Forward fwd;
  Tensor ua = encode(tape, model, pair.image_a);
  Tensor ub = encode(tape, model, pair.image_b);
  DcResult ra = dc_forward(tape, dc, ua, gate, opt.beta, opt.tau, rng);
  DcResult rb = dc_forward(tape, dc, ub, gate, opt.beta, opt.tau, rng);
  fwd.theta_a = ra.theta;
  fwd.theta_b = rb.theta;
  fwd.z_a = ra.z.z;
  fwd.z_b = rb.z.z;

  Tensor cat = concat(tape, ra.v, rb.v, 0);
  Tensor h = relu(tape, add(tape, matmul(tape, cat, model.Wa1), model.ba1));
  Tensor x_ab = add(tape, matmul(tape, h, model.Wa2), model.ba2);
  fwd.logits = matmul(tape, x_ab, model.C, /*transpose_b=*/true);
  return fwd;
}

EvalResult evaluate(const Model& model, const std::vector<Pair>& split,
                    const ForwardOptions& opt, Rng& rng) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  std::size_t task_hits = 0, digit_hits = 0;
  for (const auto& p : split) {
    Forward fwd = forward_pair(nullptr, model, p, opt, rng);
    const auto& lg = fwd.logits.data();
    if (static_cast<int>(argmax_index(lg.data(), lg.size())) == p.label) ++task_hits;
    if (static_cast<int>(argmax_index(fwd.theta_a.data().data(), kNumClasses)) == p.digit_a) {
      ++digit_hits;
    }
    if (static_cast<int>(argmax_index(fwd.theta_b.data().data(), kNumClasses)) == p.digit_b) {
      ++digit_hits;
    }
  }
  EvalResult res;
  res.task_acc = static_cast<double>(task_hits) / split.size();
  res.digit_readout_acc = static_cast<double>(digit_hits) / (2.0 * split.size());
  return res;
}

std::vector<std::string> metric_columns() {
  std::vector<std::string> cols = {"step", "epoch", "loss", "beta", "alpha", "tau"};
  for (int j = 0; j < kNumClasses; ++j) cols.push_back("z_mean_" + std::to_string(j));
  for (int j = 0; j < kNumClasses; ++j) cols.push_back("grad_abs_theta_" + std::to_string(j));
  return cols;
}

double train_epoch(Model& model, Optimizer& opt, const std::vector<Pair>& train,
                   ScheduleState& schedule, const TrainConfig& cfg, int epoch, Rng& rng,
                   MetricWriter* metrics, long* global_step) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }

  const std::size_t batches =
      (train.size() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto sched = schedule.tick(epoch + static_cast<double>(b) / batches);
    ForwardOptions fopt;
    fopt.mode = DcMode::TrainRelaxed;
    fopt.beta = sched.beta;
    fopt.alpha = sched.alpha;
    fopt.tau = sched.tau;

    Tape tape;
    std::vector<Tensor> losses;
    std::vector<Forward> fwds;
    const std::size_t lo = b * cfg.batch_size;
    const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
    for (std::size_t i = lo; i < hi; ++i) {
      const Pair& p = train[order[i]];
      Forward fwd = forward_pair(&tape, model, p, fopt, rng);
      losses.push_back(
          cross_entropy_with_logits(&tape, fwd.logits, static_cast<std::size_t>(p.label)));
      fwds.push_back(std::move(fwd));
    }
    Tensor loss = mean(&tape, concat(&tape, losses, 0));
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    loss_sum += loss.value();
    if (global_step) ++*global_step;

    if (metrics) {
      // Category utilization: mean z_j and mean |dL/dtheta_j| over both
      // components of every pair in the batch.
      std::vector<double> zmean(kNumClasses, 0.0), gmean(kNumClasses, 0.0);
      for (const auto& fwd : fwds) {
        for (int j = 0; j < kNumClasses; ++j) {
          zmean[j] += fwd.z_a.data()[j] + fwd.z_b.data()[j];
          if (fwd.theta_a.grad_allocated()) gmean[j] += std::abs(fwd.theta_a.grad()[j]);
          if (fwd.theta_b.grad_allocated()) gmean[j] += std::abs(fwd.theta_b.grad()[j]);
        }
      }
      const double denom = 2.0 * static_cast<double>(fwds.size());
      std::vector<double> row = {static_cast<double>(global_step ? *global_step : b),
                                 static_cast<double>(epoch), loss.value(), sched.beta,
                                 sched.alpha, sched.tau};
      for (int j = 0; j < kNumClasses; ++j) row.push_back(zmean[j] / denom);
      for (int j = 0; j < kNumClasses; ++j) row.push_back(gmean[j] / denom);
      metrics->row(row);
    }
  }
  return loss_sum / static_cast<double>(batches);
}

}  // namespace scg::addition
