#pragma once

#include <array>
#include <string>
#include <vector>

#include "scg/dc_component.hpp"
#include "scg/diagnostics.hpp"
#include "scg/optim.hpp"
#include "scg/rng.hpp"
#include "scg/schedule.hpp"
#include "scg/tensor.hpp"

namespace scg::addition {

constexpr int kImagePixels = 64;  // 8x8 rasterized digits
constexpr int kNumClasses = 19;   // sums 0..18

// Fixed glyph bitmap for a digit (values 0/1 before noise).
const std::array<double, kImagePixels>& glyph(int digit);

struct Pair {
  std::array<double, kImagePixels> image_a{};
  std::array<double, kImagePixels> image_b{};
  int digit_a = 0;
  int digit_b = 0;
  int label = 0;  // digit_a + digit_b
};

// Uniformly sampled digit pairs rendered as noisy glyphs.
std::vector<Pair> generate_pairs(int n, double noise, Rng& rng);

void save_pairs(const std::string& path, const std::vector<Pair>& pairs);
std::vector<Pair> load_pairs(const std::string& path);

struct ModelConfig {
  int dim = 84;
  int encoder_hidden = 120;
};

struct Model {
  ModelConfig cfg;
  Tensor We1, be1;  // encoder (64 -> hidden)
  Tensor We2, be2;  // encoder (hidden -> dim)
  Tensor C;         // shared classification matrix (19 x dim): logits map,
                    // embedding map and final classifier
  Tensor Wa1, ba1;  // ADD (2dim -> 2dim)
  Tensor Wa2, ba2;  // ADD (2dim -> dim)

  static Model init(const ModelConfig& cfg, Rng& rng);
  std::vector<Tensor> params() const;
};

struct ForwardOptions {
  DcMode mode = DcMode::TrainRelaxed;
  double beta = 0.0;
  double alpha = 1.0;
  double tau = 8.0;
};

struct Forward {
  Tensor logits;   // 19 sum classes
  Tensor theta_a;  // per-image digit logits (19)
  Tensor theta_b;
  Tensor z_a;      // relaxed/hard samples
  Tensor z_b;
};

Forward forward_pair(Tape* tape, const Model& model, const Pair& pair,
                     const ForwardOptions& opt, Rng& rng);

struct EvalResult {
  double task_acc = 0.0;
  double digit_readout_acc = 0.0;  // argmax of per-image theta vs true digit
};

EvalResult evaluate(const Model& model, const std::vector<Pair>& split,
                    const ForwardOptions& opt, Rng& rng);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 0.0001;
};

// Metric rows carry the category-utilization diagnostics: per-category mean
// z_j over the batch and mean |dL/dtheta_j|.
double train_epoch(Model& model, Optimizer& opt, const std::vector<Pair>& train,
                   ScheduleState& schedule, const TrainConfig& cfg, int epoch, Rng& rng,
                   MetricWriter* metrics = nullptr, long* global_step = nullptr);

std::vector<std::string> metric_columns();

}  // namespace scg::addition
