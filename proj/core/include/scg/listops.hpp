#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scg/dc_component.hpp"
#include "scg/diagnostics.hpp"
#include "scg/optim.hpp"
#include "scg/rng.hpp"
#include "scg/schedule.hpp"
#include "scg/tensor.hpp"

namespace scg::listops {

// Token ids: digits 0..9 map to 0..9 so the first ten embedding rows double
// as the Num table; then the three operators and the closing bracket.
constexpr int kTokMin = 10;
constexpr int kTokMax = 11;
constexpr int kTokMed = 12;
constexpr int kTokClose = 13;
constexpr int kNumTokens = 14;
constexpr int kMaxLen = 50;

struct Example {
  std::vector<int> tokens;
  // Parent token index per token; -1 for the root operator and for the final
  // closing bracket (its edge is excluded from the tree).
  std::vector<int> parent;
  int result = 0;
  std::vector<std::pair<int, int>> intermediates;  // (operator position, value)
  int depth = 0;
};

std::string to_string(const Example& ex);
std::vector<int> tokenize(const std::string& expr);

// Recursive evaluation of a token sequence; fills per-operator intermediate
// results when requested. Throws ParseError on malformed input.
int eval_tokens(const std::vector<int>& tokens,
                std::vector<std::pair<int, int>>* intermediates = nullptr);

// Re-derives result, parents and intermediates for a token sequence.
Example analyze(const std::vector<int>& tokens);

struct GenOptions {
  std::vector<int> depths = {1, 2, 3, 4, 5};
  int per_depth = 100;
  int max_len = kMaxLen;
  int min_args = 2;
  int max_args = 5;
};

std::vector<Example> generate(const GenOptions& opt, Rng& rng);

void save_examples(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> load_examples(const std::string& path);

struct ModelConfig {
  int dim = 60;
  int passes = 5;
  double message_dropout = 0.1;
  bool message_uses_first_embedding = true;  // false: current receiver state
};

struct Model {
  ModelConfig cfg;
  Tensor E2;      // token embeddings (14 x dim)
  Tensor W1, b1;  // message MLP layer 1 (2dim -> dim)
  Tensor W2, b2;  // message MLP layer 2 (dim -> dim)
  Tensor W3, b3;  // Pred inner (dim -> dim), shared with the discretization
  Tensor W4;      // Pred outer (dim -> 10), no bias

  static Model init(const ModelConfig& cfg, Rng& rng);
  std::vector<Tensor> params() const;
};

// Per-example forward products needed by probes and the losses.
struct Forward {
  Tensor root_logits;              // 10
  Tensor final_theta;              // n x 10, logits of every node after the last pass
  std::vector<Tensor> xe_sites;    // per discretizing pass: gathered token embeddings
  std::vector<Tensor> xp_sites;    // per discretizing pass: node states entering the dc
};

struct ForwardOptions {
  DcMode mode = DcMode::TrainRelaxed;
  double beta = 0.0;
  double alpha = 1.0;
  double tau = 1.0;
  int passes_override = 0;  // 0: model default; d>0 runs d message passes
};

Forward forward_example(Tape* tape, const Model& model, const Example& ex,
                        const ForwardOptions& opt, Rng& rng);

struct EvalResult {
  double task_acc = 0.0;
  double inter_acc = 0.0;
};

EvalResult evaluate(const Model& model, const std::vector<Example>& split,
                    const ForwardOptions& opt, Rng& rng);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 100;
  double lr = 0.0005;
};

// One epoch of minibatch training; advances the schedule at its cadence,
// returns the mean batch loss, and (optionally) observes gradient probes at
// the per-pass sites and streams per-batch metric rows.
double train_epoch(Model& model, Optimizer& opt, const std::vector<Example>& train,
                   ScheduleState& schedule, const TrainConfig& cfg, int epoch, Rng& rng,
                   ProbeSet* probes = nullptr, MetricWriter* metrics = nullptr,
                   long* global_step = nullptr);

}  // namespace scg::listops
