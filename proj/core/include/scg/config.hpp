#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scg {

// Configuration for one experiment run. Defaults per task follow the
// reference hyperparameters; everything is reachable from the JSON config
// file and --override flags.
struct ExperimentConfig {
  std::string task = "listops";  // listops | kg | addition | toy-saturation | simplex-sweep
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  std::string test_mode = "argmax";  // argmax | sample | relaxed

  struct Data {
    std::string path = "data";
    // listops
    std::vector<int> depths = {1, 2, 3, 4, 5};
    int train_per_depth = 20000;
    int valid_per_depth = 2000;
    int test_per_depth = 2000;
    std::vector<int> extra_depths = {8, 10};
    int extra_per_depth = 2000;
    int max_len = 50;
    // kg
    int entities = 200;
    int relations = 8;
    int layers = 5;
    int out_degree = 2;
    std::vector<int> train_path_lengths = {1, 2};
    int train_paths_per_length = 1000;
    std::vector<int> eval_path_lengths = {1, 2, 3, 4};
    int eval_paths_per_length = 250;
    // addition
    int pairs_train = 4000;
    int pairs_valid = 500;
    int pairs_test = 1000;
    double noise = 0.25;
  } data;

  struct ModelBlock {
    int dim = 60;              // listops 60 | kg 256 | addition 84
    int passes = 5;            // listops message passes
    double message_dropout = 0.1;
    bool message_uses_first_embedding = true;
    int encoder_hidden = 120;  // addition
    double subject_dropout = 0.1;  // kg
    double relation_dropout = 0.1;
    double object_dropout = 0.1;
    double entity_reg = 1e-9;
    double relation_reg = 1e-9;
    bool reciprocal = false;
    bool discretize = true;
  } model;

  struct TrainBlock {
    int epochs = 100;
    int batch_size = 100;
    double lr = 0.0005;
    std::string optimizer = "adam";  // adam | sgd
    int eval_every_epochs = 1;
    int log_every_batches = 1;
  } train;

  struct ScheduleBlock {
    std::string mode = "temp_match";  // temp_match | tau_anneal | constant
    double tau = 1.0;
    double gamma = 0.008;
    int updates_per_epoch = 10;
    bool dropres = true;
    bool alpha_ramp = true;
    double alpha_rate = 0.002;
    double alpha_const = 0.0;
    double beta_const = 1.0;
    double tau_floor = 1.0;
    double test_beta = -1.0;  // < 0: use the final beta_t of training
  } schedule;

  struct DiagnoseBlock {
    std::vector<double> betas = {0.5, 1.0, 2.0, 4.0};  // toy saturation
    int steps = 5000;
    double lr = 0.01;
    std::vector<double> theta = {2.0, 0.5, 1.0};  // simplex sweep
    std::vector<double> taus = {4.0, 2.0, 1.0, 0.5, 0.1};
    std::vector<double> sweep_betas = {0.0, 0.25, 0.5, 0.75, 1.0};
    int samples = 2000;
  } diagnose;

  // Applies per-task defaults, then overwrites with any values present in
  // the JSON text.
  static ExperimentConfig defaults_for(const std::string& task);
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json_text() const;
  void save(const std::string& path) const;

  // Dot-path override, e.g. "schedule.gamma=0.01" or "data.depths=[1,2]".
  void apply_override(const std::string& spec);
};

}  // namespace scg
