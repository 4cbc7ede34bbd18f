#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scg/dc_component.hpp"
#include "scg/diagnostics.hpp"
#include "scg/optim.hpp"
#include "scg/rng.hpp"
#include "scg/schedule.hpp"
#include "scg/tensor.hpp"

namespace scg::kg {

struct Triple {
  int s = 0, r = 0, o = 0;
  bool operator==(const Triple&) const = default;
};

struct Graph {
  int num_entities = 0;
  int num_relations = 0;
  std::vector<Triple> train, valid, test;

  std::vector<Triple> all() const;
};

// Layered random graph: entities are split into layers and every relation
// bridges one layer to the next, so multi-hop compositions up to
// (layers - 1) steps exist by construction.
struct GraphGenOptions {
  int entities = 200;
  int relations = 8;
  int layers = 5;
  int out_degree = 2;  // objects per (entity, incident relation)
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
};

Graph generate_layered_graph(const GraphGenOptions& opt, Rng& rng);

struct PathQuery {
  int source = 0;
  std::vector<int> relations;
  int target = 0;
  bool operator==(const PathQuery&) const = default;
};

// Random-walk path sampling per the uniform incident-relation / uniform
// next-entity procedure; duplicates removed. Length-1 paths are exactly the
// triples and are added by add_triples_as_paths.
std::vector<PathQuery> sample_paths(const std::vector<Triple>& triples,
                                    const std::vector<int>& lengths, int n_per_length, Rng& rng);
std::vector<PathQuery> triples_as_paths(const std::vector<Triple>& triples);

// Reverse copies with relation ids offset by num_relations (reciprocal
// training).
std::vector<PathQuery> add_reciprocal(const std::vector<PathQuery>& paths, int num_relations);

// --- file formats -----------------------------------------------------------
void save_triples(const std::string& path, const std::vector<Triple>& triples,
                  const std::vector<std::string>& entity_names,
                  const std::vector<std::string>& relation_names);
void save_paths(const std::string& path, const std::vector<PathQuery>& queries,
                const std::vector<std::string>& entity_names,
                const std::vector<std::string>& relation_names);
void save_id_map(const std::string& path, const std::vector<std::string>& names);
std::vector<std::string> load_id_map(const std::string& path);
std::vector<Triple> load_triples(const std::string& path,
                                 const std::vector<std::string>& entity_names,
                                 const std::vector<std::string>& relation_names);
std::vector<PathQuery> load_paths(const std::string& path,
                                  const std::vector<std::string>& entity_names,
                                  const std::vector<std::string>& relation_names);
std::vector<std::string> default_entity_names(int n);
std::vector<std::string> default_relation_names(int n);

// --- model ------------------------------------------------------------------

struct ModelConfig {
  int dim = 256;  // packed complex dimension; must be even
  double subject_dropout = 0.0;
  double relation_dropout = 0.0;
  double object_dropout = 0.0;
  double entity_reg = 1e-9;
  double relation_reg = 1e-9;
  bool reciprocal = false;
  bool discretize = true;  // false: relaxed chaining baseline (no discrete test mode)
};

struct Model {
  ModelConfig cfg;
  int num_entities = 0;
  int num_relations = 0;  // rows in the relation table (2x when reciprocal)
  Tensor E;               // entities (n x dim), halves [re | im]
  Tensor R;               // relations (m x dim)

  static Model init(const ModelConfig& cfg, int entities, int relations, Rng& rng);
  std::vector<Tensor> params() const { return {E, R}; }
};

// ComplEx scores against every entity: theta_o = Re<s, r, conj(e_o)>.
// s and r are packed rank-1 vectors of even length 2c; E is (n x 2c).
Tensor complex_score_all(Tape* tape, const Tensor& s, const Tensor& r, const Tensor& E);

struct PathForwardOptions {
  DcMode mode = DcMode::TrainRelaxed;
  double beta = 0.0;
  double alpha = 1.0;
  double tau = 4.0;
  bool train_dropout = false;  // apply embedding dropout (train mode only)
};

// Final-hop logits over all entities; intermediate hops are discretized (or
// relaxed for the baseline), the final hop feeds the loss or ranking
// directly.
Tensor path_forward(Tape* tape, const Model& model, const PathQuery& query,
                    const PathForwardOptions& opt, Rng& rng);

struct GuuResult {
  double mq = 0.0;
  double hits10 = 0.0;
  int evaluated = 0;
  int skipped = 0;  // queries with an empty negative set
};

// Guu-style evaluation: positives are every entity reachable by traversing
// the full path on the evaluation graph (filtered); negatives are the
// entities reachable by the final relation alone, minus the positives.
GuuResult evaluate_guu(const Model& model, const std::vector<PathQuery>& queries,
                       const std::vector<Triple>& eval_graph, const PathForwardOptions& opt,
                       Rng& rng);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 512;
  double lr = 0.001;
};

double train_epoch(Model& model, Optimizer& opt, const std::vector<PathQuery>& train,
                   ScheduleState& schedule, const TrainConfig& cfg, int epoch, Rng& rng,
                   MetricWriter* metrics = nullptr, long* global_step = nullptr);

}  // namespace scg::kg
