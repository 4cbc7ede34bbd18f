#include "scg/kg.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "scg/errors.hpp"
#include "scg/init.hpp"
#include "scg/ops.hpp"

namespace scg::kg {

namespace {

// Adjacency index: entity -> relation -> objects.
struct Adjacency {
  std::unordered_map<long, std::vector<int>> out;  // key = entity * kRelShift + relation
  std::unordered_map<int, std::vector<int>> incident;  // entity -> distinct relations
  static constexpr long kRelShift = 1L << 20;

  explicit Adjacency(const std::vector<Triple>& triples) {
    std::unordered_map<int, std::set<int>> inc;
    for (const auto& t : triples) {
      out[static_cast<long>(t.s) * kRelShift + t.r].push_back(t.o);
      inc[t.s].insert(t.r);
    }
    for (auto& [e, rels] : inc) incident[e] = std::vector<int>(rels.begin(), rels.end());
  }

  const std::vector<int>* objects(int s, int r) const {
    auto it = out.find(static_cast<long>(s) * kRelShift + r);
    return it == out.end() ? nullptr : &it->second;
  }
};

std::uint64_t path_key(const PathQuery& q) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(static_cast<std::uint64_t>(q.source));
  for (int r : q.relations) mix(static_cast<std::uint64_t>(r) + 7);
  mix(static_cast<std::uint64_t>(q.target) + 1315423911ULL);
  return h;
}

}  // namespace

std::vector<Triple> Graph::all() const {
  std::vector<Triple> out = train;
  out.insert(out.end(), valid.begin(), valid.end());
  out.insert(out.end(), test.begin(), test.end());
  return out;
}

Graph generate_layered_graph(const GraphGenOptions& opt, Rng& rng) {
  if (opt.layers < 2 || opt.entities < opt.layers || opt.relations < 1) {
    throw ContractError("generate_layered_graph: degenerate sizes");
  }
  Graph g;
  g.num_entities = opt.entities;
  g.num_relations = opt.relations;

  const int per_layer = opt.entities / opt.layers;
  auto layer_of = [&](int e) { return std::min(e / per_layer, opt.layers - 1); };
  auto layer_range = [&](int l) {
    const int lo = l * per_layer;
    const int hi = l == opt.layers - 1 ? opt.entities : lo + per_layer;
    return std::pair<int, int>{lo, hi};
  };

  std::vector<Triple> triples;
  std::set<std::tuple<int, int, int>> seen;
  for (int e = 0; e < opt.entities; ++e) {
    const int l = layer_of(e);
    if (l >= opt.layers - 1) continue;
    for (int r = 0; r < opt.relations; ++r) {
      if (r % (opt.layers - 1) != l) continue;  // relation bridges layer l -> l+1
      auto [lo, hi] = layer_range(l + 1);
      for (int d = 0; d < opt.out_degree; ++d) {
        const int o = lo + static_cast<int>(rng.uniform_index(hi - lo));
        if (seen.insert({e, r, o}).second) triples.push_back({e, r, o});
      }
    }
  }

  // Shuffle, then split.
  for (std::size_t i = triples.size(); i > 1; --i) {
    std::swap(triples[i - 1], triples[rng.uniform_index(i)]);
  }
  const std::size_t n = triples.size();
  const std::size_t n_valid = static_cast<std::size_t>(n * opt.valid_fraction);
  const std::size_t n_test = static_cast<std::size_t>(n * opt.test_fraction);
  g.valid.assign(triples.begin(), triples.begin() + n_valid);
  g.test.assign(triples.begin() + n_valid, triples.begin() + n_valid + n_test);
  g.train.assign(triples.begin() + n_valid + n_test, triples.end());
  return g;
}

std::vector<PathQuery> triples_as_paths(const std::vector<Triple>& triples) {
  std::vector<PathQuery> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back({t.s, {t.r}, t.o});
  return out;
}

std::vector<PathQuery> sample_paths(const std::vector<Triple>& triples,
                                    const std::vector<int>& lengths, int n_per_length, Rng& rng) {
  Adjacency adj(triples);
  std::vector<int> sources;
  for (const auto& [e, rels] : adj.incident) {
    (void)rels;
    sources.push_back(e);
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) throw ContractError("sample_paths: graph has no outgoing edges");

  std::vector<PathQuery> out;
  std::unordered_set<std::uint64_t> seen;
  for (int len : lengths) {
    if (len < 1) throw ContractError("sample_paths: lengths must be >= 1");
    int collected = 0;
    long attempts = 0;
    const long max_attempts = 200L * n_per_length + 1000;
    while (collected < n_per_length && attempts++ < max_attempts) {
      PathQuery q;
      q.source = sources[rng.uniform_index(sources.size())];
      int cur = q.source;
      bool ok = true;
      for (int hop = 0; hop < len; ++hop) {
        auto inc = adj.incident.find(cur);
        if (inc == adj.incident.end()) {
          ok = false;
          break;
        }
        const int r = inc->second[rng.uniform_index(inc->second.size())];
        const auto* objs = adj.objects(cur, r);
        cur = (*objs)[rng.uniform_index(objs->size())];
        q.relations.push_back(r);
      }
      if (!ok) continue;
      q.target = cur;
      if (seen.insert(path_key(q)).second) {
        out.push_back(std::move(q));
        ++collected;
      }
    }
  }
  return out;
}

std::vector<PathQuery> add_reciprocal(const std::vector<PathQuery>& paths, int num_relations) {
  std::vector<PathQuery> out = paths;
  out.reserve(paths.size() * 2);
  for (const auto& q : paths) {
    PathQuery rev;
    rev.source = q.target;
    rev.target = q.source;
    for (auto it = q.relations.rbegin(); it != q.relations.rend(); ++it) {
      rev.relations.push_back(*it + num_relations);
    }
    out.push_back(std::move(rev));
  }
  return out;
}

// --- file formats ------------------------------------------------------------

namespace {
void ensure_parent(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::unordered_map<std::string, int> index_of(const std::vector<std::string>& names) {
  std::unordered_map<std::string, int> idx;
  for (std::size_t i = 0; i < names.size(); ++i) idx[names[i]] = static_cast<int>(i);
  return idx;
}
}  // namespace

std::vector<std::string> default_entity_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("e" + std::to_string(i));
  return names;
}

std::vector<std::string> default_relation_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back("r" + std::to_string(i));
  return names;
}

void save_triples(const std::string& path, const std::vector<Triple>& triples,
                  const std::vector<std::string>& entity_names,
                  const std::vector<std::string>& relation_names) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_triples: cannot open " + path);
  for (const auto& t : triples) {
    out << entity_names[t.s] << '\t' << relation_names[t.r] << '\t' << entity_names[t.o] << '\n';
  }
}

std::vector<Triple> load_triples(const std::string& path,
                                 const std::vector<std::string>& entity_names,
                                 const std::vector<std::string>& relation_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_triples: cannot open " + path);
  auto eidx = index_of(entity_names);
  auto ridx = index_of(relation_names);
  std::vector<Triple> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string s, r, o;
    std::getline(ss, s, '\t');
    std::getline(ss, r, '\t');
    std::getline(ss, o, '\t');
    out.push_back({eidx.at(s), ridx.at(r), eidx.at(o)});
  }
  return out;
}

void save_paths(const std::string& path, const std::vector<PathQuery>& queries,
                const std::vector<std::string>& entity_names,
                const std::vector<std::string>& relation_names) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_paths: cannot open " + path);
  for (const auto& q : queries) {
    out << entity_names[q.source] << '\t';
    for (std::size_t i = 0; i < q.relations.size(); ++i) {
      if (i) out << ' ';
      out << relation_names[q.relations[i]];
    }
    out << '\t' << entity_names[q.target] << '\n';
  }
}

std::vector<PathQuery> load_paths(const std::string& path,
                                  const std::vector<std::string>& entity_names,
                                  const std::vector<std::string>& relation_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_paths: cannot open " + path);
  auto eidx = index_of(entity_names);
  auto ridx = index_of(relation_names);
  std::vector<PathQuery> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string src, rels, tgt;
    std::getline(ss, src, '\t');
    std::getline(ss, rels, '\t');
    std::getline(ss, tgt, '\t');
    PathQuery q;
    q.source = eidx.at(src);
    q.target = eidx.at(tgt);
    std::istringstream rs(rels);
    std::string r;
    while (rs >> r) q.relations.push_back(ridx.at(r));
    out.push_back(std::move(q));
  }
  return out;
}

void save_id_map(const std::string& path, const std::vector<std::string>& names) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_id_map: cannot open " + path);
  for (std::size_t i = 0; i < names.size(); ++i) out << i << '\t' << names[i] << '\n';
}

std::vector<std::string> load_id_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_id_map: cannot open " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, name;
    std::getline(ss, id, '\t');
    std::getline(ss, name, '\t');
    if (static_cast<std::size_t>(std::stoul(id)) != names.size()) {
      throw ParseError("load_id_map: ids must be dense and ordered");
    }
    names.push_back(name);
  }
  return names;
}

// --- model -------------------------------------------------------------------

Model Model::init(const ModelConfig& cfg, int entities, int relations, Rng& rng) {
  if (cfg.dim % 2 != 0) throw ContractError("kg model: dim must be even (complex pairs)");
  Model m;
  m.cfg = cfg;
  m.num_entities = entities;
  m.num_relations = cfg.reciprocal ? 2 * relations : relations;
  m.E = gaussian_embeddings(entities, cfg.dim, rng, 0.1);
  m.R = gaussian_embeddings(m.num_relations, cfg.dim, rng, 0.1);
  return m;
}

Tensor complex_score_all(Tape* tape, const Tensor& s, const Tensor& r, const Tensor& E) {
  if (s.rank() != 1 || r.rank() != 1 || E.rank() != 2) {
    throw DimensionError("complex_score_all: s, r rank-1 and E rank-2 required");
  }
  const std::size_t dim = s.numel();
  if (dim % 2 != 0 || r.numel() != dim || E.cols() != dim) {
    throw ContractError("complex_score_all: dimensions must match and be even");
  }
  const std::size_t c = dim / 2;

  // Constant half-selectors keep the split on the differentiable path.
  static thread_local std::map<std::size_t, std::pair<Tensor, Tensor>> selectors;
  auto it = selectors.find(dim);
  if (it == selectors.end()) {
    Tensor sel_re = Tensor::zeros({dim, c});
    Tensor sel_im = Tensor::zeros({dim, c});
    for (std::size_t i = 0; i < c; ++i) {
      sel_re.at(i, i) = 1.0;
      sel_im.at(c + i, i) = 1.0;
    }
    it = selectors.emplace(dim, std::make_pair(sel_re, sel_im)).first;
  }
  const Tensor& sel_re = it->second.first;
  const Tensor& sel_im = it->second.second;

  Tensor s_re = matmul(tape, s, sel_re);
  Tensor s_im = matmul(tape, s, sel_im);
  Tensor r_re = matmul(tape, r, sel_re);
  Tensor r_im = matmul(tape, r, sel_im);

  // a = s * r in C^c: Re<s,r,conj(o)> = dot(a_re, o_re) + dot(a_im, o_im).
  Tensor a_re = sub(tape, mul(tape, s_re, r_re), mul(tape, s_im, r_im));
  Tensor a_im = add(tape, mul(tape, s_re, r_im), mul(tape, s_im, r_re));
  Tensor a = concat(tape, a_re, a_im, 0);
  return matmul(tape, a, E, /*transpose_b=*/true);
}

Tensor path_forward(Tape* tape, const Model& model, const PathQuery& query,
                    const PathForwardOptions& opt, Rng& rng) {
  if (query.relations.empty()) throw ContractError("path_forward: empty relation sequence");
  const bool training = opt.mode == DcMode::TrainRelaxed;
  const std::size_t L = query.relations.size();

  Tensor E_used = model.E;
  if (training && opt.train_dropout && model.cfg.object_dropout > 0.0) {
    E_used = dropout_mask_apply(
        tape, model.E, make_dropout_mask<double>(model.E.shape(), model.cfg.object_dropout, rng));
  }

  Tensor s = row_select(tape, model.E, static_cast<std::size_t>(query.source));
  for (std::size_t hop = 0; hop < L; ++hop) {
    Tensor r = row_select(tape, model.R, static_cast<std::size_t>(query.relations[hop]));
    Tensor s_in = s;
    if (training && opt.train_dropout) {
      if (model.cfg.subject_dropout > 0.0) {
        s_in = dropout_mask_apply(
            tape, s_in, make_dropout_mask<double>(s_in.shape(), model.cfg.subject_dropout, rng));
      }
      if (model.cfg.relation_dropout > 0.0) {
        r = dropout_mask_apply(
            tape, r, make_dropout_mask<double>(r.shape(), model.cfg.relation_dropout, rng));
      }
    }
    Tensor theta = complex_score_all(tape, s_in, r, E_used);
    if (hop + 1 == L) return theta;  // final hop feeds the loss / ranking directly

    // Intermediate hop: discretize to an entity (or chain the relaxed
    // mixture for the continuous baseline).
    DcComponent dc;
    dc.k = static_cast<std::size_t>(model.num_entities);
    dc.mode = model.cfg.discretize ? opt.mode : (training ? DcMode::TrainRelaxed
                                                          : DcMode::TestRelaxed);
    dc.g = [&theta](Tape*, const Tensor&) { return theta; };
    dc.h = [&model](Tape* t, const Tensor& z) { return matmul(t, z, model.E); };
    DropResGate gate{training ? opt.alpha : 1.0};
    DcResult res = dc_forward(tape, dc, s, gate, opt.beta, opt.tau, rng);
    s = res.v;
  }
  return s;  // unreachable
}

GuuResult evaluate_guu(const Model& model, const std::vector<PathQuery>& queries,
                       const std::vector<Triple>& eval_graph, const PathForwardOptions& opt,
                       Rng& rng) {
  Adjacency adj(eval_graph);

  // Objects reachable by each relation from any subject.
  std::unordered_map<int, std::unordered_set<int>> relation_objects;
  for (const auto& t : eval_graph) relation_objects[t.r].insert(t.o);

  GuuResult res;
  double mq_sum = 0.0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    // Positives: every entity reachable by traversing the full path.
    std::unordered_set<int> frontier = {q.source};
    for (int r : q.relations) {
      std::unordered_set<int> next;
      for (int e : frontier) {
        if (const auto* objs = adj.objects(e, r)) next.insert(objs->begin(), objs->end());
      }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
    const std::unordered_set<int>& positives = frontier;

    std::vector<int> negatives;
    if (auto it = relation_objects.find(q.relations.back()); it != relation_objects.end()) {
      for (int o : it->second) {
        if (!positives.count(o)) negatives.push_back(o);
      }
    }
    if (negatives.empty()) {
      ++res.skipped;
      continue;
    }

    Tensor logits = path_forward(nullptr, model, q, opt, rng);
    const double target_score = logits.data()[q.target];
    std::size_t below = 0, above = 0;
    for (int o : negatives) {
      const double sc = logits.data()[o];
      if (sc < target_score) ++below;
      if (sc > target_score) ++above;
    }
    mq_sum += static_cast<double>(below) / static_cast<double>(negatives.size());
    if (above + 1 <= 10) ++hits;
    ++res.evaluated;
  }
  if (res.evaluated > 0) {
    res.mq = mq_sum / res.evaluated;
    res.hits10 = static_cast<double>(hits) / res.evaluated;
  }
  return res;
}

double train_epoch(Model& model, Optimizer& opt, const std::vector<PathQuery>& train,
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
    PathForwardOptions fopt;
    fopt.mode = DcMode::TrainRelaxed;
    fopt.beta = sched.beta;
    fopt.alpha = sched.alpha;
    fopt.tau = sched.tau;
    fopt.train_dropout = true;

    Tape tape;
    std::vector<Tensor> losses;
    const std::size_t lo = b * cfg.batch_size;
    const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
    for (std::size_t i = lo; i < hi; ++i) {
      const PathQuery& q = train[order[i]];
      Tensor logits = path_forward(&tape, model, q, fopt, rng);
      Tensor ce = cross_entropy_with_logits(&tape, logits, static_cast<std::size_t>(q.target));
      // L2 on the embeddings this query touches.
      if (model.cfg.entity_reg > 0.0 || model.cfg.relation_reg > 0.0) {
        Tensor src = row_select(&tape, model.E, static_cast<std::size_t>(q.source));
        Tensor tgt = row_select(&tape, model.E, static_cast<std::size_t>(q.target));
        Tensor ent = add(&tape, sum(&tape, mul(&tape, src, src)),
                         sum(&tape, mul(&tape, tgt, tgt)));
        Tensor reg = scalar_mul(&tape, ent, model.cfg.entity_reg);
        for (int rel : q.relations) {
          Tensor rv = row_select(&tape, model.R, static_cast<std::size_t>(rel));
          reg = add(&tape, reg,
                    scalar_mul(&tape, sum(&tape, mul(&tape, rv, rv)), model.cfg.relation_reg));
        }
        ce = add(&tape, ce, reg);
      }
      losses.push_back(ce);
    }
    Tensor loss = mean(&tape, concat(&tape, losses, 0));
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    loss_sum += loss.value();
    if (global_step) ++*global_step;
    if (metrics) {
      metrics->row({static_cast<double>(global_step ? *global_step : b),
                    static_cast<double>(epoch), loss.value(), sched.beta, sched.alpha,
                    sched.tau});
    }
  }
  return loss_sum / static_cast<double>(batches);
}

}  // namespace scg::kg
