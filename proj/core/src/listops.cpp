#include "scg/listops.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scg/errors.hpp"
#include "scg/init.hpp"
#include "scg/ops.hpp"

namespace scg::listops {

namespace {

const char* token_name(int tok) {
  static const char* names[] = {"0", "1",    "2",    "3",    "4",    "5",   "6",
                                "7", "8",    "9",    "min[", "max[", "med[", "]"};
  return names[tok];
}

int apply_op(int op, std::vector<int> vals) {
  if (vals.empty()) throw ParseError("operator with no operands");
  if (op == kTokMin) return *std::min_element(vals.begin(), vals.end());
  if (op == kTokMax) return *std::max_element(vals.begin(), vals.end());
  // med: middle of the sorted multiset; even counts take the lower mean of
  // the two middles, matching integer truncation of the median.
  std::sort(vals.begin(), vals.end());
  const std::size_t n = vals.size();
  if (n % 2 == 1) return vals[n / 2];
  return (vals[n / 2 - 1] + vals[n / 2]) / 2;
}

struct TreeNode {
  int digit = -1;  // >= 0 for leaves
  int op = -1;     // token id for operators
  std::vector<TreeNode> kids;
};

int min_tokens_for_depth(int depth, int min_args) {
  // An operator costs 2 tokens plus its arguments; the cheapest argument is
  // a single digit.
  int m = 1;
  for (int d = 1; d <= depth; ++d) m = 2 + m + (min_args - 1);
  return m;
}

TreeNode gen_tree(int depth, int budget, const GenOptions& opt, Rng& rng) {
  if (depth == 0) {
    TreeNode leaf;
    leaf.digit = rng.uniform_int(0, 9);
    return leaf;
  }
  TreeNode node;
  node.op = kTokMin + rng.uniform_int(0, 2);

  const int child_min = min_tokens_for_depth(depth - 1, opt.min_args);
  // 2 tokens for "op[ ... ]", one deep child, the rest at least digits.
  const int max_by_budget = (budget - 2 - child_min) + 1;
  const int arity = rng.uniform_int(opt.min_args, std::max(opt.min_args,
                                                           std::min(opt.max_args, max_by_budget)));
  const int deep_slot = static_cast<int>(rng.uniform_index(arity));

  int remaining = budget - 2;
  for (int s = 0; s < arity; ++s) {
    // Budget left after reserving minimal space for the later slots.
    int reserve = 0;
    for (int r = s + 1; r < arity; ++r) {
      reserve += r == deep_slot ? child_min : 1;
    }
    const int avail = remaining - reserve;
    int child_depth;
    if (s == deep_slot) {
      child_depth = depth - 1;
    } else if (depth == 1 || rng.uniform() < 0.6) {
      child_depth = 0;
    } else {
      int fit = 0;
      while (fit < depth - 1 && min_tokens_for_depth(fit + 1, opt.min_args) <= avail) ++fit;
      child_depth = fit == 0 ? 0 : rng.uniform_int(1, fit);
    }
    TreeNode child = gen_tree(child_depth, avail, opt, rng);
    int child_tokens = 0;
    std::vector<const TreeNode*> stack = {&child};
    while (!stack.empty()) {
      const TreeNode* n = stack.back();
      stack.pop_back();
      child_tokens += n->digit >= 0 ? 1 : 2;
      for (const auto& kid : n->kids) stack.push_back(&kid);
    }
    remaining -= child_tokens;
    node.kids.push_back(std::move(child));
  }
  return node;
}

int emit(const TreeNode& node, int parent_pos, Example& ex) {
  if (node.digit >= 0) {
    ex.tokens.push_back(node.digit);
    ex.parent.push_back(parent_pos);
    return node.digit;
  }
  const int pos = static_cast<int>(ex.tokens.size());
  ex.tokens.push_back(node.op);
  ex.parent.push_back(parent_pos);
  std::vector<int> vals;
  for (const auto& kid : node.kids) vals.push_back(emit(kid, pos, ex));
  ex.tokens.push_back(kTokClose);
  ex.parent.push_back(pos);
  const int value = apply_op(node.op, std::move(vals));
  ex.intermediates.emplace_back(pos, value);
  return value;
}

// Recursive-descent evaluation; returns (value, position after the parsed
// expression).
std::pair<int, std::size_t> parse_expr(const std::vector<int>& tokens, std::size_t pos,
                                       std::vector<std::pair<int, int>>* intermediates) {
  if (pos >= tokens.size()) throw ParseError("unexpected end of expression");
  const int tok = tokens[pos];
  if (tok >= 0 && tok <= 9) return {tok, pos + 1};
  if (tok == kTokMin || tok == kTokMax || tok == kTokMed) {
    const std::size_t op_pos = pos;
    ++pos;
    std::vector<int> vals;
    while (pos < tokens.size() && tokens[pos] != kTokClose) {
      auto [v, next] = parse_expr(tokens, pos, intermediates);
      vals.push_back(v);
      pos = next;
    }
    if (pos >= tokens.size()) throw ParseError("missing closing bracket");
    const int value = apply_op(tok, std::move(vals));
    if (intermediates) intermediates->emplace_back(static_cast<int>(op_pos), value);
    return {value, pos + 1};
  }
  throw ParseError("unexpected token in expression");
}

}  // namespace

std::string to_string(const Example& ex) {
  std::string out;
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (i) out += ' ';
    out += token_name(ex.tokens[i]);
  }
  return out;
}

std::vector<int> tokenize(const std::string& expr) {
  std::vector<int> tokens;
  std::istringstream ss(expr);
  std::string word;
  while (ss >> word) {
    if (word.size() == 1 && word[0] >= '0' && word[0] <= '9') {
      tokens.push_back(word[0] - '0');
    } else if (word == "min[") {
      tokens.push_back(kTokMin);
    } else if (word == "max[") {
      tokens.push_back(kTokMax);
    } else if (word == "med[") {
      tokens.push_back(kTokMed);
    } else if (word.find_first_not_of(']') == std::string::npos) {
      // Closing brackets may be written back to back ("]]").
      tokens.insert(tokens.end(), word.size(), kTokClose);
    } else {
      throw ParseError("unknown token '" + word + "'");
    }
  }
  return tokens;
}

int eval_tokens(const std::vector<int>& tokens,
                std::vector<std::pair<int, int>>* intermediates) {
  auto [value, next] = parse_expr(tokens, 0, intermediates);
  if (next != tokens.size()) throw ParseError("trailing tokens after expression");
  return value;
}

Example analyze(const std::vector<int>& tokens) {
  Example ex;
  ex.tokens = tokens;
  ex.result = eval_tokens(tokens, &ex.intermediates);

  // Parents: every token inside an operator's brackets points at that
  // operator; the final closing bracket keeps no edge.
  ex.parent.assign(tokens.size(), -1);
  std::vector<int> stack;
  int max_depth = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int tok = tokens[i];
    if (!stack.empty()) ex.parent[i] = stack.back();
    if (tok == kTokMin || tok == kTokMax || tok == kTokMed) {
      stack.push_back(static_cast<int>(i));
      max_depth = std::max<int>(max_depth, static_cast<int>(stack.size()));
    } else if (tok == kTokClose) {
      if (stack.empty()) throw ParseError("unbalanced closing bracket");
      stack.pop_back();
    }
  }
  if (!stack.empty()) throw ParseError("missing closing bracket");
  ex.parent.back() = -1;
  ex.depth = max_depth;
  return ex;
}

std::vector<Example> generate(const GenOptions& opt, Rng& rng) {
  std::vector<Example> out;
  for (int depth : opt.depths) {
    if (depth < 1 || min_tokens_for_depth(depth, opt.min_args) > opt.max_len) {
      throw ContractError("generate: depth does not fit the token budget");
    }
    for (int i = 0; i < opt.per_depth; ++i) {
      TreeNode tree = gen_tree(depth, opt.max_len, opt, rng);
      Example ex;
      ex.depth = depth;
      ex.result = emit(tree, -1, ex);
      ex.parent.back() = -1;  // final closing bracket carries no edge
      if (ex.tokens.size() > static_cast<std::size_t>(opt.max_len)) {
        throw ContractError("generate: token budget exceeded");
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void save_examples(const std::string& path, const std::vector<Example>& examples) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_examples: cannot open " + path);
  for (const auto& ex : examples) {
    out << to_string(ex) << '\t' << ex.result << '\t';
    for (std::size_t i = 0; i < ex.parent.size(); ++i) {
      if (i) out << ' ';
      out << ex.parent[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < ex.intermediates.size(); ++i) {
      if (i) out << ' ';
      out << ex.intermediates[i].first << ':' << ex.intermediates[i].second;
    }
    out << '\n';
  }
}

std::vector<Example> load_examples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_examples: cannot open " + path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string expr, result_s, parents_s, inter_s;
    std::getline(ss, expr, '\t');
    std::getline(ss, result_s, '\t');
    std::getline(ss, parents_s, '\t');
    std::getline(ss, inter_s, '\t');

    Example ex = analyze(tokenize(expr));
    if (ex.result != std::stoi(result_s)) {
      throw ParseError("load_examples: stored result disagrees with evaluation");
    }
    // Stored parents are authoritative for the tree (they match analyze by
    // construction, but verify the row width).
    std::istringstream ps(parents_s);
    std::vector<int> parents;
    int v;
    while (ps >> v) parents.push_back(v);
    if (parents.size() != ex.tokens.size()) {
      throw ParseError("load_examples: parent list length mismatch");
    }
    ex.parent = std::move(parents);
    out.push_back(std::move(ex));
  }
  return out;
}

Model Model::init(const ModelConfig& cfg, Rng& rng) {
  Model m;
  m.cfg = cfg;
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  m.E2 = gaussian_embeddings(kNumTokens, dim, rng);
  m.W1 = glorot_uniform(2 * dim, dim, rng);
  m.b1 = zero_bias(dim);
  m.W2 = glorot_uniform(dim, dim, rng);
  m.b2 = zero_bias(dim);
  m.W3 = glorot_uniform(dim, dim, rng);
  m.b3 = zero_bias(dim);
  m.W4 = glorot_uniform(dim, 10, rng);
  return m;
}

std::vector<Tensor> Model::params() const {
  return {E2, W1, b1, W2, b2, W3, b3, W4};
}

namespace {

// Shared Pred head: Lin4(ReLU(Lin3(x))); used for the node discretization
// logits, the intermediate readout and the final classification.
Tensor pred_logits(Tape* tape, const Model& m, const Tensor& x) {
  return matmul(tape, relu(tape, add(tape, matmul(tape, x, m.W3), m.b3)), m.W4);
}

}  // namespace

Forward forward_example(Tape* tape, const Model& model, const Example& ex,
                        const ForwardOptions& opt, Rng& rng) {
  const std::size_t n = ex.tokens.size();
  const bool training = opt.mode == DcMode::TrainRelaxed;
  const int total_passes = opt.passes_override > 0 ? opt.passes_override : model.cfg.passes;

  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::size_t>(ex.tokens[i]);

  // Edge list (receiver = parent, sender = child) and the scatter matrix
  // that sums per-edge messages into receiver rows.
  std::vector<std::size_t> recv, send;
  for (std::size_t j = 0; j < n; ++j) {
    if (ex.parent[j] >= 0) {
      recv.push_back(static_cast<std::size_t>(ex.parent[j]));
      send.push_back(j);
    }
  }
  const std::size_t num_edges = recv.size();
  Tensor scatter = Tensor::zeros({n, num_edges});
  for (std::size_t e = 0; e < num_edges; ++e) scatter.at(recv[e], e) = 1.0;

  std::vector<std::size_t> recv_tokens(num_edges);
  for (std::size_t e = 0; e < num_edges; ++e) recv_tokens[e] = ids[recv[e]];

  DcComponent dc;
  dc.k = 10;
  dc.mode = opt.mode;
  dc.g = [&model](Tape* t, const Tensor& u) { return pred_logits(t, model, u); };
  dc.h = [&model](Tape* t, const Tensor& z) {
    return matmul(t, z, embedding_lookup(t, model.E2, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  };

  Forward fwd;
  Tensor x = embedding_lookup(tape, model.E2, ids);
  for (int pass = 1; pass <= total_passes; ++pass) {
    Tensor x_prime = x;
    if (num_edges > 0) {
      Tensor msg_recv = model.cfg.message_uses_first_embedding
                            ? embedding_lookup(tape, model.E2, recv_tokens)
                            : row_select(tape, x, recv);
      Tensor msg_send = row_select(tape, x, send);
      Tensor h1 = relu(tape, add(tape, matmul(tape, concat(tape, msg_recv, msg_send, 1), model.W1),
                                 model.b1));
      if (training && model.cfg.message_dropout > 0.0) {
        h1 = dropout_mask_apply(tape, h1,
                                make_dropout_mask<double>(h1.shape(),
                                                          model.cfg.message_dropout, rng));
      }
      Tensor msgs = relu(tape, add(tape, matmul(tape, h1, model.W2), model.b2));
      x_prime = add(tape, x, matmul(tape, scatter, msgs));
      if (pass < total_passes) {
        fwd.xe_sites.push_back(msg_recv);
        fwd.xp_sites.push_back(x_prime);
      }
    }
    if (pass < total_passes) {
      DropResGate gate{training ? opt.alpha : 1.0};
      DcResult r = dc_forward(tape, dc, x_prime, gate, opt.beta, opt.tau, rng);
      x = r.v;
    } else {
      x = x_prime;
    }
  }
  fwd.final_theta = pred_logits(tape, model, x);
  fwd.root_logits = row_select(tape, fwd.final_theta, std::size_t{0});
  return fwd;
}

EvalResult evaluate(const Model& model, const std::vector<Example>& split,
                    const ForwardOptions& opt, Rng& rng) {
  EvalResult res;
  if (split.empty()) throw ContractError("evaluate: empty split");
  std::size_t task_hits = 0, inter_hits = 0, inter_total = 0;
  for (const auto& ex : split) {
    Forward fwd = forward_example(nullptr, model, ex, opt, rng);
    const auto& logits = fwd.root_logits.data();
    if (static_cast<int>(argmax_index(logits.data(), logits.size())) == ex.result) ++task_hits;
    for (const auto& [pos, value] : ex.intermediates) {
      const double* row = fwd.final_theta.data().data() + pos * 10;
      if (static_cast<int>(argmax_index(row, 10)) == value) ++inter_hits;
      ++inter_total;
    }
  }
  res.task_acc = static_cast<double>(task_hits) / static_cast<double>(split.size());
  res.inter_acc =
      inter_total == 0 ? 0.0 : static_cast<double>(inter_hits) / static_cast<double>(inter_total);
  return res;
}

double train_epoch(Model& model, Optimizer& opt, const std::vector<Example>& train,
                   ScheduleState& schedule, const TrainConfig& cfg, int epoch, Rng& rng,
                   ProbeSet* probes, MetricWriter* metrics, long* global_step) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the run's own stream.
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
    std::vector<Forward> fwds;
    std::vector<Tensor> losses;
    const std::size_t lo = b * cfg.batch_size;
    const std::size_t hi = std::min(train.size(), lo + cfg.batch_size);
    for (std::size_t i = lo; i < hi; ++i) {
      const Example& ex = train[order[i]];
      Forward fwd = forward_example(&tape, model, ex, fopt, rng);
      losses.push_back(cross_entropy_with_logits(&tape, fwd.root_logits,
                                                 static_cast<std::size_t>(ex.result)));
      fwds.push_back(std::move(fwd));
    }
    Tensor loss = mean(&tape, concat(&tape, losses, 0));
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    loss_sum += loss.value();

    if (probes) {
      for (const auto& fwd : fwds) {
        for (std::size_t k = 0; k < fwd.xp_sites.size(); ++k) {
          probes->at("pass-" + std::to_string(k + 1) + "/x_e").observe(fwd.xe_sites[k]);
          probes->at("pass-" + std::to_string(k + 1) + "/x_prime").observe(fwd.xp_sites[k]);
        }
      }
    }
    if (global_step) ++*global_step;
    if (metrics) {
      metrics->row({static_cast<double>(global_step ? *global_step : b), static_cast<double>(epoch),
                    loss.value(), sched.beta, sched.alpha, sched.tau});
    }
  }
  return loss_sum / static_cast<double>(batches);
}

}  // namespace scg::listops
