#include "relrl/policy.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <optional>

namespace relrl {

template <typename T>
PolicyEvaluator<T>::PolicyEvaluator(Tape<T>& tape, const Weights<T>& weights, const Model& model,
                                    const GraphBatch& batch)
    : tape_(tape), weights_(weights), model_(model), batch_(batch) {
  if (!(batch.signature() == model.config().signature)) {
    fail(ErrorCode::dimension, "graph signature does not match the model");
  }
  input_ = prepare_input(tape, batch);
  emb_ = model.encoder().encode(tape, weights, input_);
}

template <typename T>
Var PolicyEvaluator<T>::values() {
  if (!values_.valid()) values_ = model_.value(tape_, weights_, emb_.global);
  return values_;
}

template <typename T>
Var PolicyEvaluator<T>::schema_logits(int graph) {
  auto it = logit_rows_.find(graph);
  if (it != logit_rows_.end()) return it->second;
  if (!logits_.valid()) logits_ = model_.schema_logits(tape_, weights_, emb_.global);
  Var row = row_slice(tape_, logits_, graph, 1);
  logit_rows_.emplace(graph, row);
  return row;
}

template <typename T>
bool PolicyEvaluator<T>::has_parameter_scores(int graph, int schema, std::span<const int> chosen) const {
  return cache_.count(Key{graph, schema, std::vector<int>(chosen.begin(), chosen.end())}) != 0;
}

template <typename T>
Var PolicyEvaluator<T>::parameter_scores(int graph, int schema, std::span<const int> chosen) {
  Key key{graph, schema, std::vector<int>(chosen.begin(), chosen.end())};
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  if (chosen.empty()) {
    auto fl = first_level_.find(schema);
    if (fl == first_level_.end()) {
      fl = first_level_.emplace(schema, model_.parameter_scores(tape_, weights_, schema, 1, emb_.nodes)).first;
    }
    Var rows = row_slice(tape_, fl->second, batch_.node_offset(graph), batch_.nodes_in(graph));
    cache_.emplace(std::move(key), rows);
    return rows;
  }
  const ScoreRequest req{graph, schema, std::get<2>(key)};
  prefetch(std::span<const ScoreRequest>(&req, 1));
  return cache_.at(key);
}

template <typename T>
Var PolicyEvaluator<T>::set_scores(int graph, int schema) {
  auto it = set_rows_.find({graph, schema});
  if (it != set_rows_.end()) return it->second;
  auto sl = set_level_.find(schema);
  if (sl == set_level_.end()) {
    sl = set_level_.emplace(schema, model_.set_scores(tape_, weights_, schema, emb_.nodes)).first;
  }
  Var rows = row_slice(tape_, sl->second, batch_.node_offset(graph), batch_.nodes_in(graph));
  set_rows_.emplace(std::make_pair(graph, schema), rows);
  return rows;
}

template <typename T>
void PolicyEvaluator<T>::prefetch(std::span<const ScoreRequest> requests) {
  // Group the uncached conditioning requests by (schema, level).
  std::map<std::pair<int, int>, std::vector<const ScoreRequest*>> groups;
  for (const ScoreRequest& r : requests) {
    if (r.chosen.empty()) {
      parameter_scores(r.graph, r.schema, r.chosen);
      continue;
    }
    if (has_parameter_scores(r.graph, r.schema, r.chosen)) continue;
    auto& g = groups[{r.schema, static_cast<int>(r.chosen.size()) + 1}];
    const bool duplicate = std::any_of(g.begin(), g.end(), [&](const ScoreRequest* o) { return o->graph == r.graph; });
    if (duplicate) fail(ErrorCode::invalid_argument, "prefetch: two requests for one graph at the same level");
    g.push_back(&r);
  }
  for (const auto& [key, reqs] : groups) {
    const auto [schema, level] = key;
    Topology topo;
    topo.graph_count = static_cast<int>(reqs.size());
    std::vector<int> node_index;
    std::vector<int> edge_index;
    std::vector<int> graph_index;
    std::vector<int> local_offset;
    for (int k = 0; k < static_cast<int>(reqs.size()); ++k) {
      const int g = reqs[k]->graph;
      const int off = batch_.node_offset(g);
      const int local = static_cast<int>(node_index.size());
      local_offset.push_back(local);
      graph_index.push_back(g);
      for (int v = 0; v < batch_.nodes_in(g); ++v) {
        node_index.push_back(off + v);
        topo.node_graph.push_back(k);
      }
      for (int e = batch_.edge_offset(g); e < batch_.edge_offset(g + 1); ++e) {
        edge_index.push_back(e);
        topo.src.push_back(batch_.src()[e] - off + local);
        topo.dst.push_back(batch_.dst()[e] - off + local);
      }
    }
    topo.node_count = static_cast<int>(node_index.size());
    Mat<T> z = Mat<T>::Zero(topo.node_count, level - 1);
    for (int k = 0; k < static_cast<int>(reqs.size()); ++k) {
      z.middleRows(local_offset[k], batch_.nodes_in(reqs[k]->graph)) =
          selection_indicator<T>(batch_.nodes_in(reqs[k]->graph), reqs[k]->chosen);
    }
    Embeddings sub{gather_rows(tape_, emb_.nodes, node_index), gather_rows(tape_, emb_.global, graph_index)};
    Var edges = gather_rows(tape_, input_.edge_input, edge_index);
    Embeddings cond = model_.condition_on_selection(tape_, weights_, schema, level, topo, edges, sub,
                                                    tape_.constant(std::move(z)));
    Var scores = model_.parameter_scores(tape_, weights_, schema, level, cond.nodes);
    for (int k = 0; k < static_cast<int>(reqs.size()); ++k) {
      Var rows = reqs.size() == 1 ? scores
                                  : row_slice(tape_, scores, local_offset[k], batch_.nodes_in(reqs[k]->graph));
      cache_.emplace(Key{reqs[k]->graph, schema, reqs[k]->chosen}, rows);
    }
  }
}

namespace {

int draw_categorical(std::span<const double> scores, const Mask& allowed, std::mt19937_64& rng, bool greedy) {
  if (greedy) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
      if (allowed[i] && (best < 0 || scores[i] > scores[best])) best = i;
    }
    return best;
  }
  const std::vector<double> p = softmax_masked(scores, allowed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  int last = -1;
  for (int i = 0; i < static_cast<int>(p.size()); ++i) {
    if (!allowed[i]) continue;
    last = i;
    acc += p[i];
    if (u < acc) return i;
  }
  return last;
}

template <typename T>
std::vector<double> to_doubles(const Mat<T>& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) out[i] = static_cast<double>(m.data()[i]);
  return out;
}

/// Resumable per-graph sampler; yields whenever it needs scores the evaluator
/// has not computed yet so that those can be batched across graphs.
template <typename T>
class GraphSampler {
 public:
  GraphSampler(int graph, const Preconditions& pre, std::mt19937_64& rng, bool greedy)
      : graph_(graph), pre_(pre), rng_(rng), greedy_(greedy) {
    allowed_.push_back(pre.schema_mask());
  }

  bool done() const { return done_; }
  const std::optional<ScoreRequest>& need() const { return need_; }

  void advance(PolicyEvaluator<T>& ev) {
    need_.reset();
    const auto& schemas = ev.model().schemas();
    while (!done_) {
      const int level = static_cast<int>(allowed_.size()) - 1;
      if (!any(allowed_[level])) {
        if (level == 0) fail(ErrorCode::no_valid_action, "no action schema admits a complete grounding");
        allowed_.pop_back();
        if (level - 1 == 0) {
          allowed_[0][choice_.action_id] = 0;
          choice_.action_id = -1;
        } else {
          allowed_[level - 1][choice_.params.back()] = 0;
          choice_.params.pop_back();
        }
        continue;
      }
      Var scores;
      if (level == 0) {
        scores = ev.schema_logits(graph_);
      } else {
        if (!ev.has_parameter_scores(graph_, choice_.action_id, choice_.params)) {
          need_ = ScoreRequest{graph_, choice_.action_id, choice_.params};
          return;
        }
        scores = ev.parameter_scores(graph_, choice_.action_id, choice_.params);
      }
      const std::vector<double> values = to_doubles(ev.tape().value(scores));
      if (values.size() != allowed_[level].size()) fail(ErrorCode::dimension, "mask length differs from candidates");
      const int c = draw_categorical(values, allowed_[level], rng_, greedy_);
      if (level == 0) {
        choice_.action_id = c;
        const ActionSchema& sc = schemas[c];
        if (sc.kind == ActionKind::parametric) {
          allowed_.push_back(pre_.parameter_mask(c, choice_.params));
        } else {
          if (sc.kind == ActionKind::set) draw_subset(ev);
          done_ = true;
        }
      } else {
        choice_.params.push_back(c);
        if (static_cast<int>(choice_.params.size()) == schemas[choice_.action_id].arity) {
          done_ = true;
        } else {
          allowed_.push_back(pre_.parameter_mask(choice_.action_id, choice_.params));
        }
      }
    }
  }

  ActionChoice& choice() { return choice_; }

 private:
  void draw_subset(PolicyEvaluator<T>& ev) {
    const Mask allowed = pre_.set_mask(choice_.action_id);
    const std::vector<double> s = to_doubles(ev.tape().value(ev.set_scores(graph_, choice_.action_id)));
    choice_.subset.assign(s.size(), 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t v = 0; v < s.size(); ++v) {
      if (!allowed[v]) continue;
      const double p = sigmoid(s[v]);
      choice_.subset[v] = greedy_ ? (p > 0.5) : (unit(rng_) < p);
    }
  }

  int graph_;
  const Preconditions& pre_;
  std::mt19937_64& rng_;
  bool greedy_;
  bool done_ = false;
  std::vector<Mask> allowed_;
  ActionChoice choice_;
  std::optional<ScoreRequest> need_;
};

}  // namespace

template <typename T>
Var action_log_prob(PolicyEvaluator<T>& ev, int graph, const Preconditions& pre, const ActionChoice& action,
                    std::vector<double>* level_log_probs) {
  const auto& schemas = ev.model().schemas();
  if (action.action_id < 0 || action.action_id >= static_cast<int>(schemas.size())) {
    fail(ErrorCode::consistency, "action id " + std::to_string(action.action_id) + " out of range");
  }
  if (pre.node_count() != ev.node_count(graph)) {
    fail(ErrorCode::dimension, "preconditions and graph disagree on the node count");
  }
  const ActionSchema& sc = schemas[action.action_id];
  Tape<T>& tape = ev.tape();
  std::vector<Var> terms;
  terms.push_back(categorical_log_prob(tape, ev.schema_logits(graph), effective_schema_mask(pre, schemas),
                                       action.action_id));
  switch (sc.kind) {
    case ActionKind::elementary:
      if (!action.params.empty() || !action.subset.empty()) {
        fail(ErrorCode::consistency, "elementary action '" + sc.name + "' carries parameters");
      }
      break;
    case ActionKind::set:
      if (!action.params.empty() || static_cast<int>(action.subset.size()) != ev.node_count(graph)) {
        fail(ErrorCode::consistency, "set action '" + sc.name + "' needs one subset flag per node");
      }
      terms.push_back(bernoulli_log_prob(tape, ev.set_scores(graph, action.action_id), action.subset,
                                         pre.set_mask(action.action_id)));
      break;
    case ActionKind::parametric: {
      if (static_cast<int>(action.params.size()) != sc.arity || !action.subset.empty()) {
        fail(ErrorCode::consistency, "action '" + sc.name + "' needs exactly " + std::to_string(sc.arity) +
                                         " parameters");
      }
      for (int l = 0; l < sc.arity; ++l) {
        const std::span<const int> prefix(action.params.data(), l);
        Var scores = ev.parameter_scores(graph, action.action_id, prefix);
        terms.push_back(categorical_log_prob(tape, scores,
                                             effective_parameter_mask(pre, schemas, action.action_id, prefix),
                                             action.params[l]));
      }
      break;
    }
  }
  if (level_log_probs != nullptr) {
    level_log_probs->clear();
    for (Var v : terms) level_log_probs->push_back(static_cast<double>(tape.value(v)(0, 0)));
  }
  if (terms.size() == 1) return terms.front();
  const std::vector<T> ones(terms.size(), T(1));
  return weighted_sum<T>(tape, terms, ones);
}

template <typename T>
std::vector<SampledAction> sample_actions(PolicyEvaluator<T>& ev, std::span<const Preconditions* const> pre,
                                          std::span<std::mt19937_64* const> rngs, bool greedy) {
  const int b = ev.graph_count();
  if (static_cast<int>(pre.size()) != b || static_cast<int>(rngs.size()) != b) {
    fail(ErrorCode::invalid_argument, "sample_actions: one precondition set and rng per graph required");
  }
  std::vector<GraphSampler<T>> samplers;
  samplers.reserve(b);
  for (int g = 0; g < b; ++g) {
    if (pre[g]->node_count() != ev.node_count(g)) {
      fail(ErrorCode::dimension, "preconditions and graph disagree on the node count");
    }
    samplers.emplace_back(g, *pre[g], *rngs[g], greedy);
  }
  for (;;) {
    std::vector<ScoreRequest> needs;
    for (auto& s : samplers) {
      if (s.done()) continue;
      s.advance(ev);
      if (s.need()) needs.push_back(*s.need());
    }
    if (needs.empty()) break;
    ev.prefetch(needs);
  }
  std::vector<SampledAction> out;
  out.reserve(b);
  for (int g = 0; g < b; ++g) {
    SampledAction sa;
    sa.choice = std::move(samplers[g].choice());
    sa.log_prob = action_log_prob(ev, g, *pre[g], sa.choice, &sa.choice.level_log_probs);
    sa.choice.log_prob = static_cast<double>(ev.tape().value(sa.log_prob)(0, 0));
    out.push_back(std::move(sa));
  }
  return out;
}

template <typename T>
SampledAction sample_action(PolicyEvaluator<T>& ev, int graph, const Preconditions& pre, std::mt19937_64& rng,
                            bool greedy) {
  GraphSampler<T> sampler(graph, pre, rng, greedy);
  while (true) {
    sampler.advance(ev);
    if (sampler.done()) break;
    ev.parameter_scores(graph, sampler.need()->schema, sampler.need()->chosen);
  }
  SampledAction sa;
  sa.choice = std::move(sampler.choice());
  sa.log_prob = action_log_prob(ev, graph, pre, sa.choice, &sa.choice.level_log_probs);
  sa.choice.log_prob = static_cast<double>(ev.tape().value(sa.log_prob)(0, 0));
  return sa;
}

#define RELRL_INSTANTIATE_POLICY(T)                                                                              \
  template class PolicyEvaluator<T>;                                                                             \
  template std::vector<SampledAction> sample_actions<T>(PolicyEvaluator<T>&, std::span<const Preconditions* const>, \
                                                        std::span<std::mt19937_64* const>, bool);                \
  template SampledAction sample_action<T>(PolicyEvaluator<T>&, int, const Preconditions&, std::mt19937_64&, bool); \
  template Var action_log_prob<T>(PolicyEvaluator<T>&, int, const Preconditions&, const ActionChoice&,           \
                                  std::vector<double>*);

RELRL_INSTANTIATE_POLICY(float)
RELRL_INSTANTIATE_POLICY(double)

#undef RELRL_INSTANTIATE_POLICY

}  // namespace relrl
