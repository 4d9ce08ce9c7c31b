#pragma once

#include "relrl/action.hpp"
#include "relrl/model.hpp"

#include <map>
#include <random>
#include <span>
#include <tuple>
#include <vector>

namespace relrl {

struct ScoreRequest {
  int graph = 0;
  int schema = 0;
  std::vector<int> chosen;
};

/// One forward pass of the model over a batch of graphs. Encodes the whole
/// batch once and computes decoder scores lazily; conditioning passes for
/// several graphs at the same (schema, level) can be batched with prefetch().
/// The batch must outlive the evaluator.
template <typename T>
class PolicyEvaluator {
 public:
  PolicyEvaluator(Tape<T>& tape, const Weights<T>& weights, const Model& model, const GraphBatch& batch);

  Tape<T>& tape() { return tape_; }
  const Model& model() const { return model_; }
  const GraphBatch& batch() const { return batch_; }
  int graph_count() const { return batch_.graph_count(); }
  int node_count(int graph) const { return batch_.nodes_in(graph); }
  const Embeddings& embeddings() const { return emb_; }

  /// B x 1.
  Var values();
  /// 1 x S logits of one graph.
  Var schema_logits(int graph);
  /// n x 1 scores for parameter chosen.size() + 1 of `schema`.
  Var parameter_scores(int graph, int schema, std::span<const int> chosen);
  bool has_parameter_scores(int graph, int schema, std::span<const int> chosen) const;
  /// n x 1 pre-sigmoid scores of a set action.
  Var set_scores(int graph, int schema);

  void prefetch(std::span<const ScoreRequest> requests);

 private:
  using Key = std::tuple<int, int, std::vector<int>>;

  Tape<T>& tape_;
  const Weights<T>& weights_;
  const Model& model_;
  const GraphBatch& batch_;
  GraphInput input_;
  Embeddings emb_;
  Var values_;
  Var logits_;
  std::map<int, Var> logit_rows_;
  std::map<int, Var> first_level_;
  std::map<int, Var> set_level_;
  std::map<std::pair<int, int>, Var> set_rows_;
  std::map<Key, Var> cache_;
};

/// An action together with its log-probability recorded on the evaluator's tape.
struct SampledAction {
  ActionChoice choice;
  Var log_prob;
};

/// Auto-regressive sampling for every graph of the evaluator's batch: schema
/// from the global vector, then parameters one level at a time, each level
/// conditioned on the earlier choices. A choice that leaves the next level with
/// no admissible candidate is disabled and its level resampled, recursively up
/// to the schema level; exhausting that throws ErrorCode::no_valid_action.
/// Greedy mode takes the arg max (p > 0.5 for set members) instead of sampling.
template <typename T>
std::vector<SampledAction> sample_actions(PolicyEvaluator<T>& evaluator,
                                          std::span<const Preconditions* const> preconditions,
                                          std::span<std::mt19937_64* const> rngs, bool greedy = false);

template <typename T>
SampledAction sample_action(PolicyEvaluator<T>& evaluator, int graph, const Preconditions& preconditions,
                            std::mt19937_64& rng, bool greedy = false);

/// Exact differentiable log pi(a|s) with the effective masks the sampler draws
/// from. Throws ErrorCode::consistency when the action violates a mask.
/// `level_log_probs`, when given, receives the per-level terms.
template <typename T>
Var action_log_prob(PolicyEvaluator<T>& evaluator, int graph, const Preconditions& preconditions,
                    const ActionChoice& action, std::vector<double>* level_log_probs = nullptr);

}  // namespace relrl
