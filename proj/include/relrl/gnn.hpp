#pragma once

#include "relrl/graph.hpp"
#include "relrl/parameters.hpp"
#include "relrl/tape.hpp"
#include "relrl/weights.hpp"

#include <random>
#include <string>
#include <vector>

namespace relrl {

/// Index structure of a (batched) graph as consumed by message passing.
struct Topology {
  int node_count = 0;
  int graph_count = 0;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> node_graph;

  static Topology of(const GraphBatch& batch);
  /// The b-th member of a batch with locally renumbered nodes.
  static Topology of_member(const GraphBatch& batch, int graph);
};

/// Node embeddings (node_count x emb) and one global row per graph (graph_count x emb).
struct Embeddings {
  Var nodes;
  Var global;
};

/// Tape constants for one batch: features and the per-edge input (one-hot edge
/// type followed by the raw edge features).
struct GraphInput {
  Topology topology;
  Var node_features;
  Var edge_input;
  Var globals;
};

template <typename T>
GraphInput prepare_input(Tape<T>& tape, const GraphBatch& batch);

/// One round of message passing with parameters under `prefix`:
///   m_v = max over incoming edges e of LeakyReLU(W_msg [e ; v_src] + b)   (0 if none)
///   v'  = v + LeakyReLU(W_agg [v ; m_v ; g] + b)
///   a   = softmax over the graph's nodes of (W_att v' + b)
///   g'  = g + LeakyReLU(W_glb [g ; sum_v a_v LeakyReLU(W_feat v' + b)] + b)
/// Node updates all read the pre-step embeddings.
template <typename T>
Embeddings message_pass_step(Tape<T>& tape, const Weights<T>& w, const Topology& topo, Var edge_input,
                             const Embeddings& emb, const std::string& prefix);

/// Registers the parameters of one message-passing step.
void init_message_pass(ParameterStore& store, const std::string& prefix, int edge_input_width, int emb_size,
                       std::mt19937_64& rng);

void init_dense(ParameterStore& store, const std::string& prefix, int out, int in, std::mt19937_64& rng);

class GnnEncoder {
 public:
  GnnEncoder(GraphSignature signature, int emb_size, int mp_steps);

  const GraphSignature& signature() const { return signature_; }
  int emb_size() const { return emb_size_; }
  int mp_steps() const { return mp_steps_; }
  int edge_input_width() const { return signature_.num_edge_types + signature_.edge_feature_width; }
  std::string step_prefix(int step) const { return "gnn.step" + std::to_string(step); }

  void init(ParameterStore& store, std::mt19937_64& rng) const;

  /// Shared non-linear feature layer per node; the global slot starts as the
  /// zero-padded global context (or its projection when wider than emb_size).
  template <typename T>
  Embeddings embed_features(Tape<T>& tape, const Weights<T>& w, const GraphInput& input) const;

  template <typename T>
  Embeddings encode(Tape<T>& tape, const Weights<T>& w, const GraphInput& input) const;

 private:
  GraphSignature signature_;
  int emb_size_;
  int mp_steps_;
};

}  // namespace relrl
