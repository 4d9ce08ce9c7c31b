#pragma once

#include "relrl/action.hpp"
#include "relrl/gnn.hpp"

#include <random>
#include <string>
#include <vector>

namespace relrl {

struct ModelConfig {
  GraphSignature signature;
  int emb_size = 32;
  int mp_steps = 3;
  std::vector<ActionSchema> schemas;
};

/// Encoder plus decoder heads. Parameter names:
///   gnn.*                         encoder
///   policy.action.{w,b}           schema logits from the global vector
///   policy.<schema>.p<l>.score    shared node-scoring layer for parameter l
///   policy.<schema>.p<l>.aug      one-hot augmentation layer (l >= 2)
///   policy.<schema>.p<l>.mp{0,1}  conditioning message passes (l >= 2)
///   policy.<schema>.set           sigmoid node scores of a set action
///   value.{w,b}                   state value from the global vector
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const GnnEncoder& encoder() const { return encoder_; }
  const std::vector<ActionSchema>& schemas() const { return config_.schemas; }
  int emb_size() const { return config_.emb_size; }

  void init_parameters(ParameterStore& store, std::mt19937_64& rng) const;

  /// B x S logits over schemas, one row per graph.
  template <typename T>
  Var schema_logits(Tape<T>& tape, const Weights<T>& w, Var global) const;

  /// B x 1 state values.
  template <typename T>
  Var value(Tape<T>& tape, const Weights<T>& w, Var global) const;

  /// n x 1 scores for parameter `level` (>= 1) of `schema`.
  template <typename T>
  Var parameter_scores(Tape<T>& tape, const Weights<T>& w, int schema, int level, Var nodes) const;

  /// n x 1 pre-sigmoid scores of a set action.
  template <typename T>
  Var set_scores(Tape<T>& tape, const Weights<T>& w, int schema, Var nodes) const;

  /// Embeddings for choosing parameter `level` (>= 2): every node gets the
  /// indicator row z (n x (level-1)) of the parameters chosen so far appended,
  /// is mapped back to emb_size by one non-linear layer, then passes through the
  /// two conditioning message-passing steps of (schema, level).
  template <typename T>
  Embeddings condition_on_selection(Tape<T>& tape, const Weights<T>& w, int schema, int level,
                                    const Topology& topology, Var edge_input, const Embeddings& emb,
                                    Var selection) const;

  std::string level_prefix(int schema, int level) const;

 private:
  void check_schema(int schema, ActionKind kind) const;

  ModelConfig config_;
  GnnEncoder encoder_;
};

/// Indicator matrix z (node_count x chosen.size()) with z(v, i) = 1 iff node v
/// was chosen as parameter i+1.
template <typename T>
Mat<T> selection_indicator(int node_count, std::span<const int> chosen);

}  // namespace relrl
