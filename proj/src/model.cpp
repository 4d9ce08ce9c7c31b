#include "relrl/model.hpp"

#include "relrl/error.hpp"

#include <array>

namespace relrl {

Model::Model(ModelConfig config)
    : config_(std::move(config)), encoder_(config_.signature, config_.emb_size, config_.mp_steps) {
  validate_schemas(config_.schemas);
}

std::string Model::level_prefix(int schema, int level) const {
  return "policy." + config_.schemas[schema].name + ".p" + std::to_string(level);
}

void Model::check_schema(int schema, ActionKind kind) const {
  if (schema < 0 || schema >= static_cast<int>(config_.schemas.size())) {
    fail(ErrorCode::invalid_argument, "schema index " + std::to_string(schema) + " out of range");
  }
  if (config_.schemas[schema].kind != kind) {
    fail(ErrorCode::schema, "schema '" + config_.schemas[schema].name + "' has a different kind");
  }
}

void Model::init_parameters(ParameterStore& store, std::mt19937_64& rng) const {
  const int e = config_.emb_size;
  encoder_.init(store, rng);
  init_dense(store, "policy.action", static_cast<int>(config_.schemas.size()), e, rng);
  init_dense(store, "value", 1, e, rng);
  for (int s = 0; s < static_cast<int>(config_.schemas.size()); ++s) {
    const ActionSchema& sc = config_.schemas[s];
    if (sc.kind == ActionKind::set) init_dense(store, "policy." + sc.name + ".set", 1, e, rng);
    for (int l = 1; l <= sc.arity; ++l) {
      const std::string p = level_prefix(s, l);
      init_dense(store, p + ".score", 1, e, rng);
      if (l >= 2) {
        init_dense(store, p + ".aug", e, e + l - 1, rng);
        init_message_pass(store, p + ".mp0", encoder_.edge_input_width(), e, rng);
        init_message_pass(store, p + ".mp1", encoder_.edge_input_width(), e, rng);
      }
    }
  }
}

template <typename T>
Var Model::schema_logits(Tape<T>& tape, const Weights<T>& w, Var global) const {
  return apply_linear(tape, w, "policy.action", global);
}

template <typename T>
Var Model::value(Tape<T>& tape, const Weights<T>& w, Var global) const {
  return apply_linear(tape, w, "value", global);
}

template <typename T>
Var Model::parameter_scores(Tape<T>& tape, const Weights<T>& w, int schema, int level, Var nodes) const {
  check_schema(schema, ActionKind::parametric);
  if (level < 1 || level > config_.schemas[schema].arity) {
    fail(ErrorCode::invalid_argument, "parameter level " + std::to_string(level) + " out of range");
  }
  return apply_linear(tape, w, level_prefix(schema, level) + ".score", nodes);
}

template <typename T>
Var Model::set_scores(Tape<T>& tape, const Weights<T>& w, int schema, Var nodes) const {
  check_schema(schema, ActionKind::set);
  return apply_linear(tape, w, "policy." + config_.schemas[schema].name + ".set", nodes);
}

template <typename T>
Embeddings Model::condition_on_selection(Tape<T>& tape, const Weights<T>& w, int schema, int level,
                                         const Topology& topology, Var edge_input, const Embeddings& emb,
                                         Var selection) const {
  check_schema(schema, ActionKind::parametric);
  if (level < 2 || level > config_.schemas[schema].arity) {
    fail(ErrorCode::invalid_argument, "conditioning needs a parameter level in [2, arity]");
  }
  if (tape.value(selection).cols() != level - 1) {
    fail(ErrorCode::dimension, "selection indicator must have one column per chosen parameter");
  }
  const std::string p = level_prefix(schema, level);
  const std::array<Var, 2> parts{emb.nodes, selection};
  Embeddings e{apply_dense(tape, w, p + ".aug", concat_cols<T>(tape, parts)), emb.global};
  e = message_pass_step(tape, w, topology, edge_input, e, p + ".mp0");
  return message_pass_step(tape, w, topology, edge_input, e, p + ".mp1");
}

template <typename T>
Mat<T> selection_indicator(int node_count, std::span<const int> chosen) {
  Mat<T> z = Mat<T>::Zero(node_count, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i] < 0 || chosen[i] >= node_count) fail(ErrorCode::invalid_argument, "chosen node out of range");
    z(chosen[i], static_cast<Eigen::Index>(i)) = T(1);
  }
  return z;
}

#define RELRL_INSTANTIATE_MODEL(T)                                                                              \
  template Var Model::schema_logits<T>(Tape<T>&, const Weights<T>&, Var) const;                                \
  template Var Model::value<T>(Tape<T>&, const Weights<T>&, Var) const;                                        \
  template Var Model::parameter_scores<T>(Tape<T>&, const Weights<T>&, int, int, Var) const;                   \
  template Var Model::set_scores<T>(Tape<T>&, const Weights<T>&, int, Var) const;                              \
  template Embeddings Model::condition_on_selection<T>(Tape<T>&, const Weights<T>&, int, int, const Topology&, \
                                                       Var, const Embeddings&, Var) const;                     \
  template Mat<T> selection_indicator<T>(int, std::span<const int>);

RELRL_INSTANTIATE_MODEL(float)
RELRL_INSTANTIATE_MODEL(double)

#undef RELRL_INSTANTIATE_MODEL

}  // namespace relrl
