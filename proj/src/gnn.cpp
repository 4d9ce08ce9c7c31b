#include "relrl/gnn.hpp"

#include "relrl/error.hpp"

#include <array>

namespace relrl {

Topology Topology::of(const GraphBatch& batch) {
  Topology t;
  t.node_count = batch.node_count();
  t.graph_count = batch.graph_count();
  t.src = batch.src();
  t.dst = batch.dst();
  t.node_graph = batch.node_graph();
  return t;
}

Topology Topology::of_member(const GraphBatch& batch, int graph) {
  Topology t;
  const int off = batch.node_offset(graph);
  t.node_count = batch.nodes_in(graph);
  t.graph_count = 1;
  for (int k = batch.edge_offset(graph); k < batch.edge_offset(graph + 1); ++k) {
    t.src.push_back(batch.src()[k] - off);
    t.dst.push_back(batch.dst()[k] - off);
  }
  t.node_graph.assign(t.node_count, 0);
  return t;
}

template <typename T>
GraphInput prepare_input(Tape<T>& tape, const GraphBatch& batch) {
  const GraphSignature& sig = batch.signature();
  GraphInput in;
  in.topology = Topology::of(batch);
  in.node_features = tape.constant(batch.node_features().template cast<T>());
  Mat<T> edge = Mat<T>::Zero(batch.edge_count(), sig.num_edge_types + sig.edge_feature_width);
  for (int k = 0; k < batch.edge_count(); ++k) {
    edge(k, batch.type()[k]) = T(1);
    for (int c = 0; c < sig.edge_feature_width; ++c) {
      edge(k, sig.num_edge_types + c) = static_cast<T>(batch.edge_features()(k, c));
    }
  }
  in.edge_input = tape.constant(std::move(edge));
  in.globals = tape.constant(batch.globals().template cast<T>());
  return in;
}

void init_dense(ParameterStore& store, const std::string& prefix, int out, int in, std::mt19937_64& rng) {
  store.add(prefix + ".w", init_weight(out, in, rng));
  store.add(prefix + ".b", Matf::Zero(1, out));
}

void init_message_pass(ParameterStore& store, const std::string& prefix, int edge_input_width, int emb_size,
                       std::mt19937_64& rng) {
  // The message layer acts on [edge ; sender]; it is stored as two column
  // blocks of one layer so the sender part can be applied per node.
  Matf msg = init_weight(emb_size, edge_input_width + emb_size, rng);
  store.add(prefix + ".msg.w_edge", msg.leftCols(edge_input_width));
  store.add(prefix + ".msg.w_node", msg.rightCols(emb_size));
  store.add(prefix + ".msg.b", Matf::Zero(1, emb_size));
  init_dense(store, prefix + ".agg", emb_size, 3 * emb_size, rng);
  init_dense(store, prefix + ".att", 1, emb_size, rng);
  init_dense(store, prefix + ".feat", emb_size, emb_size, rng);
  init_dense(store, prefix + ".glb", emb_size, 2 * emb_size, rng);
}

template <typename T>
Embeddings message_pass_step(Tape<T>& tape, const Weights<T>& w, const Topology& topo, Var edge_input,
                             const Embeddings& emb, const std::string& prefix) {
  // W_msg [e ; v_src] = W_edge e + (W_node v)[src]
  const Var zero_bias = tape.constant(Mat<T>::Zero(1, tape.value(w.get(tape, prefix + ".msg.b")).cols()));
  Var sender = linear(tape, emb.nodes, w.get(tape, prefix + ".msg.w_node"), zero_bias);
  Var per_edge = linear(tape, edge_input, w.get(tape, prefix + ".msg.w_edge"), w.get(tape, prefix + ".msg.b"));
  Var messages = leaky_relu(tape, add(tape, per_edge, gather_rows(tape, sender, topo.src)));
  Var aggregated = segment_max(tape, messages, topo.dst, topo.node_count);

  Var node_global = gather_rows(tape, emb.global, topo.node_graph);
  const std::array<Var, 3> agg_in{emb.nodes, aggregated, node_global};
  Var nodes = add(tape, emb.nodes, apply_dense(tape, w, prefix + ".agg", concat_cols<T>(tape, agg_in)));

  Var attention = segment_softmax(tape, apply_linear(tape, w, prefix + ".att", nodes), topo.node_graph,
                                  topo.graph_count);
  Var features = apply_dense(tape, w, prefix + ".feat", nodes);
  Var pooled = segment_sum(tape, scale_rows(tape, features, attention), topo.node_graph, topo.graph_count);
  const std::array<Var, 2> glb_in{emb.global, pooled};
  Var global = add(tape, emb.global, apply_dense(tape, w, prefix + ".glb", concat_cols<T>(tape, glb_in)));
  return {nodes, global};
}

GnnEncoder::GnnEncoder(GraphSignature signature, int emb_size, int mp_steps)
    : signature_(signature), emb_size_(emb_size), mp_steps_(mp_steps) {
  if (emb_size < 1) fail(ErrorCode::invalid_argument, "emb_size must be positive");
  if (mp_steps < 0) fail(ErrorCode::invalid_argument, "mp_steps must be non-negative");
}

void GnnEncoder::init(ParameterStore& store, std::mt19937_64& rng) const {
  init_dense(store, "gnn.embed", emb_size_, signature_.node_feature_width, rng);
  if (signature_.global_width > emb_size_) init_dense(store, "gnn.embed_global", emb_size_, signature_.global_width, rng);
  for (int s = 0; s < mp_steps_; ++s) init_message_pass(store, step_prefix(s), edge_input_width(), emb_size_, rng);
}

template <typename T>
Embeddings GnnEncoder::embed_features(Tape<T>& tape, const Weights<T>& w, const GraphInput& input) const {
  if (tape.value(input.node_features).cols() != signature_.node_feature_width) {
    fail(ErrorCode::dimension, "encoder: node feature width does not match the feature layer");
  }
  Embeddings e;
  e.nodes = apply_dense(tape, w, "gnn.embed", input.node_features);
  const Mat<T>& g = tape.value(input.globals);
  if (g.cols() > emb_size_) {
    e.global = apply_dense(tape, w, "gnn.embed_global", input.globals);
  } else {
    Mat<T> padded = Mat<T>::Zero(g.rows(), emb_size_);
    padded.leftCols(g.cols()) = g;
    e.global = tape.constant(std::move(padded));
  }
  return e;
}

template <typename T>
Embeddings GnnEncoder::encode(Tape<T>& tape, const Weights<T>& w, const GraphInput& input) const {
  Embeddings e = embed_features(tape, w, input);
  for (int s = 0; s < mp_steps_; ++s) {
    e = message_pass_step(tape, w, input.topology, input.edge_input, e, step_prefix(s));
  }
  return e;
}

template GraphInput prepare_input<float>(Tape<float>&, const GraphBatch&);
template GraphInput prepare_input<double>(Tape<double>&, const GraphBatch&);
template Embeddings message_pass_step<float>(Tape<float>&, const Weights<float>&, const Topology&, Var,
                                             const Embeddings&, const std::string&);
template Embeddings message_pass_step<double>(Tape<double>&, const Weights<double>&, const Topology&, Var,
                                              const Embeddings&, const std::string&);
template Embeddings GnnEncoder::embed_features<float>(Tape<float>&, const Weights<float>&, const GraphInput&) const;
template Embeddings GnnEncoder::embed_features<double>(Tape<double>&, const Weights<double>&, const GraphInput&) const;
template Embeddings GnnEncoder::encode<float>(Tape<float>&, const Weights<float>&, const GraphInput&) const;
template Embeddings GnnEncoder::encode<double>(Tape<double>&, const Weights<double>&, const GraphInput&) const;

}  // namespace relrl
