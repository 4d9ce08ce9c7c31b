#include "relrl/graph.hpp"

#include "relrl/error.hpp"

#include <sstream>

namespace relrl {

StateGraph StateGraph::build(const std::vector<std::vector<double>>& node_features, const std::vector<EdgeSpec>& edges,
                             std::vector<double> global_context, int num_edge_types) {
  if (node_features.empty()) fail(ErrorCode::validation, "graph: at least one node is required");
  const std::size_t fw = node_features.front().size();
  Matd nf(static_cast<Eigen::Index>(node_features.size()), static_cast<Eigen::Index>(fw));
  for (std::size_t i = 0; i < node_features.size(); ++i) {
    if (node_features[i].size() != fw) fail(ErrorCode::validation, "graph: ragged node feature widths");
    for (std::size_t c = 0; c < fw; ++c) nf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = node_features[i][c];
  }
  const std::size_t ew = edges.empty() ? 0 : edges.front().features.size();
  Matd ef(static_cast<Eigen::Index>(edges.size()), static_cast<Eigen::Index>(ew));
  std::vector<int> src, dst, type;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].features.size() != ew) fail(ErrorCode::validation, "graph: ragged edge feature widths");
    for (std::size_t c = 0; c < ew; ++c) ef(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = edges[k].features[c];
    src.push_back(edges[k].src);
    dst.push_back(edges[k].dst);
    type.push_back(edges[k].type);
  }
  return from_arrays(std::move(nf), std::move(src), std::move(dst), std::move(type), std::move(ef),
                     std::move(global_context), num_edge_types);
}

StateGraph StateGraph::from_arrays(Matd node_features, std::vector<int> src, std::vector<int> dst,
                                   std::vector<int> type, Matd edge_features, std::vector<double> global_context,
                                   int num_edge_types) {
  StateGraph g;
  g.node_features_ = std::move(node_features);
  g.src_ = std::move(src);
  g.dst_ = std::move(dst);
  g.type_ = std::move(type);
  g.edge_features_ = std::move(edge_features);
  g.global_ = std::move(global_context);
  g.num_edge_types_ = num_edge_types;
  g.validate();
  return g;
}

void StateGraph::validate() const {
  const int n = node_count();
  if (n < 1) fail(ErrorCode::validation, "graph: at least one node is required");
  if (num_edge_types_ < 1) fail(ErrorCode::validation, "graph: edge type vocabulary must be non-empty");
  if (dst_.size() != src_.size() || type_.size() != src_.size() ||
      edge_features_.rows() != static_cast<Eigen::Index>(src_.size())) {
    fail(ErrorCode::validation, "graph: edge arrays disagree in length");
  }
  for (std::size_t k = 0; k < src_.size(); ++k) {
    if (src_[k] < 0 || src_[k] >= n || dst_[k] < 0 || dst_[k] >= n) {
      fail(ErrorCode::validation, "graph: edge " + std::to_string(src_[k]) + "->" + std::to_string(dst_[k]) +
                                      " has an endpoint outside [0, " + std::to_string(n) + ")");
    }
    if (type_[k] < 0 || type_[k] >= num_edge_types_) {
      fail(ErrorCode::validation, "graph: edge type " + std::to_string(type_[k]) + " outside vocabulary");
    }
  }
}

GraphSignature StateGraph::signature() const {
  return {static_cast<int>(node_features_.cols()), static_cast<int>(edge_features_.cols()), num_edge_types_,
          static_cast<int>(global_.size())};
}

bool StateGraph::operator==(const StateGraph& o) const {
  return node_features_ == o.node_features_ && edge_features_ == o.edge_features_ && src_ == o.src_ &&
         dst_ == o.dst_ && type_ == o.type_ && global_ == o.global_ && num_edge_types_ == o.num_edge_types_;
}

GraphBatch disjoint_union(std::span<const StateGraph> graphs) {
  if (graphs.empty()) fail(ErrorCode::validation, "disjoint_union: no graphs");
  GraphBatch b;
  b.signature_ = graphs.front().signature();
  int nodes = 0;
  int edges = 0;
  for (const StateGraph& g : graphs) {
    if (!(g.signature() == b.signature_)) {
      fail(ErrorCode::validation, "disjoint_union: graphs differ in feature widths or edge vocabulary");
    }
    nodes += g.node_count();
    edges += g.edge_count();
  }
  const GraphSignature& sig = b.signature_;
  b.node_features_.resize(nodes, sig.node_feature_width);
  b.edge_features_.resize(edges, sig.edge_feature_width);
  b.globals_.resize(static_cast<Eigen::Index>(graphs.size()), sig.global_width);
  b.src_.reserve(edges);
  b.dst_.reserve(edges);
  b.type_.reserve(edges);
  b.node_graph_.reserve(nodes);
  int gi = 0;
  for (const StateGraph& g : graphs) {
    const int off = b.node_offset_.back();
    const int eoff = b.edge_offset_.back();
    b.node_features_.middleRows(off, g.node_count()) = g.node_features();
    if (g.edge_count() > 0) b.edge_features_.middleRows(eoff, g.edge_count()) = g.edge_features();
    for (int k = 0; k < g.edge_count(); ++k) {
      b.src_.push_back(g.src()[k] + off);
      b.dst_.push_back(g.dst()[k] + off);
      b.type_.push_back(g.type()[k]);
    }
    for (int c = 0; c < sig.global_width; ++c) b.globals_(gi, c) = g.global_context()[c];
    b.node_graph_.insert(b.node_graph_.end(), g.node_count(), gi);
    b.node_offset_.push_back(off + g.node_count());
    b.edge_offset_.push_back(eoff + g.edge_count());
    ++gi;
  }
  return b;
}

GraphBatch single(const StateGraph& graph) { return disjoint_union(std::span<const StateGraph>(&graph, 1)); }

StateGraph GraphBatch::unbatch(int graph) const {
  if (graph < 0 || graph >= graph_count()) fail(ErrorCode::invalid_argument, "unbatch: graph index out of range");
  const int off = node_offset_[graph];
  const int n = nodes_in(graph);
  const int e0 = edge_offset_[graph];
  const int e1 = edge_offset_[graph + 1];
  std::vector<int> src, dst, type;
  for (int k = e0; k < e1; ++k) {
    src.push_back(src_[k] - off);
    dst.push_back(dst_[k] - off);
    type.push_back(type_[k]);
  }
  std::vector<double> global(globals_.cols());
  for (int c = 0; c < globals_.cols(); ++c) global[c] = globals_(graph, c);
  return StateGraph::from_arrays(node_features_.middleRows(off, n), std::move(src), std::move(dst), std::move(type),
                                 edge_features_.middleRows(e0, e1 - e0), std::move(global),
                                 signature_.num_edge_types);
}

std::string dump(const StateGraph& graph) {
  std::ostringstream out;
  out.precision(17);
  const GraphSignature sig = graph.signature();
  out << "nodes " << graph.node_count() << ' ' << sig.node_feature_width << '\n';
  for (int i = 0; i < graph.node_count(); ++i) {
    for (int c = 0; c < sig.node_feature_width; ++c) out << (c ? " " : "") << graph.node_features()(i, c);
    out << '\n';
  }
  out << "edges " << graph.edge_count() << ' ' << sig.edge_feature_width << ' ' << sig.num_edge_types << '\n';
  for (int k = 0; k < graph.edge_count(); ++k) {
    out << graph.src()[k] << ' ' << graph.dst()[k] << ' ' << graph.type()[k];
    for (int c = 0; c < sig.edge_feature_width; ++c) out << ' ' << graph.edge_features()(k, c);
    out << '\n';
  }
  out << "global " << sig.global_width;
  for (double v : graph.global_context()) out << ' ' << v;
  out << '\n';
  return out.str();
}

}  // namespace relrl
