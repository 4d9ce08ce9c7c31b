#pragma once

#include "relrl/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace relrl {

/// Widths and vocabulary shared by every graph of one domain.
struct GraphSignature {
  int node_feature_width = 0;
  int edge_feature_width = 0;
  int num_edge_types = 1;
  int global_width = 0;

  bool operator==(const GraphSignature&) const = default;
};

struct EdgeSpec {
  int src = 0;
  int dst = 0;
  int type = 0;
  std::vector<double> features;
};

/// Symbolic state: featured nodes, typed directed featured edges and a global
/// context vector. Immutable once built.
class StateGraph {
 public:
  /// Validates endpoints, uniform feature widths and edge types in
  /// [0, num_edge_types). Throws ErrorCode::validation on violations.
  static StateGraph build(const std::vector<std::vector<double>>& node_features, const std::vector<EdgeSpec>& edges,
                          std::vector<double> global_context, int num_edge_types);

  /// Same validation, from flat row-major buffers (used by the domain encoders).
  static StateGraph from_arrays(Matd node_features, std::vector<int> src, std::vector<int> dst,
                                std::vector<int> type, Matd edge_features, std::vector<double> global_context,
                                int num_edge_types);

  int node_count() const { return static_cast<int>(node_features_.rows()); }
  int edge_count() const { return static_cast<int>(src_.size()); }
  const Matd& node_features() const { return node_features_; }
  const Matd& edge_features() const { return edge_features_; }
  const std::vector<int>& src() const { return src_; }
  const std::vector<int>& dst() const { return dst_; }
  const std::vector<int>& type() const { return type_; }
  const std::vector<double>& global_context() const { return global_; }
  GraphSignature signature() const;

  bool operator==(const StateGraph& other) const;

 private:
  StateGraph() = default;
  void validate() const;

  Matd node_features_;
  Matd edge_features_;
  std::vector<int> src_;
  std::vector<int> dst_;
  std::vector<int> type_;
  std::vector<double> global_;
  int num_edge_types_ = 1;
};

/// Disjoint union of B graphs. Node and edge order is the concatenation order of
/// the inputs; each graph keeps its own global slot.
class GraphBatch {
 public:
  int graph_count() const { return static_cast<int>(node_offset_.size()) - 1; }
  int node_count() const { return node_offset_.back(); }
  int edge_count() const { return static_cast<int>(src_.size()); }
  int node_offset(int graph) const { return node_offset_[graph]; }
  int nodes_in(int graph) const { return node_offset_[graph + 1] - node_offset_[graph]; }
  int edge_offset(int graph) const { return edge_offset_[graph]; }

  const std::vector<int>& src() const { return src_; }
  const std::vector<int>& dst() const { return dst_; }
  const std::vector<int>& type() const { return type_; }
  /// Graph index of every node.
  const std::vector<int>& node_graph() const { return node_graph_; }
  const Matd& node_features() const { return node_features_; }
  const Matd& edge_features() const { return edge_features_; }
  /// B x global_width.
  const Matd& globals() const { return globals_; }
  const GraphSignature& signature() const { return signature_; }

  /// Recovers the b-th input graph exactly.
  StateGraph unbatch(int graph) const;

 private:
  friend GraphBatch disjoint_union(std::span<const StateGraph> graphs);

  std::vector<int> node_offset_{0};
  std::vector<int> edge_offset_{0};
  std::vector<int> src_;
  std::vector<int> dst_;
  std::vector<int> type_;
  std::vector<int> node_graph_;
  Matd node_features_;
  Matd edge_features_;
  Matd globals_;
  GraphSignature signature_;
};

/// Throws ErrorCode::validation when widths or edge vocabularies differ.
GraphBatch disjoint_union(std::span<const StateGraph> graphs);
GraphBatch single(const StateGraph& graph);

/// Debug dump: a `nodes N W` header with one feature line per node, an
/// `edges E W T` header with one `src dst type [features...]` line per edge, and
/// a trailing `global W [values...]` line.
std::string dump(const StateGraph& graph);

}  // namespace relrl
