#pragma once

#include "relrl/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace relrl {

enum class ActionKind { elementary, parametric, set };

struct ActionSchema {
  std::string name;
  ActionKind kind = ActionKind::elementary;
  /// Number of node parameters; 0 for elementary and set actions.
  int arity = 0;
  /// False promises that every prefix admitted by the parameter masks at levels
  /// >= 1 leaves a non-empty mask at the next level, so only the first
  /// parameter level can be empty. True enables full look-ahead when computing
  /// the effective masks.
  bool may_dead_end = false;
};

/// Validates arity against kind; throws ErrorCode::schema.
void validate_schemas(std::span<const ActionSchema> schemas);

struct ActionChoice {
  int action_id = -1;
  std::vector<int> params;
  /// Selected nodes of a set action (size node_count), empty otherwise.
  Mask subset;
  double log_prob = 0.0;
  /// Level 0 is the schema choice; level l >= 1 the l-th parameter, or the
  /// whole subset for set actions.
  std::vector<double> level_log_probs;

  bool same_action(const ActionChoice& other) const {
    return action_id == other.action_id && params == other.params && subset == other.subset;
  }
};

/// Precondition masks of one state. `chosen` holds the parameters selected so
/// far, so the mask returned is for parameter level chosen.size() + 1.
class Preconditions {
 public:
  virtual ~Preconditions() = default;
  virtual int node_count() const = 0;
  virtual Mask schema_mask() const = 0;
  virtual Mask parameter_mask(int schema, std::span<const int> chosen) const = 0;
  /// Nodes that may be part of a set action's subset.
  virtual Mask set_mask(int schema) const = 0;
};

/// No preconditions: every schema, node and subset is admissible.
class Unconstrained final : public Preconditions {
 public:
  Unconstrained(int node_count, int schema_count) : nodes_(node_count), schemas_(schema_count) {}
  int node_count() const override { return nodes_; }
  Mask schema_mask() const override { return Mask(schemas_, 1); }
  Mask parameter_mask(int, std::span<const int>) const override { return Mask(nodes_, 1); }
  Mask set_mask(int) const override { return Mask(nodes_, 1); }

 private:
  int nodes_;
  int schemas_;
};

/// Masks that account for dead ends: a choice is kept only if the action can
/// still be completed. These are the masks the sampler's backtracking
/// effectively samples from, and the ones used for log-probabilities.
Mask effective_schema_mask(const Preconditions& pre, std::span<const ActionSchema> schemas);
Mask effective_parameter_mask(const Preconditions& pre, std::span<const ActionSchema> schemas, int schema,
                              std::span<const int> chosen);

/// Whether the action satisfies every precondition (no look-ahead needed).
bool satisfies(const Preconditions& pre, std::span<const ActionSchema> schemas, const ActionChoice& action);

/// log |A(s)|: the number of complete grounded actions, with a set action
/// counting every admissible subset.
double log_action_count(const Preconditions& pre, std::span<const ActionSchema> schemas);

/// Every complete grounded action (log-probabilities left at zero). Throws
/// ErrorCode::invalid_argument beyond `limit` actions.
std::vector<ActionChoice> enumerate_actions(const Preconditions& pre, std::span<const ActionSchema> schemas,
                                            std::size_t limit = 1u << 20);

}  // namespace relrl
