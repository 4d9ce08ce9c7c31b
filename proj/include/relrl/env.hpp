#pragma once

#include "relrl/action.hpp"
#include "relrl/graph.hpp"

#include <memory>
#include <random>
#include <vector>

namespace relrl {

struct StepOutcome {
  double reward = 0.0;
  /// The environment itself ended the episode (goal reached).
  bool terminal = false;
};

/// A domain instance as seen by the trainer: a symbolic observation, the
/// action schemas with their preconditions, and a stochastic transition.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const std::vector<ActionSchema>& schemas() const = 0;
  virtual GraphSignature signature() const = 0;

  /// Replaces the current instance with a freshly generated one.
  virtual void reset(std::mt19937_64& rng) = 0;
  virtual StateGraph observe() const = 0;
  /// Precondition masks of the current state; the snapshot stays valid after
  /// the environment moves on.
  virtual std::shared_ptr<const Preconditions> preconditions() const = 0;
  virtual StepOutcome step(const ActionChoice& action, std::mt19937_64& rng) = 0;
  virtual bool solved() const { return false; }

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace relrl
