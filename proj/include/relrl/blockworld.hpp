#pragma once

#include "relrl/env.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace relrl::blockworld {

/// Blocks are 0..n-1; the ground is index n (also its node index in the graph).
/// on[x] is the block or ground that block x rests on.
struct State {
  int n = 0;
  std::vector<int> on;
  std::vector<int> goal_on;

  int ground() const { return n; }
  bool solved() const { return on == goal_on; }
  bool operator==(const State&) const = default;
};

struct Move {
  int x = 0;
  int y = 0;
};

enum EdgeType { current_above = 0, current_below = 1, goal_above = 2, goal_below = 3 };

inline constexpr double kStepReward = -0.1;
inline constexpr double kSolveReward = 10.0;
inline constexpr int kOracleMaxBlocks = 8;

/// Forest of stacks: no self support, at most one block on any block, no cycles.
bool is_legal(int n, const std::vector<int>& on);
bool is_free(const std::vector<int>& on, int node);

/// Random configuration: repeatedly take a uniform number of the remaining
/// blocks and stack them in random order on the ground.
std::vector<int> random_configuration(int n, std::mt19937_64& rng);
/// Independent start and goal configurations (they may coincide).
State generate(int n, std::mt19937_64& rng);

/// Applies move(x, y); returns the reward. Throws ErrorCode::illegal_action on
/// a precondition violation.
StepOutcome step(State& state, Move move);

StateGraph encode(const State& state);
GraphSignature signature();
const std::vector<ActionSchema>& schemas();

/// move(x, y): x a free block, y a free block or the ground, y != x.
class MovePreconditions final : public Preconditions {
 public:
  explicit MovePreconditions(std::vector<int> on);
  int node_count() const override { return n_ + 1; }
  Mask schema_mask() const override { return Mask{1}; }
  Mask parameter_mask(int schema, std::span<const int> chosen) const override;
  Mask set_mask(int) const override { return Mask(n_ + 1, 0); }

 private:
  int n_;
  std::vector<int> on_;
  Mask free_;
};

Move to_move(const ActionChoice& action);
ActionChoice to_action(Move move);

/// Shortest number of moves from state.on to state.goal_on by breadth-first
/// search. Throws ErrorCode::unsupported for n > kOracleMaxBlocks.
int optimal_steps(const State& state);

/// Number of legal configurations of n blocks:
/// sum_{i=1..n} C(n, i) (n-1)! / (i-1)!. Throws ErrorCode::invalid_argument if
/// the result does not fit in 64 bits.
std::uint64_t count_configurations(int n);

/// Every legal configuration (n <= kOracleMaxBlocks).
std::vector<std::vector<int>> enumerate_configurations(int n);

/// `n`, then `state` and `goal` lines of block:support pairs (G for ground).
std::string save(const State& state);
State load(const std::string& text);

class BlockWorldEnv final : public Environment {
 public:
  /// With resample_solved, reset() redraws instances whose start equals the goal.
  explicit BlockWorldEnv(int n, bool resample_solved = true);

  const std::vector<ActionSchema>& schemas() const override { return blockworld::schemas(); }
  GraphSignature signature() const override { return blockworld::signature(); }
  void reset(std::mt19937_64& rng) override;
  StateGraph observe() const override { return encode(state_); }
  std::shared_ptr<const Preconditions> preconditions() const override;
  StepOutcome step(const ActionChoice& action, std::mt19937_64& rng) override;
  bool solved() const override { return state_.solved(); }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<BlockWorldEnv>(*this); }

  const State& state() const { return state_; }
  void set_state(State state);

 private:
  int n_;
  bool resample_solved_;
  State state_;
};

}  // namespace relrl::blockworld
