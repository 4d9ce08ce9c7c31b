#pragma once

#include "relrl/env.hpp"

#include <optional>
#include <string>
#include <vector>

namespace relrl::sokoban {

enum class Dir { left = 0, right = 1, up = 2, down = 3, noop = 4 };

/// Row-major binary layers; cells are indexed r * cols + c.
struct State {
  int rows = 0;
  int cols = 0;
  std::vector<char> wall;
  std::vector<char> goal;
  std::vector<char> box;
  int player = 0;

  int cell(int r, int c) const { return r * cols + c; }
  bool solved() const;
  int boxes_on_goals() const;
  bool operator==(const State&) const = default;
};

/// Checks dimensions, a single in-bounds player, no overlaps with walls and |B| = |G|.
void validate(const State& state);

inline constexpr double kStepReward = -0.1;
inline constexpr double kBoxOnGoalReward = 1.0;
inline constexpr double kSolveReward = 10.0;

/// Neighbour of `cell` in direction d, or -1 outside the grid.
int neighbour(const State& state, int cell, Dir d);
Dir opposite(Dir d);

/// One elementary move. Blocked moves leave the state unchanged but still pay
/// the step penalty.
StepOutcome elementary_step(State& state, Dir d);

/// Shortest walk to `cell` with boxes as obstacles; nullopt when unreachable.
std::optional<std::vector<Dir>> plan_move_to(const State& state, int cell);

enum class MacroKind { move_to = 0, push_left = 1, push_right = 2, push_up = 3, push_down = 4 };

struct MacroAction {
  MacroKind kind = MacroKind::move_to;
  int target = 0;  // cell index
};

/// The elementary actions a macro translates to. Anything not executable
/// (unreachable target, no box to push, blocked push, walk to the current
/// cell) becomes a single noop.
std::vector<Dir> macro_plan(const State& state, MacroAction action);

struct MacroOutcome {
  double reward = 0.0;
  bool terminal = false;
  int elementary_count = 0;
};

/// Executes macro_plan step by step, summing rewards and stopping once solved.
MacroOutcome macro_step(State& state, MacroAction action);

/// Non-wall cells in row-major order; node i of the graph is walkable_cells()[i].
std::vector<int> walkable_cells(const State& state);
StateGraph encode(const State& state);
GraphSignature signature();
const std::vector<ActionSchema>& schemas();

/// Boxoban text: '#' wall, '@' player, '$' box, '.' goal, '*' box on goal,
/// '+' player on goal, ' ' floor.
State load_level(const std::string& text);
std::string save_level(const State& state);
/// Several levels, each optionally preceded by a `; <id>` line.
std::vector<State> load_levels(const std::string& text);

/// Solvable level by reverse play: boxes start on goals and the player walks
/// randomly, pulling boxes, for a budgeted number of moves.
State generate_level(int width, int height, int num_boxes, std::mt19937_64& rng);

class SokobanEnv final : public Environment {
 public:
  /// Fresh generated levels of the given size on every reset.
  SokobanEnv(int width, int height, int num_boxes);
  /// Levels drawn uniformly from a fixed list on every reset.
  explicit SokobanEnv(std::vector<State> levels);

  const std::vector<ActionSchema>& schemas() const override { return sokoban::schemas(); }
  GraphSignature signature() const override { return sokoban::signature(); }
  void reset(std::mt19937_64& rng) override;
  StateGraph observe() const override { return encode(state_); }
  std::shared_ptr<const Preconditions> preconditions() const override;
  StepOutcome step(const ActionChoice& action, std::mt19937_64& rng) override;
  bool solved() const override { return state_.solved(); }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<SokobanEnv>(*this); }

  const State& state() const { return state_; }
  void set_state(State state);
  MacroAction to_macro(const ActionChoice& action) const;
  int last_elementary_count() const { return last_elementary_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int boxes_ = 0;
  std::vector<State> levels_;
  State state_;
  std::vector<int> cells_;
  int last_elementary_ = 0;
};

}  // namespace relrl::sokoban
