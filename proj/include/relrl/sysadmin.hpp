#pragma once

#include "relrl/env.hpp"

#include <string>
#include <utility>
#include <vector>

namespace relrl::sysadmin {

enum class Mode { single, multi };

/// deps holds (i, j) pairs meaning computer j depends on computer i.
struct State {
  int n = 0;
  std::vector<std::pair<int, int>> deps;
  std::vector<char> on;

  bool operator==(const State&) const = default;
};

inline constexpr double kResetCost = 0.75;
inline constexpr double kStayOnFactor = 0.9;
inline constexpr double kRebootProbability = 0.04;

/// Probability that a running computer with `deps_total` dependencies, of
/// which `deps_on` run, is still running after one step.
double stay_on_probability(int deps_on, int deps_total);

/// Sum of running computers minus 0.75 per reset, both from the state before
/// the transition.
double reward(const State& state, const Mask& resets);

/// Advances one step. Reset computers are on afterwards; the others follow the
/// stochastic dynamics evaluated on the pre-step state. Returns the reward.
double step(State& state, const Mask& resets, std::mt19937_64& rng);

/// Each computer gets 1..3 (uniform) distinct other computers depending on it.
/// All computers start running.
State generate(int n, std::mt19937_64& rng);

StateGraph encode(const State& state);
GraphSignature signature();
/// single: noop + reset(c); multi: one set action reset(X).
const std::vector<ActionSchema>& schemas(Mode mode);

/// Reset mask of a decoded action.
Mask resets_of(const ActionChoice& action, Mode mode, int n);

/// Baselines: single resets a uniformly random offline computer (noop when all
/// run); multi resets every offline computer.
ActionChoice baseline_action(const State& state, Mode mode, std::mt19937_64& rng);

/// `n`, then one `i j` dependency per line.
std::string save(const State& state);
State load(const std::string& text);

class SysAdminEnv final : public Environment {
 public:
  SysAdminEnv(int n, Mode mode);

  const std::vector<ActionSchema>& schemas() const override { return sysadmin::schemas(mode_); }
  GraphSignature signature() const override { return sysadmin::signature(); }
  void reset(std::mt19937_64& rng) override;
  StateGraph observe() const override { return encode(state_); }
  std::shared_ptr<const Preconditions> preconditions() const override;
  StepOutcome step(const ActionChoice& action, std::mt19937_64& rng) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<SysAdminEnv>(*this); }

  Mode mode() const { return mode_; }
  const State& state() const { return state_; }
  void set_state(State state);

 private:
  int n_;
  Mode mode_;
  State state_;
};

}  // namespace relrl::sysadmin
