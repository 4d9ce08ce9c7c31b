#pragma once

#include "relrl/env.hpp"
#include "relrl/model.hpp"
#include "relrl/optim.hpp"
#include "relrl/policy.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace relrl {

struct Hyperparams {
  int p_envs = 256;
  double rho = 0.005;
  double gamma = 0.99;
  int epoch = 1000;
  int step_limit = 100;
  int mp_steps = 3;
  int emb_size = 32;
  double lr_start = 3e-4;
  double lr_end = 1e-5;
  double grad_max_norm = 3.0;
  double q_low = -15.0;
  double q_high = 15.0;
  double alpha_v = 0.1;
  double alpha_h_start = 1e-4;
  double alpha_h_end = 5e-5;
  double weight_decay = 1e-4;
  /// Divide each state's entropy term by log |A(s)|.
  bool normalize_entropy = true;

  /// Throws ErrorCode::invalid_argument on out-of-range values.
  void validate() const;
};

enum class Termination { none, environment_terminal, step_limit_truncation };

struct Transition {
  StateGraph state;
  std::shared_ptr<const Preconditions> preconditions;
  ActionChoice action;
  double reward = 0.0;
  StateGraph next_state;
  Termination terminal = Termination::none;
};

/// max(lr_end, lr_start * 0.5^floor(step / (20 * epoch))).
double lr_at(std::int64_t step, const Hyperparams& hp);
/// max(alpha_h_end, alpha_h_start / t) with t = 1 + floor(step / epoch).
double alpha_h_at(std::int64_t step, const Hyperparams& hp);

/// r for environment-terminal transitions, r + gamma * next_value otherwise
/// (step-limit truncations bootstrap); clipped into [q_low, q_high].
double q_target(double reward, Termination terminal, double next_value, const Hyperparams& hp);

/// First factor of the sampled entropy gradient for one state:
/// log pi(a|s) / log |A(s)| when normalizing, log pi(a|s) otherwise, and 0 when
/// only one action exists.
double entropy_factor(double log_prob, double log_action_count, bool normalize);

/// Multipliers that isolate individual terms of the update in tests.
struct LossCoefficients {
  double policy = 1.0;
  double value = 1.0;
  double entropy = 1.0;
};

struct A2CLosses {
  /// -J estimate: -mean(A * log pi).
  double policy_loss = 0.0;
  /// mean (q - V)^2.
  double value_loss = 0.0;
  /// Sampled (normalized) entropy estimate: -mean(entropy_factor).
  double entropy = 0.0;
  std::vector<double> q;
  std::vector<double> values;
  std::vector<double> advantages;
  std::vector<double> log_probs;
};

/// Replays a batch: recomputes log pi and V under `store`, the bootstrap values
/// under `target`, and adds the gradient of -J + alpha_v L_V - alpha_h L_H into
/// store's gradients (the advantage and the entropy factor are constants).
/// Throws ErrorCode::consistency naming the transition whose action no longer
/// fits its masks.
A2CLosses a2c_losses(std::span<const Transition> batch, const Model& model, ParameterStore& store,
                     const TargetStore& target, const Hyperparams& hp, double alpha_h, LossCoefficients coeffs = {});

struct EpisodeRecord {
  double episode_return = 0.0;
  int length = 0;
  bool solved = false;
};

struct StepMetrics {
  std::int64_t step = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double alpha_h = 0.0;
  double mean_reward = 0.0;
  std::vector<EpisodeRecord> finished;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// Synchronous one-step advantage actor-critic over p_envs environments with a
/// Polyak-averaged target network.
class Trainer {
 public:
  Trainer(Model model, Hyperparams hp, const EnvFactory& make_env, std::uint64_t seed);
  /// Continues from existing parameters (e.g. a checkpoint).
  Trainer(Model model, Hyperparams hp, const EnvFactory& make_env, std::uint64_t seed, ParameterStore params);

  /// One environment step in every environment followed by one gradient step.
  StepMetrics train_step();

  const Model& model() const { return model_; }
  const Hyperparams& hyperparams() const { return hp_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  const TargetStore& target() const { return target_; }
  std::int64_t step_count() const { return params_.step_count; }
  Environment& environment(int i) { return *envs_[i]; }

  LossCoefficients coefficients;

 private:
  void start(const EnvFactory& make_env, std::uint64_t seed);

  Model model_;
  Hyperparams hp_;
  ParameterStore params_;
  TargetStore target_;
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<std::mt19937_64> env_rngs_;
  std::vector<std::mt19937_64> policy_rngs_;
  std::vector<double> returns_;
  std::vector<int> lengths_;
};

/// Seeded generator for one stream of a run: (seed, purpose, index) triples
/// give independent, reproducible streams.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0);

}  // namespace relrl
