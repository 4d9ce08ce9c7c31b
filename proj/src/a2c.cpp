#include "relrl/a2c.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <cmath>

namespace relrl {

void Hyperparams::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::invalid_argument, std::string("hyperparameter out of range: ") + what);
  };
  check(p_envs >= 1, "p_envs");
  check(rho >= 0.0 && rho <= 1.0, "rho");
  check(gamma > 0.0 && gamma <= 1.0, "gamma");
  check(epoch >= 1, "epoch");
  check(step_limit >= 1, "step_limit");
  check(mp_steps >= 0, "mp_steps");
  check(emb_size >= 1, "emb_size");
  check(lr_end > 0.0 && lr_end <= lr_start, "lr_start/lr_end");
  check(grad_max_norm > 0.0, "grad_max_norm");
  check(q_low < q_high, "q_range");
  check(alpha_v >= 0.0, "alpha_v");
  check(alpha_h_start >= 0.0 && alpha_h_end >= 0.0, "alpha_h");
  check(weight_decay >= 0.0, "weight_decay");
}

double lr_at(std::int64_t step, const Hyperparams& hp) {
  if (step < 0) fail(ErrorCode::invalid_argument, "lr_at: negative step");
  const std::int64_t halvings = step / (20 * static_cast<std::int64_t>(hp.epoch));
  if (halvings > 1000) return hp.lr_end;
  return std::max(hp.lr_end, hp.lr_start * std::pow(0.5, static_cast<double>(halvings)));
}

double alpha_h_at(std::int64_t step, const Hyperparams& hp) {
  if (step < 0) fail(ErrorCode::invalid_argument, "alpha_h_at: negative step");
  const double t = 1.0 + static_cast<double>(step / hp.epoch);
  return std::max(hp.alpha_h_end, hp.alpha_h_start / t);
}

double q_target(double reward, Termination terminal, double next_value, const Hyperparams& hp) {
  const double q = terminal == Termination::environment_terminal ? reward : reward + hp.gamma * next_value;
  return std::clamp(q, hp.q_low, hp.q_high);
}

double entropy_factor(double log_prob, double log_action_count, bool normalize) {
  if (log_action_count < 1e-12) return 0.0;
  return normalize ? log_prob / log_action_count : log_prob;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

namespace {

/// Builds the scalar whose gradient is that of -J + alpha_v L_V - alpha_h L_H
/// for one batch and fills the reported loss values.
template <typename T>
Var update_objective(Tape<T>& tape, std::span<const Var> log_probs, Var values, std::span<const double> q,
                     std::span<const double> log_counts, const Hyperparams& hp, double alpha_h,
                     const LossCoefficients& coeffs, A2CLosses& out) {
  const std::size_t b = log_probs.size();
  const double inv = 1.0 / static_cast<double>(b);
  std::vector<Var> terms;
  std::vector<T> weights;
  terms.reserve(2 * b);
  weights.reserve(2 * b);
  out = A2CLosses{};
  const Mat<T> v = tape.value(values);
  for (std::size_t i = 0; i < b; ++i) {
    const double lp = static_cast<double>(tape.value(log_probs[i])(0, 0));
    const double value = static_cast<double>(v(static_cast<Eigen::Index>(i), 0));
    const double adv = q[i] - value;
    const double ent = entropy_factor(lp, log_counts[i], hp.normalize_entropy);
    out.q.push_back(q[i]);
    out.values.push_back(value);
    out.advantages.push_back(adv);
    out.log_probs.push_back(lp);
    out.policy_loss -= adv * lp * inv;
    out.value_loss += adv * adv * inv;
    out.entropy -= ent * inv;
    terms.push_back(log_probs[i]);
    weights.push_back(static_cast<T>((-coeffs.policy * adv + coeffs.entropy * alpha_h * ent) * inv));
    terms.push_back(element(tape, values, static_cast<int>(i), 0));
    weights.push_back(static_cast<T>(-2.0 * coeffs.value * hp.alpha_v * adv * inv));
  }
  return weighted_sum<T>(tape, terms, weights);
}

}  // namespace

A2CLosses a2c_losses(std::span<const Transition> batch, const Model& model, ParameterStore& store,
                     const TargetStore& target, const Hyperparams& hp, double alpha_h, LossCoefficients coeffs) {
  if (batch.empty()) fail(ErrorCode::invalid_argument, "a2c_losses: empty batch");
  std::vector<StateGraph> states;
  std::vector<StateGraph> next;
  for (const Transition& t : batch) {
    states.push_back(t.state);
    next.push_back(t.next_state);
  }
  const GraphBatch sb = disjoint_union(states);
  const GraphBatch nb = disjoint_union(next);

  Tape<float> target_tape;
  const auto tw = Weights<float>::target(target);
  PolicyEvaluator<float> target_eval(target_tape, tw, model, nb);
  const Mat<float> next_values = target_tape.value(target_eval.values());

  Tape<float> tape;
  const auto w = Weights<float>::trainable(store);
  PolicyEvaluator<float> ev(tape, w, model, sb);
  std::vector<Var> log_probs;
  std::vector<double> q;
  std::vector<double> log_counts;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    if (!t.preconditions) fail(ErrorCode::invalid_argument, "a2c_losses: transition without preconditions");
    try {
      log_probs.push_back(action_log_prob(ev, static_cast<int>(i), *t.preconditions, t.action));
    } catch (const Error& e) {
      fail(e.code(), "transition " + std::to_string(i) + ": " + e.what());
    }
    q.push_back(q_target(t.reward, t.terminal, next_values(static_cast<Eigen::Index>(i), 0), hp));
    log_counts.push_back(log_action_count(*t.preconditions, model.schemas()));
  }
  A2CLosses out;
  Var objective = update_objective<float>(tape, log_probs, ev.values(), q, log_counts, hp, alpha_h, coeffs, out);
  tape.backward(objective);
  return out;
}

Trainer::Trainer(Model model, Hyperparams hp, const EnvFactory& make_env, std::uint64_t seed)
    : model_(std::move(model)), hp_(hp) {
  hp_.validate();
  std::mt19937_64 init_rng = make_rng(seed, 0);
  model_.init_parameters(params_, init_rng);
  start(make_env, seed);
}

Trainer::Trainer(Model model, Hyperparams hp, const EnvFactory& make_env, std::uint64_t seed, ParameterStore params)
    : model_(std::move(model)), hp_(hp), params_(std::move(params)) {
  hp_.validate();
  start(make_env, seed);
}

void Trainer::start(const EnvFactory& make_env, std::uint64_t seed) {
  target_ = TargetStore(params_);
  for (int i = 0; i < hp_.p_envs; ++i) {
    envs_.push_back(make_env());
    env_rngs_.push_back(make_rng(seed, 1, static_cast<std::uint64_t>(i)));
    policy_rngs_.push_back(make_rng(seed, 2, static_cast<std::uint64_t>(i)));
    envs_.back()->reset(env_rngs_.back());
  }
  returns_.assign(hp_.p_envs, 0.0);
  lengths_.assign(hp_.p_envs, 0);
}

StepMetrics Trainer::train_step() {
  const int b = hp_.p_envs;
  StepMetrics m;
  m.step = params_.step_count;
  m.lr = lr_at(params_.step_count, hp_);
  m.alpha_h = alpha_h_at(params_.step_count, hp_);

  std::vector<StateGraph> states;
  std::vector<std::shared_ptr<const Preconditions>> pre;
  std::vector<const Preconditions*> pre_ptr;
  std::vector<std::mt19937_64*> rngs;
  states.reserve(b);
  for (int i = 0; i < b; ++i) {
    states.push_back(envs_[i]->observe());
    pre.push_back(envs_[i]->preconditions());
    pre_ptr.push_back(pre.back().get());
    rngs.push_back(&policy_rngs_[i]);
  }
  const GraphBatch batch = disjoint_union(states);

  params_.zero_grad();
  Tape<float> tape;
  const auto w = Weights<float>::trainable(params_);
  PolicyEvaluator<float> ev(tape, w, model_, batch);
  const std::vector<SampledAction> actions = sample_actions(ev, pre_ptr, rngs);
  const Var values = ev.values();

  std::vector<StateGraph> next;
  std::vector<double> rewards(b);
  std::vector<Termination> term(b, Termination::none);
  next.reserve(b);
  for (int i = 0; i < b; ++i) {
    const StepOutcome out = envs_[i]->step(actions[i].choice, env_rngs_[i]);
    rewards[i] = out.reward;
    returns_[i] += out.reward;
    ++lengths_[i];
    if (out.terminal) {
      term[i] = Termination::environment_terminal;
    } else if (lengths_[i] >= hp_.step_limit) {
      term[i] = Termination::step_limit_truncation;
    }
    next.push_back(envs_[i]->observe());
    m.mean_reward += out.reward / b;
  }

  const GraphBatch next_batch = disjoint_union(next);
  Tape<float> target_tape;
  const auto tw = Weights<float>::target(target_);
  PolicyEvaluator<float> target_eval(target_tape, tw, model_, next_batch);
  const Mat<float> next_values = target_tape.value(target_eval.values());

  std::vector<Var> log_probs;
  std::vector<double> q;
  std::vector<double> log_counts;
  for (int i = 0; i < b; ++i) {
    log_probs.push_back(actions[i].log_prob);
    q.push_back(q_target(rewards[i], term[i], next_values(i, 0), hp_));
    log_counts.push_back(log_action_count(*pre[i], model_.schemas()));
  }
  A2CLosses losses;
  const Var objective =
      update_objective<float>(tape, log_probs, values, q, log_counts, hp_, m.alpha_h, coefficients, losses);
  tape.backward(objective);
  m.policy_loss = losses.policy_loss;
  m.value_loss = losses.value_loss;
  m.entropy = losses.entropy;
  m.grad_norm = grad_norm(params_);
  clip_grad_norm(params_, hp_.grad_max_norm);
  adamw_step(params_, m.lr, hp_.weight_decay);
  polyak_update(target_, params_, hp_.rho);

  for (int i = 0; i < b; ++i) {
    if (term[i] == Termination::none) continue;
    m.finished.push_back({returns_[i], lengths_[i], envs_[i]->solved()});
    returns_[i] = 0.0;
    lengths_[i] = 0;
    envs_[i]->reset(env_rngs_[i]);
  }
  return m;
}

}  // namespace relrl
