#include "relrl/a2c.hpp"
#include "relrl/blockworld.hpp"
#include "relrl/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace relrl;

namespace {

Hyperparams small_hp() {
  Hyperparams hp;
  hp.p_envs = 8;
  hp.epoch = 10;
  hp.step_limit = 6;
  hp.emb_size = 8;
  hp.mp_steps = 2;
  return hp;
}

Model blockworld_model(const Hyperparams& hp) {
  return Model(ModelConfig{blockworld::signature(), hp.emb_size, hp.mp_steps, blockworld::schemas()});
}

EnvFactory blockworld_envs(int n) {
  return [n] { return std::make_unique<blockworld::BlockWorldEnv>(n); };
}

std::vector<Transition> random_transitions(int count, std::mt19937_64& rng) {
  std::vector<Transition> out;
  for (int i = 0; i < count; ++i) {
    blockworld::BlockWorldEnv env(3);
    env.reset(rng);
    const StateGraph state = env.observe();
    const auto pre = env.preconditions();
    const auto all = enumerate_actions(*pre, blockworld::schemas());
    const ActionChoice action = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
    const double reward = env.step(action, rng).reward;
    const Termination terminal = env.solved() ? Termination::environment_terminal
                                 : i % 3 == 0 ? Termination::step_limit_truncation
                                              : Termination::none;
    Transition t{state, pre, action, reward, env.observe(), terminal};
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_SUITE("a2c") {
  TEST_CASE("learning rate halves every 20 epochs down to its floor") {
    Hyperparams hp;
    hp.epoch = 1000;
    hp.lr_start = 3e-4;
    hp.lr_end = 1e-5;
    CHECK(lr_at(0, hp) == doctest::Approx(3e-4));
    CHECK(lr_at(19999, hp) == doctest::Approx(3e-4));
    CHECK(lr_at(20000, hp) == doctest::Approx(1.5e-4));
    CHECK(lr_at(40000, hp) == doctest::Approx(7.5e-5));
    CHECK(lr_at(10'000'000, hp) == doctest::Approx(1e-5));
    CHECK_THROWS_AS(lr_at(-1, hp), Error);
  }

  TEST_CASE("entropy coefficient decays as start / (1 + epoch)") {
    Hyperparams hp;
    hp.epoch = 100;
    hp.alpha_h_start = 0.2;
    hp.alpha_h_end = 0.05;
    CHECK(alpha_h_at(0, hp) == doctest::Approx(0.2));
    CHECK(alpha_h_at(99, hp) == doctest::Approx(0.2));
    CHECK(alpha_h_at(100, hp) == doctest::Approx(0.1));
    CHECK(alpha_h_at(250, hp) == doctest::Approx(0.2 / 3));
    CHECK(alpha_h_at(100000, hp) == doctest::Approx(0.05));
  }

  TEST_CASE("targets: clipping, terminal states and truncation") {
    Hyperparams hp;
    hp.gamma = 0.9;
    hp.q_low = -15;
    hp.q_high = 15;
    CHECK(q_target(250.0, Termination::environment_terminal, 0.0, hp) == 15.0);
    CHECK(q_target(-250.0, Termination::none, 0.0, hp) == -15.0);
    CHECK(q_target(1.0, Termination::environment_terminal, 5.0, hp) == 1.0);
    CHECK(q_target(1.0, Termination::step_limit_truncation, 5.0, hp) == doctest::Approx(5.5));
    CHECK(q_target(1.0, Termination::none, 5.0, hp) == doctest::Approx(5.5));
  }

  TEST_CASE("entropy factor") {
    CHECK(entropy_factor(-2.0, std::log(8.0), false) == -2.0);
    CHECK(entropy_factor(-std::log(8.0), std::log(8.0), true) == doctest::Approx(-1.0));
    CHECK(entropy_factor(0.0, 0.0, true) == 0.0);
    CHECK(entropy_factor(0.0, 0.0, false) == 0.0);
  }

  TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    hp.q_low = 1;
    hp.q_high = 0;
    CHECK_THROWS_AS(hp.validate(), Error);
    hp = Hyperparams{};
    hp.gamma = 1.5;
    CHECK_THROWS_AS(hp.validate(), Error);
    hp = Hyperparams{};
    hp.p_envs = 0;
    CHECK_THROWS_AS(hp.validate(), Error);
  }

  TEST_CASE("loss gradients match per-transition gradients with advantages held fixed") {
    const Hyperparams hp = small_hp();
    const Model model = blockworld_model(hp);
    std::mt19937_64 rng(21);
    ParameterStore store;
    model.init_parameters(store, rng);
    TargetStore target(store);
    for (auto& [name, v] : target.values()) v.array() += 0.05f;
    const std::vector<Transition> batch = random_transitions(6, rng);
    const double alpha_h = 0.3;

    store.zero_grad();
    const A2CLosses losses = a2c_losses(batch, model, store, target, hp, alpha_h);

    ParameterStore oracle = store;
    oracle.zero_grad();
    const double inv = 1.0 / batch.size();
    double policy_loss = 0.0;
    double value_loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = batch[i];
      Tape<float> ttape;
      const auto tw = Weights<float>::target(target);
      const GraphBatch nb = single(t.next_state);
      PolicyEvaluator<float> tev(ttape, tw, model, nb);
      const double next_value = ttape.value(tev.values())(0, 0);
      const double q = q_target(t.reward, t.terminal, next_value, hp);
      CHECK(losses.q[i] == doctest::Approx(q).epsilon(1e-5));

      Tape<float> tape;
      const auto w = Weights<float>::trainable(oracle);
      const GraphBatch sb = single(t.state);
      PolicyEvaluator<float> ev(tape, w, model, sb);
      const Var lp = action_log_prob(ev, 0, *t.preconditions, t.action);
      const Var v = ev.values();
      const double lpv = tape.value(lp)(0, 0);
      const double value = tape.value(v)(0, 0);
      const double adv = q - value;
      const double ent = entropy_factor(lpv, log_action_count(*t.preconditions, model.schemas()), true);
      policy_loss -= adv * lpv * inv;
      value_loss += adv * adv * inv;
      const std::vector<Var> terms{lp, element(tape, v, 0, 0)};
      const std::vector<float> coeffs{static_cast<float>((-adv + alpha_h * ent) * inv),
                                      static_cast<float>(-2.0 * hp.alpha_v * adv * inv)};
      tape.backward(weighted_sum<float>(tape, terms, coeffs));
    }
    CHECK(losses.policy_loss == doctest::Approx(policy_loss).epsilon(1e-4));
    CHECK(losses.value_loss == doctest::Approx(value_loss).epsilon(1e-4));
    double worst = 0.0;
    for (const auto& [name, e] : store.entries()) {
      const Matf& expected = oracle.at(name).grad;
      const double scale = std::max(1e-3, static_cast<double>(expected.cwiseAbs().maxCoeff()));
      worst = std::max(worst, static_cast<double>((e.grad - expected).cwiseAbs().maxCoeff()) / scale);
    }
    CHECK(worst < 1e-3);
  }

  TEST_CASE("zero loss coefficients give zero gradients") {
    const Hyperparams hp = small_hp();
    const Model model = blockworld_model(hp);
    std::mt19937_64 rng(22);
    ParameterStore store;
    model.init_parameters(store, rng);
    const TargetStore target(store);
    const std::vector<Transition> batch = random_transitions(4, rng);
    store.zero_grad();
    a2c_losses(batch, model, store, target, hp, 0.1, LossCoefficients{0.0, 0.0, 0.0});
    for (const auto& [name, e] : store.entries()) CHECK(e.grad.cwiseAbs().maxCoeff() == 0.0f);
  }

  TEST_CASE("trainer is deterministic for a fixed seed") {
    const Hyperparams hp = small_hp();
    Trainer a(blockworld_model(hp), hp, blockworld_envs(3), 5);
    Trainer b(blockworld_model(hp), hp, blockworld_envs(3), 5);
    Trainer c(blockworld_model(hp), hp, blockworld_envs(3), 6);
    bool differs = false;
    for (int s = 0; s < 12; ++s) {
      const StepMetrics ma = a.train_step();
      const StepMetrics mb = b.train_step();
      const StepMetrics mc = c.train_step();
      CHECK(ma.policy_loss == mb.policy_loss);
      CHECK(ma.value_loss == mb.value_loss);
      CHECK(ma.grad_norm == mb.grad_norm);
      CHECK(ma.mean_reward == mb.mean_reward);
      CHECK(ma.finished.size() == mb.finished.size());
      differs = differs || ma.policy_loss != mc.policy_loss;
    }
    CHECK(differs);
    CHECK(a.step_count() == 12);
    for (const auto& [name, e] : a.parameters().entries()) CHECK(e.value == b.parameters().at(name).value);
  }

  TEST_CASE("trainer updates parameters and tracks the target network") {
    const Hyperparams hp = small_hp();
    Trainer t(blockworld_model(hp), hp, blockworld_envs(3), 7);
    const ParameterStore before = t.parameters();
    const StepMetrics m = t.train_step();
    CHECK(m.step == 0);
    CHECK(m.lr == doctest::Approx(hp.lr_start));
    CHECK(m.grad_norm > 0.0);
    bool moved = false;
    for (const auto& [name, e] : t.parameters().entries()) {
      moved = moved || e.value != before.at(name).value;
      // target = (1 - rho) * old target + rho * new value, with the old target equal to the initial values
      const Matf expected = (1.0f - static_cast<float>(hp.rho)) * before.at(name).value +
                            static_cast<float>(hp.rho) * e.value;
      CHECK((t.target().at(name) - expected).cwiseAbs().maxCoeff() < 1e-6f);
    }
    CHECK(moved);
  }

  TEST_CASE("episodes are cut at the step limit") {
    Hyperparams hp = small_hp();
    hp.step_limit = 2;
    hp.p_envs = 4;
    Trainer t(blockworld_model(hp), hp, blockworld_envs(5), 8);
    int finished = 0;
    for (int s = 0; s < 6; ++s) {
      for (const EpisodeRecord& e : t.train_step().finished) {
        CHECK(e.length <= 2);
        ++finished;
      }
    }
    CHECK(finished >= 12);
  }

  TEST_CASE("rng streams differ by purpose and index") {
    auto a = make_rng(1, 0, 0);
    auto b = make_rng(1, 1, 0);
    auto c = make_rng(1, 0, 1);
    auto d = make_rng(1, 0, 0);
    const auto va = a();
    CHECK(va != b());
    CHECK(va != c());
    CHECK(va == d());
  }
}
