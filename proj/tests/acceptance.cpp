// Acceptance runner: one criterion per invocation (or all of them), one
// PASS/FAIL line each. Exit status is non-zero when any criterion fails.

#include "relrl/blockworld.hpp"
#include "relrl/harness.hpp"
#include "relrl/sokoban.hpp"
#include "relrl/sysadmin.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace relrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path work = "acceptance_work";
  std::uint64_t seed = 1;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Stops training once the epoch's mean return has not improved on the best
/// so far by more than `min_delta` for `patience` consecutive epochs.
struct Plateau {
  int patience = 3;
  double min_delta = 0.02;
  double best = -1e300;
  int stale = 0;

  bool keep_going(const EpochMetrics& m) {
    if (m.mean_return > best + min_delta) {
      best = m.mean_return;
      stale = 0;
    } else {
      ++stale;
    }
    return stale < patience;
  }
};

EpochCallback progress(const std::string& tag, std::function<bool(const EpochMetrics&)> more = {}) {
  return [tag, more](const EpochMetrics& m) {
    std::cerr << fmt("[%s] epoch %d step %lld return %.3f solved %.3f length %.2f\n", tag.c_str(), m.epoch,
                     static_cast<long long>(m.step), m.mean_return, m.solved_fraction, m.mean_length);
    return more ? more(m) : true;
  };
}

RunConfig run_config(const ConfigMap& settings, const Options& opt, const std::string& name) {
  ConfigMap all = settings;
  all["seed"] = std::to_string(opt.seed);
  all["out"] = (opt.work / name).string();
  return resolve_config({}, all);
}

// 1. Finite-difference check of the full pipeline in every domain.
Outcome gradients(const Options& opt) {
  const auto start = Clock::now();
  std::ostringstream detail;
  bool ok = true;
  for (Domain d : {Domain::blockworld, Domain::sokoban, Domain::sysadmin_s, Domain::sysadmin_m}) {
    const GradCheckReport r = pipeline_gradcheck(d, opt.seed, 1e-4);
    ok = ok && r.passed();
    detail << to_string(d) << ": " << r.coordinates << " coords, " << r.failures.size() << " failures, max err "
           << fmt("%.2e", r.max_error) << "; ";
  }
  const double t = seconds_since(start);
  detail << fmt("%.1f s (limit 60 s)", t);
  return {ok && t < 60.0, detail.str()};
}

// 2. sum_a pi(a|s) = 1 by enumeration.
Outcome normalization(const Options& opt) {
  const auto start = Clock::now();
  const std::pair<Domain, std::string> cases[] = {
      {Domain::blockworld, "3"}, {Domain::sysadmin_m, "8"}, {Domain::sokoban, "6x6/1"}};
  std::ostringstream detail;
  bool ok = true;
  for (const auto& [d, size] : cases) {
    const EnumCheckResult r = enumeration_check(d, parse_size(d, size), 100, opt.seed);
    ok = ok && r.settings == 100 && r.max_deviation <= 1e-6;
    detail << to_string(d) << " " << size << ": max |sum-1| " << fmt("%.2e", r.max_deviation) << " over up to "
           << r.max_actions << " actions; ";
  }
  const double t = seconds_since(start);
  detail << fmt("%.1f s (limit 300 s)", t);
  return {ok && t < 300.0, detail.str()};
}

class DeadEndFixture final : public Preconditions {
 public:
  int node_count() const override { return 3; }
  Mask schema_mask() const override { return Mask{1}; }
  Mask parameter_mask(int, std::span<const int> chosen) const override {
    if (chosen.empty()) return Mask{1, 1, 0};
    return chosen[0] == 0 ? Mask{0, 0, 0} : Mask{0, 0, 1};
  }
  Mask set_mask(int) const override { return Mask(3, 0); }
};

// 3. Sampled actions respect the preconditions; backtracking avoids dead ends.
Outcome soundness(const Options& opt) {
  std::mt19937_64 rng = make_rng(opt.seed, 30);
  const Model model(model_config(Domain::blockworld, 16, 3));
  int sampled = 0;
  int violations = 0;
  for (int round = 0; round < 100; ++round) {
    ParameterStore store;
    model.init_parameters(store, rng);
    std::vector<blockworld::State> states;
    std::vector<StateGraph> graphs;
    std::vector<std::unique_ptr<blockworld::MovePreconditions>> pre;
    std::vector<const Preconditions*> pre_ptr;
    std::vector<std::mt19937_64> rngs;
    std::vector<std::mt19937_64*> rng_ptr;
    for (int i = 0; i < 100; ++i) {
      states.push_back(blockworld::generate(2 + (round + i) % 7, rng));
      graphs.push_back(blockworld::encode(states.back()));
      pre.push_back(std::make_unique<blockworld::MovePreconditions>(states.back().on));
      pre_ptr.push_back(pre.back().get());
      rngs.emplace_back(rng());
    }
    for (auto& r : rngs) rng_ptr.push_back(&r);
    const GraphBatch batch = disjoint_union(graphs);
    Tape<float> tape;
    const auto w = Weights<float>::frozen(store);
    PolicyEvaluator<float> ev(tape, w, model, batch);
    const std::vector<SampledAction> actions = sample_actions(ev, pre_ptr, rng_ptr);
    for (int i = 0; i < 100; ++i) {
      ++sampled;
      const blockworld::Move m = blockworld::to_move(actions[i].choice);
      std::vector<int> next = states[i].on;
      const int n = states[i].n;
      bool legal = m.x >= 0 && m.x < n && m.y >= 0 && m.y <= n && m.x != m.y;
      if (legal) {
        next[m.x] = m.y;
        legal = oracle::bw::legal(n, next) && blockworld::is_free(states[i].on, m.x) &&
                (m.y == n || blockworld::is_free(states[i].on, m.y));
      }
      if (!legal) ++violations;
    }
  }

  const std::vector<ActionSchema> schemas{{"pair", ActionKind::parametric, 2, true}};
  const Model fixture_model(ModelConfig{GraphSignature{1, 0, 1, 0}, 8, 2, schemas});
  const StateGraph g = StateGraph::build({{1.0}, {0.0}, {0.5}}, {{0, 1, 0, {}}, {1, 2, 0, {}}, {2, 0, 0, {}}}, {}, 1);
  const GraphBatch one = single(g);
  const DeadEndFixture fixture;
  int dead_ends = 0;
  const int fixture_draws = 10000;
  for (int i = 0; i < fixture_draws; ++i) {
    ParameterStore store;
    fixture_model.init_parameters(store, rng);
    Tape<float> tape;
    const auto w = Weights<float>::frozen(store);
    PolicyEvaluator<float> ev(tape, w, fixture_model, one);
    const SampledAction a = sample_action(ev, 0, fixture, rng);
    if (a.choice.params[0] == 0) ++dead_ends;
  }
  return {violations == 0 && dead_ends == 0,
          fmt("%d BlockWorld samples, %d violations; %d fixture samples, %d dead-end emissions", sampled, violations,
              fixture_draws, dead_ends)};
}

// 4. Environment oracles.
Outcome environments(const Options& opt) {
  std::ostringstream detail;
  bool ok = true;

  // SysAdmin: one computer per (running deps, total deps) combination.
  sysadmin::State s;
  s.n = 10;
  s.on = {1, 0, 1, 1, 1, 0, 1, 1, 1, 1};
  // 2 <- {0}, 3 <- {1}, 4 <- {0, 1}, 6 <- {0, 2, 5}, 7 <- {1, 5, 9}
  s.deps = {{0, 2}, {1, 3}, {0, 4}, {1, 4}, {0, 6}, {2, 6}, {5, 6}, {1, 7}, {5, 7}, {9, 7}};
  std::vector<double> expected(10, 0.0);
  {
    std::vector<int> total(10, 0), running(10, 0);
    for (const auto& [i, j] : s.deps) {
      ++total[j];
      running[j] += s.on[i];
    }
    for (int c = 0; c < 10; ++c) expected[c] = s.on[c] ? 0.9 * (1.0 + running[c]) / (1.0 + total[c]) : 0.04;
  }
  const int trials = 100000;
  std::vector<int> on(10, 0);
  std::mt19937_64 rng = make_rng(opt.seed, 31);
  for (int t = 0; t < trials; ++t) {
    sysadmin::State next = s;
    sysadmin::step(next, Mask(10, 0), rng);
    for (int c = 0; c < 10; ++c) on[c] += next.on[c];
  }
  double worst_sigmas = 0.0;
  for (int c = 0; c < 10; ++c) {
    const double p = expected[c];
    const double sigma = std::sqrt(p * (1 - p) / trials);
    worst_sigmas = std::max(worst_sigmas, std::abs(static_cast<double>(on[c]) / trials - p) / sigma);
  }
  ok = ok && worst_sigmas < 3.0;
  detail << fmt("SysAdmin worst deviation %.2f sigma; ", worst_sigmas);

  // Sokoban: macro actions against rule-level expectations.
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const sokoban::State lvl = sokoban::generate_level(6 + trial % 4, 6 + trial % 4, 1 + trial % 3, rng);
    const auto cells = sokoban::walkable_cells(lvl);
    const sokoban::MacroAction a{static_cast<sokoban::MacroKind>(std::uniform_int_distribution<int>(0, 4)(rng)),
                                 cells[std::uniform_int_distribution<std::size_t>(0, cells.size() - 1)(rng)]};
    sokoban::State via_macro = lvl;
    const sokoban::MacroOutcome m = sokoban::macro_step(via_macro, a);
    const oracle::sok::Expected e = oracle::sok::expected_macro(lvl, a);
    sokoban::State via_plan = lvl;
    double plan_reward = 0.0;
    for (sokoban::Dir d : sokoban::macro_plan(lvl, a)) plan_reward += sokoban::elementary_step(via_plan, d).reward;
    if (!(via_macro == e.state) || !(via_plan == e.state) || std::abs(m.reward - e.reward) > 1e-9 ||
        std::abs(plan_reward - e.reward) > 1e-9 || m.terminal != e.terminal) {
      ++mismatches;
    }
  }
  ok = ok && mismatches == 0;
  detail << "Sokoban " << mismatches << "/1000 macro mismatches; ";

  // BlockWorld: breadth-first reachability against the closed-form count.
  for (int n : {3, 5}) {
    const std::size_t reached = oracle::bw::reachable(n).size();
    const std::uint64_t counted = blockworld::count_configurations(n);
    const std::uint64_t want = n == 3 ? 13 : 501;
    ok = ok && reached == counted && counted == want;
    detail << "BlockWorld N=" << n << ": BFS " << reached << ", formula " << counted << ", expected " << want << "; ";
  }
  return {ok, detail.str()};
}

EvalConfig eval_config(Domain d, const std::string& size, int episodes, std::uint64_t seed) {
  EvalConfig ec;
  ec.domain = d;
  ec.size = parse_size(d, size);
  ec.episodes = episodes;
  ec.seed = seed;
  return ec;
}

// 5. BlockWorld N=3 training.
Outcome blockworld_training(const Options& opt) {
  const auto start = Clock::now();
  Plateau plateau;
  const RunConfig cfg = run_config({{"domain", "blockworld"}, {"size", "3"}, {"epochs", "30"}}, opt, "blockworld3");
  const TrainResult r = train(cfg, progress("blockworld3", [&](const EpochMetrics& m) { return plateau.keep_going(m); }));
  const EvalReport rep = evaluate(r.trained.model, r.trained.params, eval_config(Domain::blockworld, "3", 500, 1000));
  const double solved = rep.solved_fraction.value_or(0.0);
  const double optimality = rep.optimality.value_or(0.0);
  return {solved >= 0.99 && optimality >= 0.90,
          fmt("%zu epochs, %.0f s; 500 instances: solved %.3f (>= 0.99), optimality %.3f (>= 0.90)", r.history.size(),
              seconds_since(start), solved, optimality)};
}

// 6. BlockWorld generalization from N=4 to N=6 and N=8.
Outcome blockworld_generalization(const Options& opt) {
  const auto start = Clock::now();
  Plateau plateau;
  const RunConfig cfg = run_config({{"domain", "blockworld"}, {"size", "4"}, {"epochs", "30"}}, opt, "blockworld4");
  const TrainResult r = train(cfg, progress("blockworld4", [&](const EpochMetrics& m) { return plateau.keep_going(m); }));
  const auto reports = generalize(r.trained.model, r.trained.params, eval_config(Domain::blockworld, "4", 200, 2000),
                                  {DomainSize{6, 0, 0, 0}, DomainSize{8, 0, 0, 0}});
  const double s6 = reports[0].solved_fraction.value_or(0.0);
  const double s8 = reports[1].solved_fraction.value_or(0.0);
  return {s6 >= 0.8 && s8 >= 0.6, fmt("%zu epochs at N=4, %.0f s; solved N=6 %.3f (>= 0.8), N=8 %.3f (>= 0.6)",
                                      r.history.size(), seconds_since(start), s6, s8)};
}

const ConfigMap kSysAdminRun{{"domain", "sysadmin_m"}, {"size", "10"}, {"epochs", "150"}, {"max_minutes", "55"}};

// 7. SysAdmin-M N=10 against the reset-offline baseline.
Outcome sysadmin_parity(const Options& opt) {
  const auto start = Clock::now();
  const RunConfig cfg = run_config(kSysAdminRun, opt, "sysadmin10");
  const TrainResult r = train(cfg, progress("sysadmin10"));
  const double minutes = seconds_since(start) / 60.0;
  const EvalReport rep = evaluate(r.trained.model, r.trained.params, eval_config(Domain::sysadmin_m, "10", 100, 3000));
  const double ratio = rep.normalized_score.value_or(0.0);
  return {ratio >= 0.95 && minutes <= 60.0,
          fmt("trained %.1f min (<= 60); 100 episodes: return %.2f, baseline %.2f, ratio %.4f (>= 0.95)", minutes,
              rep.mean_return, rep.baseline_return.value_or(0.0), ratio)};
}

// 8. The N=10 SysAdmin model at N=40.
Outcome sysadmin_transfer(const Options& opt) {
  const fs::path dir = opt.work / "sysadmin10" / "model";
  if (!fs::exists(dir)) return {false, "no trained model at " + dir.string() + " (run criterion 7 first)"};
  const TrainedModel m = load_model(dir);
  const auto reports =
      generalize(m.model, m.params, eval_config(Domain::sysadmin_m, "10", 100, 3000), {DomainSize{10, 0, 0, 0}, DomainSize{40, 0, 0, 0}});
  const double n10 = reports[0].normalized_score.value_or(0.0);
  const double n40 = reports[1].normalized_score.value_or(0.0);
  return {n40 >= 0.9 * n10, fmt("normalized score N=10 %.4f, N=40 %.4f, ratio %.4f (>= 0.9)", n10, n40, n40 / n10)};
}

// 9. Sokoban desk training on generated 6x6 one-box levels.
Outcome sokoban_training(const Options& opt) {
  const auto start = Clock::now();
  const ConfigMap settings{{"domain", "sokoban"},      {"size", "6x6/1"},      {"epochs", "10"},
                           {"max_minutes", "110"},     {"mp_steps", "5"},      {"emb_size", "32"},
                           {"lr_start", "1e-3"},       {"lr_end", "1e-4"},     {"alpha_h_start", "0.1"},
                           {"alpha_h_end", "0.05"},    {"step_limit", "50"}};
  const RunConfig cfg = run_config(settings, opt, "sokoban6");
  const TrainResult r = train(cfg, progress("sokoban6"));
  const double minutes = seconds_since(start) / 60.0;
  EvalConfig ec = eval_config(Domain::sokoban, "6x6/1", 500, 4000);
  ec.step_limit = 50;
  const EvalReport rep = evaluate(r.trained.model, r.trained.params, ec);
  const double solved = rep.solved_fraction.value_or(0.0);
  return {solved >= 0.8 && minutes <= 120.0,
          fmt("trained %.1f min (<= 120); 500 generated levels, 50 macro steps: solved %.3f (>= 0.8)", minutes, solved)};
}

// 10. Action selection time grows linearly with the number of computers.
Outcome linear_time(const Options& opt) {
  const Model model(model_config(Domain::sysadmin_m, 32, 5));
  std::mt19937_64 rng = make_rng(opt.seed, 32);
  ParameterStore store;
  model.init_parameters(store, rng);
  const auto w = Weights<float>::frozen(store);
  const int sizes[] = {10, 20, 40, 80, 160};
  std::map<int, double> median;
  for (int n : sizes) {
    const sysadmin::State s = sysadmin::generate(n, rng);
    const GraphBatch batch = single(sysadmin::encode(s));
    const Unconstrained pre(n, 1);
    std::vector<double> times;
    const int reps = std::max(30, 3000 / n);
    for (int i = 0; i < reps; ++i) {
      const auto t0 = Clock::now();
      Tape<float> tape;
      PolicyEvaluator<float> ev(tape, w, model, batch);
      const SampledAction a = sample_action(ev, 0, pre, rng);
      times.push_back(seconds_since(t0));
      if (a.choice.subset.size() != static_cast<std::size_t>(n)) return {false, "wrong subset size"};
    }
    std::nth_element(times.begin(), times.begin() + reps / 2, times.end());
    median[n] = times[reps / 2];
  }
  std::ostringstream detail;
  bool ok = true;
  for (int n : sizes) {
    const double bound = 2.0 * median[10] * n / 10.0;
    ok = ok && median[n] <= bound;
    detail << fmt("N=%d %.3f ms (bound %.3f); ", n, 1e3 * median[n], 1e3 * bound);
  }
  return {ok, detail.str()};
}

// 11. Bitwise reproducibility of per-step training metrics.
Outcome reproducibility(const Options& opt) {
  std::ostringstream detail;
  bool ok = true;
  for (Domain d : {Domain::blockworld, Domain::sokoban, Domain::sysadmin_s, Domain::sysadmin_m}) {
    const RunConfig cfg = resolve_config({}, {{"domain", to_string(d)}, {"p_envs", "16"}, {"seed", std::to_string(opt.seed)}});
    auto run = [&] {
      Trainer t(Model(model_config(d, cfg.hp.emb_size, cfg.hp.mp_steps)), cfg.hp,
                [&] { return make_environment(d, cfg.size); }, cfg.seed);
      std::vector<StepMetrics> steps;
      for (int i = 0; i < 100; ++i) steps.push_back(t.train_step());
      return std::make_pair(steps, t.parameters());
    };
    const auto [a, pa] = run();
    const auto [b, pb] = run();
    int differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const StepMetrics& x = a[i];
      const StepMetrics& y = b[i];
      bool same = x.step == y.step && x.policy_loss == y.policy_loss && x.value_loss == y.value_loss &&
                  x.entropy == y.entropy && x.grad_norm == y.grad_norm && x.lr == y.lr && x.alpha_h == y.alpha_h &&
                  x.mean_reward == y.mean_reward && x.finished.size() == y.finished.size();
      for (std::size_t k = 0; same && k < x.finished.size(); ++k) {
        same = x.finished[k].episode_return == y.finished[k].episode_return &&
               x.finished[k].length == y.finished[k].length && x.finished[k].solved == y.finished[k].solved;
      }
      if (!same) ++differing;
    }
    bool params_same = true;
    for (const auto& [name, e] : pa.entries()) params_same = params_same && e.value == pb.at(name).value;
    ok = ok && differing == 0 && params_same;
    detail << to_string(d) << ": " << differing << "/100 steps differ, parameters "
           << (params_same ? "identical" : "differ") << "; ";
  }
  return {ok, detail.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(const Options&);
};

const Criterion kCriteria[] = {
    {1, "gradient check", gradients},
    {2, "policy normalization", normalization},
    {3, "precondition soundness", soundness},
    {4, "environment oracles", environments},
    {5, "blockworld training", blockworld_training},
    {6, "blockworld generalization", blockworld_generalization},
    {7, "sysadmin baseline parity", sysadmin_parity},
    {8, "sysadmin size transfer", sysadmin_transfer},
    {9, "sokoban desk training", sokoban_training},
    {10, "linear-time action selection", linear_time},
    {11, "reproducibility", reproducibility},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> ids;
  Options opt;
  std::string work = opt.work.string();
  app.add_option("criteria", ids, "Criterion numbers (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--work", work, "Directory for training runs");
  app.add_option("--seed", opt.seed, "Seed");
  CLI11_PARSE(app, argc, argv);
  opt.work = work;
  fs::create_directories(opt.work);

  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), c.id) == ids.end()) continue;
    Outcome o;
    try {
      o = c.run(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
