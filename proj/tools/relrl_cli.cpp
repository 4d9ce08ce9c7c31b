#include "relrl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace {

int report_failure(relrl_status status) {
  std::fprintf(stderr, "error (%s): %s\n", relrl_status_name(status), relrl_last_error());
  return static_cast<int>(status);
}

std::optional<uint64_t> env_seed() {
  const char* text = std::getenv("RELRL_SEED");
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (*end != '\0') {
    std::fprintf(stderr, "warning: ignoring non-numeric RELRL_SEED '%s'\n", text);
    return std::nullopt;
  }
  return v;
}

void print_report(const char* size, const relrl_report& r) {
  std::printf("size %s: episodes %d", size, r.episodes);
  if (r.has_solved) std::printf(", solved %.4f", r.solved_fraction);
  if (r.has_optimality) std::printf(", optimality %.4f", r.optimality);
  std::printf(", mean return %.4f, mean steps %.2f", r.mean_return, r.mean_steps);
  if (r.has_baseline) std::printf(", baseline %.4f, normalized %.4f", r.baseline_return, r.normalized_score);
  std::printf("\n");
}

int on_epoch(const relrl_epoch_metrics* m, void*) {
  std::fprintf(stderr, "epoch %d step %lld: episodes %d return %.3f solved %.3f length %.1f value_loss %.4g\n",
               m->epoch, static_cast<long long>(m->step), m->episodes, m->mean_return, m->solved_fraction,
               m->mean_length, m->value_loss);
  return 1;
}

struct EvalArgs {
  std::string ckpt;
  std::string domain;
  std::string size;
  std::string sizes;
  std::string levels;
  std::string report = "report.csv";
  int episodes = 100;
  std::optional<uint64_t> seed;
  bool greedy = false;
  bool no_optimality = false;
  int step_limit = 0;
};

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--ckpt", a.ckpt, "Checkpoint directory")->required();
  cmd->add_option("--domain", a.domain, "Domain (default: the model's)");
  cmd->add_option("--episodes", a.episodes, "Episodes per size")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Evaluation seed (default RELRL_SEED, else 0)");
  cmd->add_flag("--greedy", a.greedy, "Arg-max decoding instead of sampling");
  cmd->add_flag("--no-optimality", a.no_optimality, "Skip the exact BlockWorld planner");
  cmd->add_option("--step-limit", a.step_limit, "Episode step limit (default: the domain's)");
  cmd->add_option("--levels", a.levels, "Sokoban level file instead of generated levels");
  cmd->add_option("--report", a.report, "Report CSV path");
}

int run_eval(const EvalArgs& a, const std::string& sizes) {
  relrl_model* model = nullptr;
  relrl_status st = relrl_model_load(a.ckpt.c_str(), &model);
  if (st != RELRL_OK) return report_failure(st);
  relrl_eval_options o = relrl_eval_defaults();
  if (!a.domain.empty()) o.domain = a.domain.c_str();
  o.episodes = a.episodes;
  o.seed = a.seed ? *a.seed : env_seed().value_or(0);
  o.greedy = a.greedy ? 1 : 0;
  o.step_limit = a.step_limit;
  o.optimality = a.no_optimality ? 0 : 1;
  if (!a.levels.empty()) o.levels = a.levels.c_str();

  std::string list = sizes;
  if (list.empty()) {
    if (!a.domain.empty() && a.domain != relrl_model_domain(model)) {
      relrl_model_free(model);
      std::fprintf(stderr, "error: --size is required when evaluating on another domain\n");
      return 2;
    }
    list = relrl_model_size(model);
  }
  std::vector<relrl_report> reports(64);
  size_t count = 0;
  st = relrl_generalize(model, &o, list.c_str(), a.report.c_str(), reports.data(), reports.size(), &count);
  relrl_model_free(model);
  if (st != RELRL_OK) return report_failure(st);
  std::size_t i = 0;
  std::size_t start = 0;
  while (i < count && i < reports.size()) {
    const std::size_t comma = list.find(',', start);
    const std::string size = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    print_report(size.c_str(), reports[i]);
    ++i;
    start = comma == std::string::npos ? list.size() : comma + 1;
  }
  std::printf("report written to %s\n", a.report.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational deep reinforcement learning: training, evaluation and checks"};
  app.require_subcommand(1);

  std::string config_file;
  std::optional<uint64_t> train_seed;
  std::string out_dir;
  std::vector<std::string> assignments;
  bool print_only = false;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_file, "key = value configuration file");
  train->add_option("--seed", train_seed, "Run seed (default: config, then RELRL_SEED, then 0)");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--set", assignments, "Override a configuration key: key=value")->take_all();
  train->add_flag("--print-config", print_only, "Print the resolved configuration and exit");

  EvalArgs eval_args;
  std::string eval_size;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_eval_options(eval, eval_args);
  eval->add_option("--size", eval_size, "Instance size, e.g. 5 or 10x10/4 (default: the trained size)");

  EvalArgs gen_args;
  std::string gen_sizes;
  CLI::App* gen = app.add_subcommand("generalize", "Evaluate a checkpoint over several sizes");
  add_eval_options(gen, gen_args);
  gen->add_option("--sizes", gen_sizes, "Comma-separated sizes")->required();

  std::string gc_domain = "all";
  uint64_t gc_seed = 0;
  double gc_tolerance = 1e-4;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full pipeline");
  gc->add_option("--domain", gc_domain, "Domain or 'all'");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--tolerance", gc_tolerance, "Relative tolerance");

  std::string ec_domain;
  std::string ec_size;
  int ec_settings = 100;
  uint64_t ec_seed = 0;
  CLI::App* ec = app.add_subcommand("enumcheck", "Check that action probabilities sum to one by enumeration");
  ec->add_option("--domain", ec_domain, "Domain")->required();
  ec->add_option("--size", ec_size, "Instance size")->required();
  ec->add_option("--settings", ec_settings, "Random parameter settings")->check(CLI::PositiveNumber);
  ec->add_option("--seed", ec_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    relrl_config* cfg = nullptr;
    relrl_status st = relrl_config_create(&cfg);
    if (st != RELRL_OK) return report_failure(st);
    auto done = [&](relrl_status s) {
      relrl_config_free(cfg);
      return s == RELRL_OK ? 0 : report_failure(s);
    };
    if (!config_file.empty() && (st = relrl_config_read_file(cfg, config_file.c_str())) != RELRL_OK) return done(st);
    for (const std::string& kv : assignments) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
        relrl_config_free(cfg);
        return 2;
      }
      if ((st = relrl_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != RELRL_OK) return done(st);
    }
    if (train_seed && (st = relrl_config_set(cfg, "seed", std::to_string(*train_seed).c_str())) != RELRL_OK) {
      return done(st);
    }
    if (!out_dir.empty() && (st = relrl_config_set(cfg, "out", out_dir.c_str())) != RELRL_OK) return done(st);
    if (const auto s = env_seed(); s && (st = relrl_config_set_seed_fallback(cfg, *s)) != RELRL_OK) return done(st);

    size_t needed = 0;
    if ((st = relrl_config_format(cfg, nullptr, 0, &needed)) != RELRL_OK) return done(st);
    std::string text(needed, '\0');
    relrl_config_format(cfg, text.data(), text.size(), nullptr);
    text.resize(needed - 1);
    if (print_only) {
      std::fputs(text.c_str(), stdout);
      return done(RELRL_OK);
    }
    std::fprintf(stderr, "%s", text.c_str());
    relrl_model* model = nullptr;
    st = relrl_train(cfg, on_epoch, nullptr, &model);
    relrl_model_free(model);
    return done(st);
  }
  if (eval->parsed()) {
    return run_eval(eval_args, eval_size);
  }
  if (gen->parsed()) return run_eval(gen_args, gen_sizes);
  if (gc->parsed()) {
    std::vector<std::string> domains;
    if (gc_domain == "all") {
      domains = {"blockworld", "sokoban", "sysadmin_s", "sysadmin_m"};
    } else {
      domains = {gc_domain};
    }
    int failed = 0;
    for (const std::string& d : domains) {
      relrl_gradcheck_result r{};
      const relrl_status st = relrl_gradcheck(d.c_str(), gc_seed, gc_tolerance, &r);
      if (st != RELRL_OK) return report_failure(st);
      std::printf("%s: %zu coordinates, %zu failures, max error %.3g\n", d.c_str(), r.coordinates, r.failures,
                  r.max_error);
      failed += r.failures > 0 ? 1 : 0;
    }
    return failed == 0 ? 0 : 1;
  }
  if (ec->parsed()) {
    relrl_enumcheck_result r{};
    const relrl_status st = relrl_enumcheck(ec_domain.c_str(), ec_size.c_str(), ec_settings, ec_seed, &r);
    if (st != RELRL_OK) return report_failure(st);
    std::printf("%s %s: %d settings, up to %zu actions, max |sum - 1| = %.3g\n", ec_domain.c_str(), ec_size.c_str(),
                r.settings, r.max_actions, r.max_deviation);
    return r.max_deviation <= 1e-6 ? 0 : 1;
  }
  return 0;
}
