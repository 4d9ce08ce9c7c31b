#include "relrl/harness.hpp"

#include "relrl/blockworld.hpp"
#include "relrl/error.hpp"
#include "relrl/sysadmin.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace relrl {

namespace {

// Stream purposes for make_rng beyond the trainer's 0..2.
constexpr std::uint64_t kEvalInstances = 10;
constexpr std::uint64_t kEvalTransitions = 11;
constexpr std::uint64_t kEvalPolicy = 12;
constexpr std::uint64_t kEvalBaseline = 13;
constexpr std::uint64_t kCheckStream = 20;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) fail(ErrorCode::parse, "config: bad value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  fail(ErrorCode::parse, "config: bad boolean for " + key + ": '" + text + "'");
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) fail(ErrorCode::invalid_argument, "cannot format number");
  return std::string(buf.data(), ptr);
}

std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool is_sysadmin(Domain d) { return d == Domain::sysadmin_s || d == Domain::sysadmin_m; }

sysadmin::Mode sysadmin_mode(Domain d) { return d == Domain::sysadmin_s ? sysadmin::Mode::single : sysadmin::Mode::multi; }

/// Table value for the nearest listed computer count.
double sysadmin_alpha_h_start(Domain d, int n) {
  static constexpr std::array<int, 6> sizes{5, 10, 20, 40, 80, 160};
  static constexpr std::array<double, 6> single{0.3, 0.3, 1.0, 1.0, 2.0, 2.0};
  static constexpr std::array<double, 6> multi{0.3, 0.3, 3.0, 10.0, 20.0, 24.0};
  std::size_t best = 0;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (std::abs(sizes[i] - n) < std::abs(sizes[best] - n)) best = i;
  }
  return d == Domain::sysadmin_s ? single[best] : multi[best];
}

std::vector<sokoban::State> load_level_file(const std::string& path) {
  if (path.empty()) return {};
  std::vector<sokoban::State> levels = sokoban::load_levels(read_text(path));
  if (levels.empty()) fail(ErrorCode::parse, "no levels in " + path);
  return levels;
}

}  // namespace

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::blockworld: return "blockworld";
    case Domain::sokoban: return "sokoban";
    case Domain::sysadmin_s: return "sysadmin_s";
    case Domain::sysadmin_m: return "sysadmin_m";
  }
  return "unknown";
}

Domain parse_domain(const std::string& text) {
  for (Domain d : {Domain::blockworld, Domain::sokoban, Domain::sysadmin_s, Domain::sysadmin_m}) {
    if (text == to_string(d)) return d;
  }
  fail(ErrorCode::parse, "unknown domain '" + text + "' (blockworld, sokoban, sysadmin_s, sysadmin_m)");
}

DomainSize parse_size(Domain domain, const std::string& raw) {
  const std::string text = trim(raw);
  DomainSize s;
  if (domain != Domain::sokoban) {
    s.n = parse_number<int>("size", text);
    const int min = is_sysadmin(domain) ? 4 : 1;
    if (s.n < min) fail(ErrorCode::parse, "size must be at least " + std::to_string(min));
    return s;
  }
  const auto x = text.find('x');
  const auto slash = text.find('/');
  if (x == std::string::npos || slash == std::string::npos || slash < x) {
    fail(ErrorCode::parse, "sokoban size must look like WxH/B, got '" + text + "'");
  }
  s.width = parse_number<int>("size", text.substr(0, x));
  s.height = parse_number<int>("size", text.substr(x + 1, slash - x - 1));
  s.boxes = parse_number<int>("size", text.substr(slash + 1));
  if (s.width < 3 || s.height < 3 || s.boxes < 1) fail(ErrorCode::parse, "sokoban size out of range: " + text);
  return s;
}

std::string format_size(Domain domain, const DomainSize& size) {
  if (domain != Domain::sokoban) return std::to_string(size.n);
  return std::to_string(size.width) + "x" + std::to_string(size.height) + "/" + std::to_string(size.boxes);
}

DomainSize default_size(Domain domain) {
  switch (domain) {
    case Domain::blockworld: return DomainSize{5, 0, 0, 0};
    case Domain::sokoban: return DomainSize{0, 10, 10, 4};
    default: return DomainSize{10, 0, 0, 0};
  }
}

std::vector<DomainSize> parse_size_list(Domain domain, const std::string& text) {
  std::vector<DomainSize> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_size(domain, item));
  }
  if (out.empty()) fail(ErrorCode::parse, "empty size list");
  return out;
}

Hyperparams default_hyperparams(Domain domain, const DomainSize& size) {
  Hyperparams hp;
  switch (domain) {
    case Domain::blockworld:
      break;
    case Domain::sokoban:
      hp.step_limit = 200;
      hp.mp_steps = 10;
      hp.emb_size = 64;
      hp.lr_start = 3e-3;
      hp.lr_end = 1e-4;
      hp.grad_max_norm = 5.0;
      hp.alpha_h_start = 0.2;
      hp.alpha_h_end = 0.1;
      break;
    case Domain::sysadmin_s:
    case Domain::sysadmin_m:
      hp.epoch = 100;
      hp.mp_steps = 5;
      hp.lr_start = 3e-3;
      hp.lr_end = 1e-4;
      hp.q_low = -100.0;
      hp.q_high = 200.0 * size.n;
      hp.alpha_h_start = sysadmin_alpha_h_start(domain, size.n);
      hp.alpha_h_end = hp.alpha_h_start / 2.0;
      break;
  }
  return hp;
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::parse, "config line " + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::parse, "config line " + std::to_string(number) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) { return parse_config_text(read_text(path)); }

RunConfig resolve_config(const ConfigMap& file, const ConfigMap& overrides, std::optional<std::uint64_t> seed_fallback) {
  ConfigMap merged = file;
  for (const auto& [k, v] : overrides) merged[k] = v;

  RunConfig c;
  if (auto it = merged.find("domain"); it != merged.end()) c.domain = parse_domain(it->second);
  c.size = default_size(c.domain);
  if (auto it = merged.find("size"); it != merged.end()) c.size = parse_size(c.domain, it->second);
  c.hp = default_hyperparams(c.domain, c.size);
  if (seed_fallback) c.seed = *seed_fallback;

  Hyperparams& hp = c.hp;
  for (const auto& [key, value] : merged) {
    auto as_int = [&] { return parse_number<int>(key, value); };
    auto as_double = [&] { return parse_number<double>(key, value); };
    if (key == "domain" || key == "size") continue;
    if (key == "levels") c.levels = value;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "epochs") c.epochs = as_int();
    else if (key == "checkpoint_every") c.checkpoint_every = as_int();
    else if (key == "out") c.out = value;
    else if (key == "max_minutes") c.max_minutes = as_double();
    else if (key == "p_envs") hp.p_envs = as_int();
    else if (key == "rho") hp.rho = as_double();
    else if (key == "gamma") hp.gamma = as_double();
    else if (key == "epoch") hp.epoch = as_int();
    else if (key == "step_limit") hp.step_limit = as_int();
    else if (key == "mp_steps") hp.mp_steps = as_int();
    else if (key == "emb_size") hp.emb_size = as_int();
    else if (key == "lr_start") hp.lr_start = as_double();
    else if (key == "lr_end") hp.lr_end = as_double();
    else if (key == "grad_max_norm") hp.grad_max_norm = as_double();
    else if (key == "q_low") hp.q_low = as_double();
    else if (key == "q_high") hp.q_high = as_double();
    else if (key == "q_range") {
      const auto comma = value.find(',');
      if (comma == std::string::npos) fail(ErrorCode::parse, "config: q_range must be low,high");
      hp.q_low = parse_number<double>(key, trim(value.substr(0, comma)));
      hp.q_high = parse_number<double>(key, trim(value.substr(comma + 1)));
    } else if (key == "alpha_v") hp.alpha_v = as_double();
    else if (key == "alpha_h_start") hp.alpha_h_start = as_double();
    else if (key == "alpha_h_end") hp.alpha_h_end = as_double();
    else if (key == "weight_decay") hp.weight_decay = as_double();
    else if (key == "normalize_entropy") hp.normalize_entropy = parse_bool(key, value);
    else fail(ErrorCode::parse, "config: unknown key '" + key + "'");
  }
  if (c.epochs < 1) fail(ErrorCode::parse, "config: epochs must be positive");
  if (c.checkpoint_every < 0) fail(ErrorCode::parse, "config: checkpoint_every must be non-negative");
  if (c.max_minutes < 0) fail(ErrorCode::parse, "config: max_minutes must be non-negative");
  if (!c.levels.empty() && c.domain != Domain::sokoban) fail(ErrorCode::parse, "config: levels is a sokoban key");
  try {
    hp.validate();
  } catch (const Error& e) {
    fail(ErrorCode::parse, std::string("config: ") + e.what());
  }
  return c;
}

ConfigMap to_config_map(const RunConfig& c) {
  const Hyperparams& hp = c.hp;
  ConfigMap m;
  m["domain"] = to_string(c.domain);
  m["size"] = format_size(c.domain, c.size);
  if (!c.levels.empty()) m["levels"] = c.levels;
  m["seed"] = std::to_string(c.seed);
  m["epochs"] = std::to_string(c.epochs);
  m["checkpoint_every"] = std::to_string(c.checkpoint_every);
  m["out"] = c.out;
  m["max_minutes"] = format_double(c.max_minutes);
  m["p_envs"] = std::to_string(hp.p_envs);
  m["rho"] = format_double(hp.rho);
  m["gamma"] = format_double(hp.gamma);
  m["epoch"] = std::to_string(hp.epoch);
  m["step_limit"] = std::to_string(hp.step_limit);
  m["mp_steps"] = std::to_string(hp.mp_steps);
  m["emb_size"] = std::to_string(hp.emb_size);
  m["lr_start"] = format_double(hp.lr_start);
  m["lr_end"] = format_double(hp.lr_end);
  m["grad_max_norm"] = format_double(hp.grad_max_norm);
  m["q_low"] = format_double(hp.q_low);
  m["q_high"] = format_double(hp.q_high);
  m["alpha_v"] = format_double(hp.alpha_v);
  m["alpha_h_start"] = format_double(hp.alpha_h_start);
  m["alpha_h_end"] = format_double(hp.alpha_h_end);
  m["weight_decay"] = format_double(hp.weight_decay);
  m["normalize_entropy"] = hp.normalize_entropy ? "true" : "false";
  return m;
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : to_config_map(config)) out += k + " = " + v + "\n";
  return out;
}

std::unique_ptr<Environment> make_environment(Domain domain, const DomainSize& size,
                                              const std::vector<sokoban::State>& levels) {
  switch (domain) {
    case Domain::blockworld: return std::make_unique<blockworld::BlockWorldEnv>(size.n);
    case Domain::sokoban:
      if (!levels.empty()) return std::make_unique<sokoban::SokobanEnv>(levels);
      return std::make_unique<sokoban::SokobanEnv>(size.width, size.height, size.boxes);
    case Domain::sysadmin_s:
    case Domain::sysadmin_m: return std::make_unique<sysadmin::SysAdminEnv>(size.n, sysadmin_mode(domain));
  }
  fail(ErrorCode::invalid_argument, "unknown domain");
}

ModelConfig model_config(Domain domain, int emb_size, int mp_steps) {
  ModelConfig mc;
  switch (domain) {
    case Domain::blockworld:
      mc.signature = blockworld::signature();
      mc.schemas = blockworld::schemas();
      break;
    case Domain::sokoban:
      mc.signature = sokoban::signature();
      mc.schemas = sokoban::schemas();
      break;
    case Domain::sysadmin_s:
    case Domain::sysadmin_m:
      mc.signature = sysadmin::signature();
      mc.schemas = sysadmin::schemas(sysadmin_mode(domain));
      break;
  }
  mc.emb_size = emb_size;
  mc.mp_steps = mp_steps;
  return mc;
}

std::string metrics_csv_header() {
  return "epoch,step,env_steps,episodes,mean_return,solved_fraction,mean_length,policy_loss,value_loss,entropy,"
         "grad_norm,lr,alpha_h";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::ostringstream out;
  out << m.epoch << ',' << m.step << ',' << m.env_steps << ',' << m.episodes << ',' << format_double(m.mean_return)
      << ',' << format_double(m.solved_fraction) << ',' << format_double(m.mean_length) << ','
      << format_double(m.policy_loss) << ',' << format_double(m.value_loss) << ',' << format_double(m.entropy) << ','
      << format_double(m.grad_norm) << ',' << format_double(m.lr) << ',' << format_double(m.alpha_h);
  return out.str();
}

void save_model(const std::filesystem::path& dir, const TrainedModel& model) {
  Manifest manifest = to_config_map(model.config);
  std::string schemas;
  for (const ActionSchema& s : model.model.schemas()) schemas += (schemas.empty() ? "" : ",") + s.name;
  manifest["schemas"] = schemas;
  save_checkpoint(dir, model.params, manifest);
}

TrainedModel load_model(const std::filesystem::path& dir) {
  Checkpoint ck = load_checkpoint(dir);
  ConfigMap config;
  for (const auto& [k, v] : ck.manifest) {
    if (k != "step_count" && k != "schemas") config[k] = v;
  }
  RunConfig rc = resolve_config(config, {});
  Model model(model_config(rc.domain, rc.hp.emb_size, rc.hp.mp_steps));
  ParameterStore expected;
  std::mt19937_64 rng(0);
  model.init_parameters(expected, rng);
  if (expected.size() != ck.store.size()) fail(ErrorCode::schema, "checkpoint parameters do not match the model");
  for (const auto& [name, e] : expected.entries()) {
    if (!ck.store.contains(name)) fail(ErrorCode::schema, "checkpoint lacks parameter " + name);
    const Matf& v = ck.store.at(name).value;
    if (v.rows() != e.value.rows() || v.cols() != e.value.cols()) {
      fail(ErrorCode::schema, "checkpoint parameter " + name + " has the wrong shape");
    }
  }
  return TrainedModel{rc, std::move(model), std::move(ck.store)};
}

TrainResult train(const RunConfig& config, const EpochCallback& on_epoch) {
  config.hp.validate();
  const std::vector<sokoban::State> levels = load_level_file(config.levels);
  const EnvFactory factory = [&config, &levels] { return make_environment(config.domain, config.size, levels); };
  Model model(model_config(config.domain, config.hp.emb_size, config.hp.mp_steps));
  Trainer trainer(model, config.hp, factory, config.seed);

  const std::filesystem::path out = config.out;
  std::ofstream metrics;
  if (!config.out.empty()) {
    std::filesystem::create_directories(out);
    metrics.open(out / "metrics.csv", std::ios::binary);
    if (!metrics) fail(ErrorCode::io, "cannot write " + (out / "metrics.csv").string());
    metrics << metrics_csv_header() << '\n';
  }

  TrainResult result{TrainedModel{config, model, {}}, {}};
  const auto started = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    double returns = 0.0;
    double lengths = 0.0;
    int solved = 0;
    for (int s = 0; s < config.hp.epoch; ++s) {
      const StepMetrics m = trainer.train_step();
      em.policy_loss += m.policy_loss;
      em.value_loss += m.value_loss;
      em.entropy += m.entropy;
      em.grad_norm += m.grad_norm;
      em.lr = m.lr;
      em.alpha_h = m.alpha_h;
      for (const EpisodeRecord& r : m.finished) {
        ++em.episodes;
        returns += r.episode_return;
        lengths += r.length;
        solved += r.solved ? 1 : 0;
      }
    }
    const double steps = config.hp.epoch;
    em.policy_loss /= steps;
    em.value_loss /= steps;
    em.entropy /= steps;
    em.grad_norm /= steps;
    em.step = trainer.step_count();
    em.env_steps = em.step * config.hp.p_envs;
    if (em.episodes > 0) {
      em.mean_return = returns / em.episodes;
      em.mean_length = lengths / em.episodes;
      em.solved_fraction = static_cast<double>(solved) / em.episodes;
    }
    result.history.push_back(em);
    if (metrics.is_open()) metrics << metrics_csv_row(em) << '\n' << std::flush;
    if (!config.out.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d", epoch);
      save_model(out / "checkpoints" / name, TrainedModel{config, model, trainer.parameters()});
    }
    if (on_epoch && !on_epoch(em)) break;
    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 60.0;
    if (config.max_minutes > 0 && minutes >= config.max_minutes) break;
  }
  result.trained.params = trainer.parameters();
  if (!config.out.empty()) save_model(out / "model", result.trained);
  return result;
}

void check_compatible(const Model& model, Domain domain) {
  const ModelConfig expected = model_config(domain, model.emb_size(), model.config().mp_steps);
  bool same = expected.signature == model.config().signature && expected.schemas.size() == model.schemas().size();
  for (std::size_t i = 0; same && i < expected.schemas.size(); ++i) {
    const ActionSchema& a = expected.schemas[i];
    const ActionSchema& b = model.schemas()[i];
    same = a.name == b.name && a.kind == b.kind && a.arity == b.arity;
  }
  if (!same) fail(ErrorCode::schema, "model was not built for domain " + to_string(domain));
}

namespace {

struct Episode {
  std::unique_ptr<Environment> env;
  std::mt19937_64 transitions;
  std::mt19937_64 policy;
  int steps = 0;
  double episode_return = 0.0;
  bool done = false;
  std::optional<int> optimal;
};

double run_baseline(Domain domain, const DomainSize& size, std::uint64_t seed, int episode, int limit) {
  sysadmin::SysAdminEnv env(size.n, sysadmin_mode(domain));
  std::mt19937_64 instance = make_rng(seed, kEvalInstances, episode);
  std::mt19937_64 transitions = make_rng(seed, kEvalTransitions, episode);
  std::mt19937_64 choice = make_rng(seed, kEvalBaseline, episode);
  env.reset(instance);
  double total = 0.0;
  for (int t = 0; t < limit; ++t) {
    total += env.step(sysadmin::baseline_action(env.state(), env.mode(), choice), transitions).reward;
  }
  return total;
}

}  // namespace

EvalReport evaluate(const Model& model, const ParameterStore& params, const EvalConfig& config) {
  check_compatible(model, config.domain);
  if (config.episodes < 1) fail(ErrorCode::invalid_argument, "evaluate: episodes must be positive");
  if (config.batch < 1) fail(ErrorCode::invalid_argument, "evaluate: batch must be positive");
  const int limit =
      config.step_limit > 0 ? config.step_limit : default_hyperparams(config.domain, config.size).step_limit;
  const bool optimality = config.domain == Domain::blockworld && config.optimality &&
                          config.size.n <= blockworld::kOracleMaxBlocks;
  const auto weights = Weights<float>::frozen(params);

  EvalReport report;
  report.domain = config.domain;
  report.size = config.size;
  report.episodes = config.episodes;
  double solved = 0.0;
  double optimality_sum = 0.0;
  double returns = 0.0;
  double steps = 0.0;

  for (int first = 0; first < config.episodes; first += config.batch) {
    const int count = std::min(config.batch, config.episodes - first);
    std::vector<Episode> episodes(count);
    for (int i = 0; i < count; ++i) {
      Episode& ep = episodes[i];
      const int e = first + i;
      std::mt19937_64 instance = make_rng(config.seed, kEvalInstances, e);
      ep.env = make_environment(config.domain, config.size, config.levels);
      ep.env->reset(instance);
      ep.transitions = make_rng(config.seed, kEvalTransitions, e);
      ep.policy = make_rng(config.seed, kEvalPolicy, e);
      if (optimality) {
        ep.optimal = blockworld::optimal_steps(dynamic_cast<const blockworld::BlockWorldEnv&>(*ep.env).state());
      }
    }
    for (;;) {
      std::vector<int> active;
      for (int i = 0; i < count; ++i) {
        if (!episodes[i].done) active.push_back(i);
      }
      if (active.empty()) break;
      std::vector<StateGraph> graphs;
      std::vector<std::shared_ptr<const Preconditions>> pre;
      std::vector<const Preconditions*> pre_ptr;
      std::vector<std::mt19937_64*> rngs;
      for (int i : active) {
        graphs.push_back(episodes[i].env->observe());
        pre.push_back(episodes[i].env->preconditions());
        pre_ptr.push_back(pre.back().get());
        rngs.push_back(&episodes[i].policy);
      }
      const GraphBatch batch = disjoint_union(graphs);
      Tape<float> tape;
      PolicyEvaluator<float> ev(tape, weights, model, batch);
      const std::vector<SampledAction> actions = sample_actions(ev, pre_ptr, rngs, config.greedy);
      for (std::size_t k = 0; k < active.size(); ++k) {
        Episode& ep = episodes[active[k]];
        const StepOutcome out = ep.env->step(actions[k].choice, ep.transitions);
        ep.episode_return += out.reward;
        ++ep.steps;
        if (out.terminal || ep.steps >= limit) ep.done = true;
      }
    }
    for (const Episode& ep : episodes) {
      const bool ok = ep.env->solved();
      solved += ok ? 1.0 : 0.0;
      returns += ep.episode_return;
      steps += ep.steps;
      if (ep.optimal && ok) optimality_sum += ep.steps > 0 ? static_cast<double>(*ep.optimal) / ep.steps : 1.0;
    }
  }

  const double n = config.episodes;
  report.mean_return = returns / n;
  report.mean_steps = steps / n;
  if (!is_sysadmin(config.domain)) report.solved_fraction = solved / n;
  if (optimality) report.optimality = optimality_sum / n;
  if (is_sysadmin(config.domain)) {
    double baseline = 0.0;
    for (int e = 0; e < config.episodes; ++e) baseline += run_baseline(config.domain, config.size, config.seed, e, limit);
    report.baseline_return = baseline / n;
    report.normalized_score = report.mean_return / *report.baseline_return;
  }
  return report;
}

std::vector<EvalReport> generalize(const Model& model, const ParameterStore& params, EvalConfig config,
                                   const std::vector<DomainSize>& sizes) {
  std::vector<EvalReport> out;
  for (const DomainSize& s : sizes) {
    config.size = s;
    out.push_back(evaluate(model, params, config));
  }
  return out;
}

std::string report_csv_header() {
  return "domain,size,episodes,solved_fraction,optimality,mean_return,mean_steps,baseline_return,normalized_score";
}

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream out;
  out << to_string(r.domain) << ',' << format_size(r.domain, r.size) << ',' << r.episodes << ','
      << format_optional(r.solved_fraction) << ',' << format_optional(r.optimality) << ','
      << format_double(r.mean_return) << ',' << format_double(r.mean_steps) << ','
      << format_optional(r.baseline_return) << ',' << format_optional(r.normalized_score);
  return out.str();
}

namespace {

struct CheckState {
  StateGraph graph;
  std::shared_ptr<const Preconditions> preconditions;
  ActionChoice action;
};

std::unique_ptr<Environment> smallest_environment(Domain domain) {
  switch (domain) {
    case Domain::blockworld: return make_environment(domain, DomainSize{2, 0, 0, 0});
    case Domain::sokoban:
      return std::make_unique<sokoban::SokobanEnv>(std::vector<sokoban::State>{sokoban::load_level(
          "######\n"
          "#@ $.#\n"
          "#    #\n"
          "######\n")});
    default: return make_environment(domain, DomainSize{4, 0, 0, 0});
  }
}

/// A short trajectory under the given parameters, keeping each visited state
/// with the action taken there.
std::vector<CheckState> roll_out(Environment& env, const Model& model, const BasicParameterStore<double>& store,
                                 int length, std::mt19937_64& rng) {
  std::vector<CheckState> out;
  const auto w = Weights<double>::frozen(store);
  for (int t = 0; t < length; ++t) {
    CheckState s{env.observe(), env.preconditions(), {}};
    const GraphBatch batch = single(s.graph);
    Tape<double> tape;
    PolicyEvaluator<double> ev(tape, w, model, batch);
    s.action = sample_action(ev, 0, *s.preconditions, rng).choice;
    out.push_back(s);
    if (env.step(s.action, rng).terminal) break;
  }
  return out;
}

}  // namespace

GradCheckReport pipeline_gradcheck(Domain domain, std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng = make_rng(seed, kCheckStream, static_cast<std::uint64_t>(domain));
  Model model(model_config(domain, 8, 2));
  ParameterStore init;
  model.init_parameters(init, rng);
  BasicParameterStore<double> store = init.cast<double>();
  // Zero biases on all-zero features put LeakyReLU exactly on its kink, where
  // central differences are meaningless.
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto& [name, e] : store.entries()) e.value = e.value.unaryExpr([&](double x) { return x + jitter(rng); });
  std::unique_ptr<Environment> env = smallest_environment(domain);
  env->reset(rng);
  const std::vector<CheckState> states = roll_out(*env, model, store, 3, rng);
  std::vector<StateGraph> graphs;
  std::vector<double> coefficients;
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (const CheckState& s : states) {
    graphs.push_back(s.graph);
    coefficients.push_back(coef(rng));
    coefficients.push_back(coef(rng));
  }
  const GraphBatch batch = disjoint_union(graphs);
  const ScalarComputation computation = [&](Tape<double>& tape, BasicParameterStore<double>& params) {
    const auto w = Weights<double>::trainable(params);
    PolicyEvaluator<double> ev(tape, w, model, batch);
    std::vector<Var> terms;
    for (std::size_t i = 0; i < states.size(); ++i) {
      terms.push_back(action_log_prob(ev, static_cast<int>(i), *states[i].preconditions, states[i].action));
      terms.push_back(element(tape, ev.values(), static_cast<int>(i), 0));
    }
    return weighted_sum<double>(tape, terms, coefficients);
  };
  return grad_check(store, computation, 1e-6, tolerance);
}

EnumCheckResult enumeration_check(Domain domain, const DomainSize& size, int settings, std::uint64_t seed) {
  if (settings < 1) fail(ErrorCode::invalid_argument, "enumeration_check: settings must be positive");
  EnumCheckResult result;
  result.settings = settings;
  Model model(model_config(domain, 16, 2));
  for (int k = 0; k < settings; ++k) {
    std::mt19937_64 rng = make_rng(seed, kCheckStream + 1, static_cast<std::uint64_t>(k));
    ParameterStore init;
    model.init_parameters(init, rng);
    const BasicParameterStore<double> store = init.cast<double>();
    std::unique_ptr<Environment> env = make_environment(domain, size);
    env->reset(rng);
    // Walk a few steps so the check also sees states away from the start.
    const std::vector<CheckState> walk = roll_out(*env, model, store, k % 4, rng);
    (void)walk;
    const std::shared_ptr<const Preconditions> pre = env->preconditions();
    const std::vector<ActionChoice> actions = enumerate_actions(*pre, model.schemas());
    const StateGraph graph = env->observe();
    const GraphBatch batch = single(graph);
    Tape<double> tape;
    const auto w = Weights<double>::frozen(store);
    PolicyEvaluator<double> ev(tape, w, model, batch);
    double total = 0.0;
    for (const ActionChoice& a : actions) total += std::exp(tape.value(action_log_prob(ev, 0, *pre, a))(0, 0));
    result.max_actions = std::max(result.max_actions, actions.size());
    result.max_deviation = std::max(result.max_deviation, std::abs(total - 1.0));
  }
  return result;
}

}  // namespace relrl
