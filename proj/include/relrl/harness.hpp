#pragma once

#include "relrl/a2c.hpp"
#include "relrl/checkpoint.hpp"
#include "relrl/gradcheck.hpp"
#include "relrl/sokoban.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace relrl {

enum class Domain { blockworld, sokoban, sysadmin_s, sysadmin_m };

std::string to_string(Domain domain);
Domain parse_domain(const std::string& text);

/// Block or computer count in `n`; grid width, height and box count for Sokoban.
struct DomainSize {
  int n = 0;
  int width = 0;
  int height = 0;
  int boxes = 0;

  bool operator==(const DomainSize&) const = default;
};

/// "5" for BlockWorld and SysAdmin, "WxH/B" (e.g. "10x10/4") for Sokoban.
DomainSize parse_size(Domain domain, const std::string& text);
std::string format_size(Domain domain, const DomainSize& size);
DomainSize default_size(Domain domain);
/// Comma-separated list of sizes.
std::vector<DomainSize> parse_size_list(Domain domain, const std::string& text);

/// Per-domain defaults; SysAdmin entropy coefficients and the q range depend on N.
Hyperparams default_hyperparams(Domain domain, const DomainSize& size);

struct RunConfig {
  Domain domain = Domain::blockworld;
  DomainSize size = default_size(Domain::blockworld);
  /// Sokoban only: file of fixed levels to train on instead of generated ones.
  std::string levels;
  Hyperparams hp = default_hyperparams(Domain::blockworld, default_size(Domain::blockworld));
  std::uint64_t seed = 0;
  int epochs = 1;
  /// Write a checkpoint every this many epochs; 0 keeps only the final one.
  int checkpoint_every = 0;
  std::string out = "run";
  /// Wall-clock budget in minutes, checked between epochs; 0 disables it.
  double max_minutes = 0.0;
};

using ConfigMap = std::map<std::string, std::string>;

/// `key = value` lines; blank lines and `#` comments are skipped.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

/// Builds a config from layered key/value maps, later layers winning: the
/// defaults of the resolved domain and size, then `file`, then `overrides`.
/// `seed_fallback` applies when neither layer sets the seed. Throws
/// ErrorCode::parse on unknown keys or malformed values.
RunConfig resolve_config(const ConfigMap& file, const ConfigMap& overrides,
                         std::optional<std::uint64_t> seed_fallback = std::nullopt);
/// Every key with its value; resolve_config(to_config_map(c), {}) == c.
ConfigMap to_config_map(const RunConfig& config);
std::string format_config(const RunConfig& config);

/// Environment with fresh generated instances of the given size; Sokoban uses
/// `levels` instead when non-empty.
std::unique_ptr<Environment> make_environment(Domain domain, const DomainSize& size,
                                              const std::vector<sokoban::State>& levels = {});
ModelConfig model_config(Domain domain, int emb_size, int mp_steps);

struct EpochMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  std::int64_t env_steps = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double solved_fraction = 0.0;
  double mean_length = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double alpha_h = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& metrics);

/// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochMetrics&)>;

struct TrainedModel {
  RunConfig config;
  Model model;
  ParameterStore params;
};

struct TrainResult {
  TrainedModel trained;
  std::vector<EpochMetrics> history;
};

/// Runs `epochs` x `epoch` train steps. With a non-empty `out` directory writes
/// metrics.csv (one row per epoch), checkpoints/epoch_NNNN every
/// checkpoint_every epochs and the final model to model/.
TrainResult train(const RunConfig& config, const EpochCallback& on_epoch = {});

void save_model(const std::filesystem::path& dir, const TrainedModel& model);
/// Throws ErrorCode::schema when the stored parameters do not fit the model
/// the manifest describes.
TrainedModel load_model(const std::filesystem::path& dir);

struct EvalConfig {
  Domain domain = Domain::blockworld;
  DomainSize size = default_size(Domain::blockworld);
  int episodes = 100;
  std::uint64_t seed = 0;
  bool greedy = false;
  /// 0 uses the domain's default step limit.
  int step_limit = 0;
  /// BlockWorld: compare against the breadth-first optimum when N is small
  /// enough for it.
  bool optimality = true;
  /// Episodes simulated side by side in one forward pass.
  int batch = 256;
  std::vector<sokoban::State> levels;
};

struct EvalReport {
  Domain domain = Domain::blockworld;
  DomainSize size;
  int episodes = 0;
  std::optional<double> solved_fraction;
  /// Mean over episodes of optimal/performed steps, 0 for unsolved episodes.
  std::optional<double> optimality;
  double mean_return = 0.0;
  double mean_steps = 0.0;
  /// SysAdmin: the reset-offline baseline on the same instances and transition
  /// streams, and mean_return / baseline_return.
  std::optional<double> baseline_return;
  std::optional<double> normalized_score;
};

/// Throws ErrorCode::schema if the model was built for a different domain.
void check_compatible(const Model& model, Domain domain);

/// Episode e uses instance, transition and policy streams derived from
/// (seed, e), so reports do not depend on `batch`.
EvalReport evaluate(const Model& model, const ParameterStore& params, const EvalConfig& config);
std::vector<EvalReport> generalize(const Model& model, const ParameterStore& params, EvalConfig config,
                                   const std::vector<DomainSize>& sizes);

std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

/// Finite-difference check of the full pipeline (encoding, replayed action
/// log-probabilities and values) in double precision on a few states of the
/// domain's smallest instance.
GradCheckReport pipeline_gradcheck(Domain domain, std::uint64_t seed, double tolerance = 1e-4);

struct EnumCheckResult {
  int settings = 0;
  std::size_t max_actions = 0;
  /// max |sum_a pi(a|s) - 1| over all settings.
  double max_deviation = 0.0;
};

/// For `settings` random parameter draws and random states, sums the
/// probabilities of every enumerated grounded action.
EnumCheckResult enumeration_check(Domain domain, const DomainSize& size, int settings, std::uint64_t seed);

}  // namespace relrl
