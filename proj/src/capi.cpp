#include "relrl.h"

#include "relrl/harness.hpp"

#include <cstring>
#include <fstream>
#include <new>
#include <string>

struct relrl_config {
  relrl::ConfigMap file;
  relrl::ConfigMap overrides;
  std::optional<std::uint64_t> seed_fallback;

  relrl::RunConfig resolve() const { return relrl::resolve_config(file, overrides, seed_fallback); }
};

struct relrl_model {
  relrl::TrainedModel trained;
  std::string domain;
  std::string size;
};

namespace {

thread_local std::string last_error;

template <typename F>
relrl_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return RELRL_OK;
  } catch (const relrl::Error& e) {
    last_error = e.what();
    return static_cast<relrl_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RELRL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RELRL_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) relrl::fail(relrl::ErrorCode::invalid_argument, what);
}

void copy_out(const std::string& text, char* buffer, std::size_t capacity, std::size_t* needed) {
  if (needed != nullptr) *needed = text.size() + 1;
  if (buffer == nullptr || capacity == 0) return;
  const std::size_t n = std::min(capacity - 1, text.size());
  std::memcpy(buffer, text.data(), n);
  buffer[n] = '\0';
}

relrl_report to_c(const relrl::EvalReport& r) {
  relrl_report out{};
  out.episodes = r.episodes;
  out.has_solved = r.solved_fraction.has_value();
  out.solved_fraction = r.solved_fraction.value_or(0.0);
  out.has_optimality = r.optimality.has_value();
  out.optimality = r.optimality.value_or(0.0);
  out.mean_return = r.mean_return;
  out.mean_steps = r.mean_steps;
  out.has_baseline = r.baseline_return.has_value();
  out.baseline_return = r.baseline_return.value_or(0.0);
  out.normalized_score = r.normalized_score.value_or(0.0);
  return out;
}

relrl::EvalConfig eval_config(const relrl_model* model, const relrl_eval_options* options) {
  const relrl::RunConfig& rc = model->trained.config;
  relrl::EvalConfig cfg;
  cfg.domain = options->domain != nullptr ? relrl::parse_domain(options->domain) : rc.domain;
  cfg.size = options->size != nullptr ? relrl::parse_size(cfg.domain, options->size)
             : cfg.domain == rc.domain ? rc.size
                                       : relrl::default_size(cfg.domain);
  cfg.episodes = options->episodes;
  cfg.seed = options->seed;
  cfg.greedy = options->greedy != 0;
  cfg.step_limit = options->step_limit;
  cfg.optimality = options->optimality != 0;
  if (options->levels != nullptr && *options->levels != '\0') {
    std::ifstream in(options->levels, std::ios::binary);
    if (!in) relrl::fail(relrl::ErrorCode::io, std::string("cannot open ") + options->levels);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg.levels = relrl::sokoban::load_levels(text);
  }
  return cfg;
}

}  // namespace

extern "C" {

const char* relrl_last_error(void) { return last_error.c_str(); }

const char* relrl_status_name(relrl_status status) {
  if (status == RELRL_OK) return "ok";
  if (status == RELRL_ERR_INTERNAL) return "internal";
  return relrl::to_string(static_cast<relrl::ErrorCode>(status));
}

relrl_status relrl_config_create(relrl_config** out) {
  return guarded([&] {
    require(out != nullptr, "relrl_config_create: null output");
    *out = new relrl_config();
  });
}

void relrl_config_free(relrl_config* config) { delete config; }

relrl_status relrl_config_read_file(relrl_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "relrl_config_read_file: null argument");
    config->file = relrl::read_config_file(path);
  });
}

relrl_status relrl_config_set(relrl_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "relrl_config_set: null argument");
    config->overrides[key] = value;
  });
}

relrl_status relrl_config_set_seed_fallback(relrl_config* config, uint64_t seed) {
  return guarded([&] {
    require(config != nullptr, "relrl_config_set_seed_fallback: null config");
    config->seed_fallback = seed;
  });
}

relrl_status relrl_config_get(const relrl_config* config, const char* key, char* buffer, size_t capacity,
                              size_t* needed) {
  return guarded([&] {
    require(config != nullptr && key != nullptr, "relrl_config_get: null argument");
    const relrl::ConfigMap all = relrl::to_config_map(config->resolve());
    const auto it = all.find(key);
    if (it == all.end()) relrl::fail(relrl::ErrorCode::parse, std::string("unknown key '") + key + "'");
    copy_out(it->second, buffer, capacity, needed);
  });
}

relrl_status relrl_config_format(const relrl_config* config, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(config != nullptr, "relrl_config_format: null config");
    copy_out(relrl::format_config(config->resolve()), buffer, capacity, needed);
  });
}

relrl_status relrl_train(const relrl_config* config, relrl_epoch_callback callback, void* user, relrl_model** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "relrl_train: null argument");
    const relrl::RunConfig rc = config->resolve();
    relrl::EpochCallback on_epoch;
    if (callback != nullptr) {
      on_epoch = [callback, user](const relrl::EpochMetrics& m) {
        const relrl_epoch_metrics c{m.epoch,      m.step,        m.env_steps,    m.episodes, m.mean_return,
                                    m.solved_fraction, m.mean_length, m.policy_loss, m.value_loss, m.entropy,
                                    m.grad_norm,  m.lr,          m.alpha_h};
        return callback(&c, user) != 0;
      };
    }
    relrl::TrainResult result = relrl::train(rc, on_epoch);
    *out = new relrl_model{std::move(result.trained), relrl::to_string(rc.domain), relrl::format_size(rc.domain, rc.size)};
  });
}

relrl_status relrl_model_load(const char* dir, relrl_model** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "relrl_model_load: null argument");
    relrl::TrainedModel trained = relrl::load_model(dir);
    const std::string domain = relrl::to_string(trained.config.domain);
    const std::string size = relrl::format_size(trained.config.domain, trained.config.size);
    *out = new relrl_model{std::move(trained), domain, size};
  });
}

relrl_status relrl_model_save(const relrl_model* model, const char* dir) {
  return guarded([&] {
    require(model != nullptr && dir != nullptr, "relrl_model_save: null argument");
    relrl::save_model(dir, model->trained);
  });
}

void relrl_model_free(relrl_model* model) { delete model; }

const char* relrl_model_domain(const relrl_model* model) { return model != nullptr ? model->domain.c_str() : ""; }

const char* relrl_model_size(const relrl_model* model) { return model != nullptr ? model->size.c_str() : ""; }

relrl_eval_options relrl_eval_defaults(void) {
  relrl_eval_options o{};
  o.episodes = 100;
  o.optimality = 1;
  return o;
}

relrl_status relrl_evaluate(const relrl_model* model, const relrl_eval_options* options, relrl_report* out) {
  return guarded([&] {
    require(model != nullptr && options != nullptr && out != nullptr, "relrl_evaluate: null argument");
    const relrl::EvalConfig cfg = eval_config(model, options);
    *out = to_c(relrl::evaluate(model->trained.model, model->trained.params, cfg));
  });
}

relrl_status relrl_generalize(const relrl_model* model, const relrl_eval_options* options, const char* sizes,
                              const char* csv_path, relrl_report* reports, size_t capacity, size_t* count) {
  return guarded([&] {
    require(model != nullptr && options != nullptr && sizes != nullptr, "relrl_generalize: null argument");
    relrl_eval_options base = *options;
    base.size = nullptr;
    const relrl::EvalConfig cfg = eval_config(model, &base);
    const std::vector<relrl::DomainSize> list = relrl::parse_size_list(cfg.domain, sizes);
    const std::vector<relrl::EvalReport> out =
        relrl::generalize(model->trained.model, model->trained.params, cfg, list);
    if (csv_path != nullptr) {
      std::ofstream csv(csv_path, std::ios::binary);
      if (!csv) relrl::fail(relrl::ErrorCode::io, std::string("cannot write ") + csv_path);
      csv << relrl::report_csv_header() << '\n';
      for (const relrl::EvalReport& r : out) csv << relrl::report_csv_row(r) << '\n';
    }
    for (std::size_t i = 0; i < out.size() && i < capacity && reports != nullptr; ++i) reports[i] = to_c(out[i]);
    if (count != nullptr) *count = out.size();
  });
}

relrl_status relrl_gradcheck(const char* domain, uint64_t seed, double tolerance, relrl_gradcheck_result* out) {
  return guarded([&] {
    require(domain != nullptr && out != nullptr, "relrl_gradcheck: null argument");
    const relrl::GradCheckReport r = relrl::pipeline_gradcheck(relrl::parse_domain(domain), seed, tolerance);
    *out = relrl_gradcheck_result{r.coordinates, r.failures.size(), r.max_error};
  });
}

relrl_status relrl_enumcheck(const char* domain, const char* size, int settings, uint64_t seed,
                             relrl_enumcheck_result* out) {
  return guarded([&] {
    require(domain != nullptr && size != nullptr && out != nullptr, "relrl_enumcheck: null argument");
    const relrl::Domain d = relrl::parse_domain(domain);
    const relrl::EnumCheckResult r = relrl::enumeration_check(d, relrl::parse_size(d, size), settings, seed);
    *out = relrl_enumcheck_result{r.settings, r.max_actions, r.max_deviation};
  });
}

}  // extern "C"
