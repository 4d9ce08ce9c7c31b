#ifndef RELRL_H
#define RELRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define RELRL_API __attribute__((visibility("default")))
#else
#define RELRL_API
#endif

typedef enum relrl_status {
  RELRL_OK = 0,
  RELRL_ERR_INVALID_ARGUMENT = 1,
  RELRL_ERR_DIMENSION = 2,
  RELRL_ERR_VALIDATION = 3,
  RELRL_ERR_NO_VALID_CHOICE = 4,
  RELRL_ERR_NO_VALID_ACTION = 5,
  RELRL_ERR_STATE = 6,
  RELRL_ERR_CONSISTENCY = 7,
  RELRL_ERR_ILLEGAL_ACTION = 8,
  RELRL_ERR_UNSUPPORTED = 9,
  RELRL_ERR_PARSE = 10,
  RELRL_ERR_IO = 11,
  RELRL_ERR_SCHEMA = 12,
  RELRL_ERR_MODE = 13,
  RELRL_ERR_GENERATION = 14,
  RELRL_ERR_INTERNAL = 100
} relrl_status;

/* Layered run configuration: domain defaults < file values < set values. */
typedef struct relrl_config relrl_config;
/* A trained model with its configuration. */
typedef struct relrl_model relrl_model;

/* Message of the last failed call on this thread ("" after success). */
RELRL_API const char* relrl_last_error(void);
RELRL_API const char* relrl_status_name(relrl_status status);

RELRL_API relrl_status relrl_config_create(relrl_config** out);
RELRL_API void relrl_config_free(relrl_config* config);
/* Replaces the file layer with the key=value lines of `path`. */
RELRL_API relrl_status relrl_config_read_file(relrl_config* config, const char* path);
RELRL_API relrl_status relrl_config_set(relrl_config* config, const char* key, const char* value);
/* Seed used when neither layer sets `seed`. */
RELRL_API relrl_status relrl_config_set_seed_fallback(relrl_config* config, uint64_t seed);
/* Resolved value of `key`. Writes at most `capacity` bytes including the
   terminator; `needed` (optional) receives the full length plus one. */
RELRL_API relrl_status relrl_config_get(const relrl_config* config, const char* key, char* buffer, size_t capacity,
                                        size_t* needed);
/* Full resolved configuration as key = value lines. */
RELRL_API relrl_status relrl_config_format(const relrl_config* config, char* buffer, size_t capacity,
                                           size_t* needed);

typedef struct relrl_epoch_metrics {
  int epoch;
  int64_t step;
  int64_t env_steps;
  int episodes;
  double mean_return;
  double solved_fraction;
  double mean_length;
  double policy_loss;
  double value_loss;
  double entropy;
  double grad_norm;
  double lr;
  double alpha_h;
} relrl_epoch_metrics;

/* Return non-zero to continue training, zero to stop after this epoch. */
typedef int (*relrl_epoch_callback)(const relrl_epoch_metrics* metrics, void* user);

/* Trains per the configuration, writing metrics.csv and checkpoints under its
   `out` directory (nothing is written when `out` is empty). */
RELRL_API relrl_status relrl_train(const relrl_config* config, relrl_epoch_callback callback, void* user,
                                   relrl_model** out);

RELRL_API relrl_status relrl_model_load(const char* dir, relrl_model** out);
RELRL_API relrl_status relrl_model_save(const relrl_model* model, const char* dir);
RELRL_API void relrl_model_free(relrl_model* model);
/* Domain name the model was trained on. */
RELRL_API const char* relrl_model_domain(const relrl_model* model);
/* Instance size the model was trained on, e.g. "5" or "6x6/1". */
RELRL_API const char* relrl_model_size(const relrl_model* model);

typedef struct relrl_eval_options {
  /* NULL: the model's training domain. */
  const char* domain;
  /* NULL: the model's training size. */
  const char* size;
  int episodes;
  uint64_t seed;
  int greedy;
  /* 0: the domain's step limit. */
  int step_limit;
  /* BlockWorld: compute optimality against the exact planner when possible. */
  int optimality;
  /* Optional Sokoban level file replacing generated levels. */
  const char* levels;
} relrl_eval_options;

/* Default options: 100 episodes, seed 0, sampled actions, optimality on. */
RELRL_API relrl_eval_options relrl_eval_defaults(void);

typedef struct relrl_report {
  int episodes;
  int has_solved;
  double solved_fraction;
  int has_optimality;
  double optimality;
  double mean_return;
  double mean_steps;
  int has_baseline;
  double baseline_return;
  double normalized_score;
} relrl_report;

RELRL_API relrl_status relrl_evaluate(const relrl_model* model, const relrl_eval_options* options,
                                      relrl_report* out);

/* Evaluates every size of the comma-separated list (options->size is
   ignored). Fills up to `capacity` reports, sets `count` to the number of
   sizes and writes a CSV table to `csv_path` when it is not NULL. */
RELRL_API relrl_status relrl_generalize(const relrl_model* model, const relrl_eval_options* options,
                                        const char* sizes, const char* csv_path, relrl_report* reports,
                                        size_t capacity, size_t* count);

typedef struct relrl_gradcheck_result {
  size_t coordinates;
  size_t failures;
  double max_error;
} relrl_gradcheck_result;

/* Finite-difference check of the full pipeline on the domain's smallest
   instance. The call succeeds even when coordinates fail; inspect `failures`. */
RELRL_API relrl_status relrl_gradcheck(const char* domain, uint64_t seed, double tolerance,
                                       relrl_gradcheck_result* out);

typedef struct relrl_enumcheck_result {
  int settings;
  size_t max_actions;
  double max_deviation;
} relrl_enumcheck_result;

/* Sums pi(a|s) over every grounded action for `settings` random parameter
   draws. */
RELRL_API relrl_status relrl_enumcheck(const char* domain, const char* size, int settings, uint64_t seed,
                                       relrl_enumcheck_result* out);

#ifdef __cplusplus
}
#endif

#endif
