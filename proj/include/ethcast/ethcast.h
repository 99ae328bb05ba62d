#ifndef ETHCAST_ETHCAST_H
#define ETHCAST_ETHCAST_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(ETHCAST_BUILDING)
#    define ETHCAST_API __declspec(dllexport)
#  else
#    define ETHCAST_API __declspec(dllimport)
#  endif
#else
#  define ETHCAST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ethcast_status {
    ETHCAST_OK = 0,
    ETHCAST_ERR_USAGE = 1,
    ETHCAST_ERR_CONFIG = 2,
    ETHCAST_ERR_IO = 3,
    ETHCAST_ERR_SCHEMA = 4,
    ETHCAST_ERR_PARSE = 5,
    ETHCAST_ERR_EMPTY_INPUT = 6,
    ETHCAST_ERR_DUPLICATE = 7,
    ETHCAST_ERR_CONTINUITY = 8,
    ETHCAST_ERR_SPLIT = 9,
    ETHCAST_ERR_INSUFFICIENT_DATA = 10,
    ETHCAST_ERR_SHAPE = 11,
    ETHCAST_ERR_NUMERIC = 12,
    ETHCAST_ERR_INTEGRITY = 13,
    ETHCAST_ERR_INVALID_ARGUMENT = 14,
    ETHCAST_ERR_INTERNAL = 15
} ethcast_status;

typedef struct ethcast_context ethcast_context;
typedef struct ethcast_series ethcast_series;
typedef struct ethcast_model ethcast_model;

typedef struct ethcast_metrics {
    double mse;
    double mae;
    double rmse;
    size_t n;
} ethcast_metrics;

typedef void (*ethcast_log_fn)(const char* line, void* user);

ETHCAST_API const char* ethcast_version(void);
ETHCAST_API const char* ethcast_status_name(ethcast_status status);
/* Process exit status for a command outcome: 0 ok, 2 usage, 1 anything else. */
ETHCAST_API int ethcast_exit_code(ethcast_status status);

/* Context: configuration, options, log sink and the last error/output. */
ETHCAST_API ethcast_status ethcast_context_create(ethcast_context** out);
ETHCAST_API void ethcast_context_destroy(ethcast_context* ctx);
/* Message of the last failed call on ctx; "" after a success. Valid until the next call. */
ETHCAST_API const char* ethcast_last_error(const ethcast_context* ctx);

ETHCAST_API ethcast_status ethcast_set_config(ethcast_context* ctx, const char* path);
/* "section.key" override applied after the config file, in call order. */
ETHCAST_API ethcast_status ethcast_set_option(ethcast_context* ctx, const char* key, const char* value);
ETHCAST_API ethcast_status ethcast_clear_options(ethcast_context* ctx);
ETHCAST_API ethcast_status ethcast_set_log_callback(ethcast_context* ctx, ethcast_log_fn fn, void* user);

/* prepare | train | evaluate | fewshot | compare | export-plot-data */
ETHCAST_API ethcast_status ethcast_run_command(ethcast_context* ctx, const char* command);
ETHCAST_API const char* ethcast_last_output(const ethcast_context* ctx);
ETHCAST_API size_t ethcast_artifact_count(const ethcast_context* ctx);
ETHCAST_API const char* ethcast_artifact(const ethcast_context* ctx, size_t index);

/* Accepted config keys and their descriptions. */
ETHCAST_API size_t ethcast_config_key_count(void);
ETHCAST_API ethcast_status ethcast_config_key(size_t index, const char** name, const char** help);

/* ctx may be NULL; it only receives the error message. */
ETHCAST_API ethcast_status ethcast_compute_metrics(ethcast_context* ctx, const double* actual,
                                                   const double* predicted, size_t n, ethcast_metrics* out);

/* Series: a regularized (gap-filled) daily price series. format is "kaggle" or "canonical". */
ETHCAST_API ethcast_status ethcast_series_load(ethcast_context* ctx, const char* path, const char* format,
                                               ethcast_series** out);
ETHCAST_API void ethcast_series_destroy(ethcast_series* series);
ETHCAST_API size_t ethcast_series_length(const ethcast_series* series);
/* Copies `channel` (open|high|low|close|volume) into out[0..capacity). */
ETHCAST_API ethcast_status ethcast_series_values(ethcast_context* ctx, const ethcast_series* series,
                                                 const char* channel, double* out, size_t capacity);

/* Model: built from the context's config and options. */
ETHCAST_API ethcast_status ethcast_model_create(ethcast_context* ctx, ethcast_model** out);
ETHCAST_API ethcast_status ethcast_model_load_checkpoint(ethcast_context* ctx, ethcast_model* model,
                                                         const char* path);
ETHCAST_API void ethcast_model_destroy(ethcast_model* model);
ETHCAST_API size_t ethcast_model_seq_len(const ethcast_model* model);
ETHCAST_API size_t ethcast_model_pred_len(const ethcast_model* model);
ETHCAST_API size_t ethcast_model_param_count(const ethcast_model* model);
ETHCAST_API size_t ethcast_model_trainable_param_count(const ethcast_model* model);
/* windows: n_windows x seq_len row-major; out: n_windows x pred_len. */
ETHCAST_API ethcast_status ethcast_model_predict(ethcast_context* ctx, const ethcast_model* model,
                                                 const double* windows, size_t n_windows, double* out);

#ifdef __cplusplus
}
#endif

#endif
