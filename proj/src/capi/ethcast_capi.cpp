#include "ethcast/ethcast.h"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "ethcast/archive.hpp"
#include "ethcast/config.hpp"
#include "ethcast/eval.hpp"
#include "ethcast/ingest.hpp"
#include "ethcast/pipeline.hpp"

struct ethcast_context {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> options;
    ethcast_log_fn log = nullptr;
    void* log_user = nullptr;
    std::string error;
    std::string output;
    std::vector<std::string> artifacts;
};

struct ethcast_series {
    ethcast::PriceSeries series;
};

struct ethcast_model {
    std::unique_ptr<ethcast::Forecaster> model;
};

namespace {

ethcast_status status_for(ethcast::ErrorKind kind) {
    using ethcast::ErrorKind;
    switch (kind) {
        case ErrorKind::Usage: return ETHCAST_ERR_USAGE;
        case ErrorKind::Config: return ETHCAST_ERR_CONFIG;
        case ErrorKind::Io: return ETHCAST_ERR_IO;
        case ErrorKind::Schema: return ETHCAST_ERR_SCHEMA;
        case ErrorKind::Parse: return ETHCAST_ERR_PARSE;
        case ErrorKind::EmptyInput: return ETHCAST_ERR_EMPTY_INPUT;
        case ErrorKind::Duplicate: return ETHCAST_ERR_DUPLICATE;
        case ErrorKind::Continuity: return ETHCAST_ERR_CONTINUITY;
        case ErrorKind::Split: return ETHCAST_ERR_SPLIT;
        case ErrorKind::InsufficientData: return ETHCAST_ERR_INSUFFICIENT_DATA;
        case ErrorKind::Shape: return ETHCAST_ERR_SHAPE;
        case ErrorKind::NumericFailure: return ETHCAST_ERR_NUMERIC;
        case ErrorKind::Integrity: return ETHCAST_ERR_INTEGRITY;
    }
    return ETHCAST_ERR_INTERNAL;
}

// Runs f, translating exceptions into a status and ctx->error.
template <typename F>
ethcast_status guarded(ethcast_context* ctx, F&& f) {
    try {
        f();
        if (ctx) ctx->error.clear();
        return ETHCAST_OK;
    } catch (const ethcast::Error& e) {
        if (ctx) ctx->error = std::string(ethcast::error_kind_name(e.kind())) + ": " + e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        if (ctx) ctx->error = "out of memory";
        return ETHCAST_ERR_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        if (ctx) ctx->error = std::string("io: ") + e.what();
        return ETHCAST_ERR_IO;
    } catch (const std::exception& e) {
        if (ctx) ctx->error = std::string("internal: ") + e.what();
        return ETHCAST_ERR_INTERNAL;
    } catch (...) {
        if (ctx) ctx->error = "internal: unknown exception";
        return ETHCAST_ERR_INTERNAL;
    }
}

ethcast_status invalid(ethcast_context* ctx, const char* what) {
    if (ctx) ctx->error = std::string("invalid argument: ") + what;
    return ETHCAST_ERR_INVALID_ARGUMENT;
}

ethcast::RunRequest request_for(ethcast_context* ctx) {
    ethcast::RunRequest req;
    req.config_path = ctx->config_path;
    req.overrides = ctx->options;
    if (ctx->log) {
        req.log = [fn = ctx->log, user = ctx->log_user](std::string_view line) {
            const std::string text(line);
            fn(text.c_str(), user);
        };
    }
    return req;
}

}  // namespace

extern "C" {

const char* ethcast_version(void) { return "1.0.0"; }

const char* ethcast_status_name(ethcast_status status) {
    switch (status) {
        case ETHCAST_OK: return "ok";
        case ETHCAST_ERR_USAGE: return "usage";
        case ETHCAST_ERR_CONFIG: return "config";
        case ETHCAST_ERR_IO: return "io";
        case ETHCAST_ERR_SCHEMA: return "schema";
        case ETHCAST_ERR_PARSE: return "parse";
        case ETHCAST_ERR_EMPTY_INPUT: return "empty_input";
        case ETHCAST_ERR_DUPLICATE: return "duplicate";
        case ETHCAST_ERR_CONTINUITY: return "continuity";
        case ETHCAST_ERR_SPLIT: return "split";
        case ETHCAST_ERR_INSUFFICIENT_DATA: return "insufficient_data";
        case ETHCAST_ERR_SHAPE: return "shape";
        case ETHCAST_ERR_NUMERIC: return "numeric_failure";
        case ETHCAST_ERR_INTEGRITY: return "integrity";
        case ETHCAST_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case ETHCAST_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int ethcast_exit_code(ethcast_status status) {
    if (status == ETHCAST_OK) return 0;
    if (status == ETHCAST_ERR_USAGE || status == ETHCAST_ERR_INVALID_ARGUMENT) return 2;
    return 1;
}

ethcast_status ethcast_context_create(ethcast_context** out) {
    if (!out) return ETHCAST_ERR_INVALID_ARGUMENT;
    *out = new (std::nothrow) ethcast_context();
    return *out ? ETHCAST_OK : ETHCAST_ERR_INTERNAL;
}

void ethcast_context_destroy(ethcast_context* ctx) { delete ctx; }

const char* ethcast_last_error(const ethcast_context* ctx) { return ctx ? ctx->error.c_str() : ""; }

ethcast_status ethcast_set_config(ethcast_context* ctx, const char* path) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    if (!path) return invalid(ctx, "path is null");
    return guarded(ctx, [&] {
        ethcast::ConfigFile::load(path);  // surface parse errors here
        ctx->config_path = path;
    });
}

ethcast_status ethcast_set_option(ethcast_context* ctx, const char* key, const char* value) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    if (!key || !value) return invalid(ctx, "key and value are required");
    return guarded(ctx, [&] {
        ethcast::ConfigFile probe;
        probe.set(key, value);  // rejects unknown keys
        ctx->options.emplace_back(key, value);
    });
}

ethcast_status ethcast_clear_options(ethcast_context* ctx) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    ctx->options.clear();
    ctx->config_path.clear();
    ctx->error.clear();
    return ETHCAST_OK;
}

ethcast_status ethcast_set_log_callback(ethcast_context* ctx, ethcast_log_fn fn, void* user) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    ctx->log = fn;
    ctx->log_user = user;
    return ETHCAST_OK;
}

ethcast_status ethcast_run_command(ethcast_context* ctx, const char* command) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    if (!command) return invalid(ctx, "command is null");
    ctx->output.clear();
    ctx->artifacts.clear();
    return guarded(ctx, [&] {
        auto result = ethcast::run_command(command, request_for(ctx));
        ctx->output = std::move(result.output);
        ctx->artifacts = std::move(result.artifacts);
    });
}

const char* ethcast_last_output(const ethcast_context* ctx) { return ctx ? ctx->output.c_str() : ""; }

size_t ethcast_artifact_count(const ethcast_context* ctx) { return ctx ? ctx->artifacts.size() : 0; }

const char* ethcast_artifact(const ethcast_context* ctx, size_t index) {
    if (!ctx || index >= ctx->artifacts.size()) return nullptr;
    return ctx->artifacts[index].c_str();
}

size_t ethcast_config_key_count(void) { return ethcast::config_keys().size(); }

ethcast_status ethcast_config_key(size_t index, const char** name, const char** help) {
    const auto& keys = ethcast::config_keys();
    if (index >= keys.size()) return ETHCAST_ERR_INVALID_ARGUMENT;
    if (name) *name = keys[index].name;
    if (help) *help = keys[index].help;
    return ETHCAST_OK;
}

ethcast_status ethcast_compute_metrics(ethcast_context* ctx, const double* actual, const double* predicted, size_t n,
                                       ethcast_metrics* out) {
    if (!out || (n > 0 && (!actual || !predicted))) return invalid(ctx, "null buffer");
    return guarded(ctx, [&] {
        const auto r = ethcast::compute_metrics({actual, n}, {predicted, n});
        *out = ethcast_metrics{r.mse, r.mae, r.rmse, r.n};
    });
}

ethcast_status ethcast_series_load(ethcast_context* ctx, const char* path, const char* format, ethcast_series** out) {
    if (!out || !path) return invalid(ctx, "path and out are required");
    *out = nullptr;
    return guarded(ctx, [&] {
        const std::string fmt = format ? format : "kaggle";
        ethcast::ColumnSchema schema;
        if (fmt == "canonical") {
            schema = ethcast::ColumnSchema::canonical();
        } else if (fmt != "kaggle") {
            ethcast::fail(ethcast::ErrorKind::Usage, "format must be kaggle or canonical");
        }
        auto s = std::make_unique<ethcast_series>();
        s->series = ethcast::regularize_daily(ethcast::read_price_csv(path, schema));
        *out = s.release();
    });
}

void ethcast_series_destroy(ethcast_series* series) { delete series; }

size_t ethcast_series_length(const ethcast_series* series) { return series ? series->series.size() : 0; }

ethcast_status ethcast_series_values(ethcast_context* ctx, const ethcast_series* series, const char* channel,
                                     double* out, size_t capacity) {
    if (!series || !channel || (!out && capacity > 0)) return invalid(ctx, "null argument");
    return guarded(ctx, [&] {
        const auto values = ethcast::channel_values(series->series, ethcast::parse_channel(channel));
        if (capacity < values.size()) ethcast::fail(ethcast::ErrorKind::Shape, "output buffer too small");
        std::copy(values.begin(), values.end(), out);
    });
}

ethcast_status ethcast_model_create(ethcast_context* ctx, ethcast_model** out) {
    if (!ctx) return ETHCAST_ERR_INVALID_ARGUMENT;
    if (!out) return invalid(ctx, "out is null");
    *out = nullptr;
    return guarded(ctx, [&] {
        const auto cfg = ethcast::resolve_config(ethcast::load_config(request_for(ctx)));
        auto m = std::make_unique<ethcast_model>();
        m->model = ethcast::build_model(cfg);
        *out = m.release();
    });
}

ethcast_status ethcast_model_load_checkpoint(ethcast_context* ctx, ethcast_model* model, const char* path) {
    if (!model || !path) return invalid(ctx, "model and path are required");
    return guarded(ctx, [&] {
        const auto archive = ethcast::read_archive(path);
        const auto report = ethcast::load_pretrained_weights(model->model->params(), archive);
        if (!report.missing.empty()) {
            ethcast::fail(ethcast::ErrorKind::Shape, "checkpoint lacks " + std::to_string(report.missing.size()) +
                                                         " model tensors, first: " + report.missing.front());
        }
    });
}

void ethcast_model_destroy(ethcast_model* model) { delete model; }

size_t ethcast_model_seq_len(const ethcast_model* model) { return model ? model->model->seq_len() : 0; }

size_t ethcast_model_pred_len(const ethcast_model* model) { return model ? model->model->pred_len() : 0; }

size_t ethcast_model_param_count(const ethcast_model* model) {
    return model ? model->model->params().element_count() : 0;
}

size_t ethcast_model_trainable_param_count(const ethcast_model* model) {
    return model ? model->model->params().trainable_element_count() : 0;
}

ethcast_status ethcast_model_predict(ethcast_context* ctx, const ethcast_model* model, const double* windows,
                                     size_t n_windows, double* out) {
    if (!model || !windows || !out) return invalid(ctx, "null argument");
    return guarded(ctx, [&] {
        const auto& m = *model->model;
        ethcast::Matrix x(n_windows, m.seq_len());
        std::copy(windows, windows + n_windows * m.seq_len(), x.data.begin());
        const auto y = m.predict(x);
        std::copy(y.data.begin(), y.data.end(), out);
    });
}

}  // extern "C"
