#include "ethcast/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ethcast/backbone.hpp"
#include "ethcast/baselines.hpp"
#include "ethcast/comparison.hpp"
#include "ethcast/registry.hpp"
#include "ethcast/train.hpp"

namespace ethcast {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void note(const RunRequest& req, const std::string& line) {
    if (req.log) req.log(line);
}

void write_text(const fs::path& path, const std::string& text, RunResult& result) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::Io, "short write to " + path.string());
    result.artifacts.push_back(path.string());
}

fs::path registry_path(const ExperimentConfig& cfg) {
    if (!cfg.output.registry.empty()) return cfg.output.registry;
    if (const char* root = std::getenv("ETHCAST_REGISTRY"); root && *root) return fs::path(root) / "registry.jsonl";
    return fs::path(cfg.output.dir) / "registry.jsonl";
}

ordered_json metrics_json(const MetricReport& m) {
    return ordered_json{{"mse", m.mse}, {"mae", m.mae}, {"rmse", m.rmse}, {"n", m.n}, {"scale_label", m.scale_label}};
}

std::string prediction_csv(const PredictionTable& table) {
    std::ostringstream out;
    write_prediction_csv(out, table);
    return out.str();
}

std::string describe(const MetricReport& m) {
    std::ostringstream out;
    out << "mse=" << format_double(m.mse) << " mae=" << format_double(m.mae) << " rmse=" << format_double(m.rmse)
        << " n=" << m.n << " scale=" << m.scale_label;
    return out.str();
}

WindowSet standardized_windows(const PriceSeries& segment, const ExperimentConfig& cfg,
                               const StandardizationStats& stats) {
    const auto raw = channel_values(segment, cfg.data.channel);
    const auto values = apply_standardizer(raw, stats, Direction::Forward);
    return make_windows(values, cfg.data.seq_len, cfg.data.pred_len);
}

// Model kind and protocol are part of what the command means, not just of the config.
ExperimentConfig resolve_for(const RunRequest& request, std::optional<Protocol> protocol) {
    ConfigFile file = load_config(request);
    if (protocol) file.set("train.protocol", protocol_name(*protocol));
    return resolve_config(file);
}

struct Checkpoint {
    WeightArchive archive;
    ordered_json manifest;
    fs::path path;
};

// Explicit output.checkpoint, else the newest registry record for the same experiment.
Checkpoint locate_checkpoint(const ExperimentConfig& cfg, const PreparedData& data) {
    fs::path path = cfg.output.checkpoint;
    if (path.empty()) {
        const std::string hash = experiment_hash(cfg.identity, cfg.train.seed, data.digest);
        const auto records = read_registry(registry_path(cfg));
        for (auto it = records.rbegin(); it != records.rend(); ++it) {
            if (it->content_hash == hash && !it->artifacts.checkpoint.empty()) {
                path = it->artifacts.checkpoint;
                break;
            }
        }
        if (path.empty()) {
            fail(ErrorKind::Io, "no checkpoint given and no registry record matches this config, seed and dataset in " +
                                    registry_path(cfg).string());
        }
    }
    Checkpoint ck;
    ck.path = path;
    ck.archive = read_archive(path);
    const fs::path manifest_path = path.parent_path() / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        try {
            ck.manifest = ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Integrity, manifest_path.string() + ": " + e.what());
        }
        if (ck.manifest.contains("dataset_digest") && ck.manifest["dataset_digest"] != data.digest) {
            fail(ErrorKind::Integrity, "checkpoint " + path.string() + " was trained on a different dataset");
        }
    }
    return ck;
}

std::unique_ptr<Forecaster> model_from_checkpoint(ExperimentConfig cfg, const Checkpoint& ck) {
    cfg.model.weights.clear();
    if (is_backbone(cfg.model.kind)) cfg.model.backbone = reconcile_with_archive(cfg.model.backbone, ck.archive);
    auto model = build_model(cfg);
    const LoadReport report = load_pretrained_weights(model->params(), ck.archive);
    if (!report.missing.empty() || !report.unused.empty()) {
        fail(ErrorKind::Shape, "checkpoint " + ck.path.string() + " does not match the configured " + model->kind() +
                                   " model (" + std::to_string(report.missing.size()) + " missing, " +
                                   std::to_string(report.unused.size()) + " unused tensors)");
    }
    return model;
}

RunResult cmd_prepare(const RunRequest& request) {
    const ExperimentConfig cfg = resolve_for(request, std::nullopt);
    const PreparedData data = prepare_data(cfg);
    RunResult result;
    const fs::path out = cfg.output.dir;
    std::ostringstream canonical;
    write_canonical_csv(canonical, data.series);
    write_text(out / (cfg.data.name + ".canonical.csv"), canonical.str(), result);

    std::size_t filled = 0;
    for (const auto& r : data.series.records) filled += r.filled ? 1 : 0;
    auto segment = [](const PriceSeries& s) {
        ordered_json j{{"rows", s.size()}};
        if (!s.empty()) {
            j["first"] = format_date(s.records.front().date);
            j["last"] = format_date(s.records.back().date);
        }
        return j;
    };
    ordered_json manifest;
    manifest["dataset"] = cfg.data.name;
    manifest["source"] = cfg.data.path;
    manifest["dataset_digest"] = data.digest;
    manifest["rows"] = data.series.size();
    manifest["filled_rows"] = filled;
    manifest["ratios"] = {cfg.data.split.train_ratio, cfg.data.split.val_ratio, cfg.data.split.test_ratio};
    manifest["train"] = segment(data.split.train);
    manifest["val"] = segment(data.split.val);
    manifest["test"] = segment(data.split.test);
    manifest["channel"] = channel_name(cfg.data.channel);
    manifest["standardizer"] = {{"mean", data.stats.mean}, {"std", data.stats.std}, {"eps", data.stats.eps}};
    manifest["warnings"] = data.split.warnings;
    write_text(out / (cfg.data.name + ".split.json"), manifest.dump(2) + "\n", result);

    std::ostringstream msg;
    msg << "prepared " << cfg.data.name << ": " << data.series.size() << " days (" << filled << " filled), split "
        << data.split.train.size() << "/" << data.split.val.size() << "/" << data.split.test.size() << "\n";
    for (const auto& w : data.split.warnings) msg << "warning: " << w << "\n";
    result.output = msg.str();
    return result;
}

RunResult cmd_train(const RunRequest& request, std::optional<Protocol> protocol) {
    const ExperimentConfig cfg = resolve_for(request, protocol);
    const PreparedData data = prepare_data(cfg);
    LoadReport load;
    auto model = build_model(cfg, &load);
    if (!cfg.model.weights.empty()) {
        note(request, "loaded " + std::to_string(load.loaded.size()) + " pretrained tensors, " +
                          std::to_string(load.missing.size()) + " initialized fresh" +
                          (load.truncated ? ", archive truncated to the model depth" : ""));
    }
    note(request, std::string(model->kind()) + ": " + std::to_string(model->params().trainable_element_count()) +
                      " trainable of " + std::to_string(model->params().element_count()) + " parameters; " +
                      std::to_string(data.train.size()) + " train / " + std::to_string(data.val.size()) + " val / " +
                      std::to_string(data.test.size()) + " test windows");

    const TrainHistory history =
        fit(*model, data.train, data.val, cfg.train, [&](std::size_t epoch, double tl, double vl, double lr) {
            note(request, "epoch " + std::to_string(epoch + 1) + " train_loss=" + format_double(tl) +
                              " val_loss=" + format_double(vl) + " lr=" + format_double(lr));
        });
    const auto [metrics, table] = evaluate_model(*model, data.test, data.stats, data.test_dates);

    const std::string hash = experiment_hash(cfg.identity, cfg.train.seed, data.digest);
    const fs::path run_dir = fs::path(cfg.output.dir) / "runs" /
                             (hash.substr(0, 16) + "-" + protocol_name(cfg.train.protocol) + "-s" +
                              std::to_string(cfg.train.seed));
    RunResult result;
    fs::create_directories(run_dir);
    const fs::path ckpt = run_dir / "checkpoint.ecwa";
    write_archive(ckpt, archive_from_params(model->params()));
    result.artifacts.push_back(ckpt.string());

    ordered_json manifest;
    manifest["model"] = model->kind();
    manifest["protocol"] = protocol_name(cfg.train.protocol);
    manifest["seed"] = cfg.train.seed;
    manifest["dataset"] = cfg.data.name;
    manifest["dataset_digest"] = data.digest;
    manifest["content_hash"] = hash;
    manifest["standardizer"] = {{"mean", data.stats.mean}, {"std", data.stats.std}, {"eps", data.stats.eps}};
    manifest["epochs_run"] = history.epochs_run;
    manifest["best_epoch"] = history.best_epoch;
    manifest["best_val_loss"] = data.val.empty() ? ordered_json(nullptr) : ordered_json(history.val_loss[history.best_epoch]);
    manifest["stopped_early"] = history.stopped_early;
    manifest["train_windows"] = data.train.size();
    manifest["trainable_parameters"] = model->params().trainable_names();
    if (!cfg.model.weights.empty()) {
        manifest["pretrained"] = {{"archive", cfg.model.weights},
                                  {"loaded", load.loaded.size()},
                                  {"missing", load.missing},
                                  {"unused", load.unused.size()},
                                  {"truncated", load.truncated}};
    }
    manifest["metrics"] = metrics_json(metrics);
    manifest["config"] = cfg.snapshot;
    write_text(run_dir / "manifest.json", manifest.dump(2) + "\n", result);

    std::ostringstream hist;
    hist << "epoch,train_loss,val_loss,lr\n";
    for (std::size_t e = 0; e < history.epochs_run; ++e) {
        hist << e + 1 << ',' << format_double(history.train_loss[e]) << ',' << format_double(history.val_loss[e])
             << ',' << format_double(history.learning_rate[e]) << '\n';
    }
    write_text(run_dir / "history.csv", hist.str(), result);
    write_text(run_dir / "predictions.csv", prediction_csv(table), result);

    ExperimentRecord record;
    record.content_hash = hash;
    record.timestamp = utc_timestamp();
    record.protocol = protocol_name(cfg.train.protocol);
    record.model = model->kind();
    record.dataset = cfg.data.name;
    record.dataset_digest = data.digest;
    record.seed = cfg.train.seed;
    record.metrics = metrics;
    record.artifacts.checkpoint = ckpt.string();
    record.artifacts.predictions = (run_dir / "predictions.csv").string();
    record.config_snapshot = cfg.snapshot;
    const fs::path reg = registry_path(cfg);
    const auto records = registry_append(record, reg);

    std::ostringstream msg;
    msg << "record " << records.back().id << " (" << record.protocol << ", " << record.model << ", "
        << record.dataset << ", seed " << record.seed << ")\n"
        << describe(metrics) << "\n"
        << "epochs " << history.epochs_run << (history.stopped_early ? " (early stop)" : "") << ", best epoch "
        << history.best_epoch + 1 << "\n"
        << "checkpoint " << ckpt.string() << "\n"
        << "registry " << reg.string() << " (" << records.size() << " records)\n";
    result.output = msg.str();
    return result;
}

RunResult cmd_evaluate(const RunRequest& request) {
    const ExperimentConfig cfg = resolve_for(request, std::nullopt);
    const PreparedData data = prepare_data(cfg);
    const Checkpoint ck = locate_checkpoint(cfg, data);
    const auto model = model_from_checkpoint(cfg, ck);
    const auto [metrics, table] = evaluate_model(*model, data.test, data.stats, data.test_dates);

    RunResult result;
    const fs::path dir = fs::path(cfg.output.dir) / "evaluate";
    ordered_json j = metrics_json(metrics);
    j["model"] = model->kind();
    j["dataset"] = cfg.data.name;
    j["checkpoint"] = ck.path.string();
    write_text(dir / "metrics.json", j.dump(2) + "\n", result);
    write_text(dir / "predictions.csv", prediction_csv(table), result);
    result.output = model->kind() + " on " + cfg.data.name + ": " + describe(metrics) + "\n";
    return result;
}

RunResult cmd_compare(const RunRequest& request) {
    const ExperimentConfig cfg = resolve_for(request, std::nullopt);
    const fs::path reg = registry_path(cfg);
    const std::string protocol = protocol_name(cfg.train.protocol);
    std::vector<ExperimentRecord> selected;
    for (auto& r : read_registry(reg)) {
        if (r.protocol == protocol) selected.push_back(std::move(r));
    }
    if (selected.empty()) fail(ErrorKind::EmptyInput, "no " + protocol + " records in " + reg.string());
    const ComparisonTable table = make_comparison_table(selected);
    RunResult result;
    const fs::path out = cfg.output.dir;
    write_text(out / ("comparison_" + protocol + ".txt"), table.text, result);
    write_text(out / ("comparison_" + protocol + ".csv"), table.csv(), result);
    result.output = table.text;
    return result;
}

RunResult cmd_export_plot_data(const RunRequest& request) {
    const ExperimentConfig cfg = resolve_for(request, std::nullopt);
    const PreparedData data = prepare_data(cfg);
    RunResult result;
    const fs::path dir = fs::path(cfg.output.dir) / "plot";

    std::ostringstream series;
    series << "date," << channel_name(cfg.data.channel) << ",filled,segment\n";
    auto emit = [&](const PriceSeries& s, const char* label) {
        const auto values = channel_values(s, cfg.data.channel);
        for (std::size_t i = 0; i < s.size(); ++i) {
            series << format_date(s.records[i].date) << ',' << format_double(values[i]) << ','
                   << (s.records[i].filled ? 1 : 0) << ',' << label << '\n';
        }
    };
    emit(data.split.train, "train");
    emit(data.split.val, "val");
    emit(data.split.test, "test");
    write_text(dir / "series.csv", series.str(), result);

    const Checkpoint ck = locate_checkpoint(cfg, data);
    const auto model = model_from_checkpoint(cfg, ck);
    const auto [metrics, table] = evaluate_model(*model, data.test, data.stats, data.test_dates);
    write_text(dir / "predictions.csv", prediction_csv(table), result);
    result.output = "wrote " + std::to_string(data.series.size()) + " series rows and " +
                    std::to_string(table.rows.size()) + " prediction rows to " + dir.string() + "\n";
    return result;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"prepare", "train", "evaluate", "fewshot", "compare",
                                                   "export-plot-data"};
    return names;
}

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::Usage ? 2 : 1; }

ConfigFile load_config(const RunRequest& request) {
    ConfigFile file = request.config_path.empty() ? ConfigFile{} : ConfigFile::load(request.config_path);
    for (const auto& [key, value] : request.overrides) {
        if (key == "model.kind" && file.get("model.kind").value_or("gpt2") != value) {
            ConfigFile kept;
            for (const auto& [k, v] : file.values()) {
                if (k.rfind("model.", 0) != 0) kept.set(k, v);
            }
            file = std::move(kept);
        }
        file.set(key, value);
    }
    return file;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    if (cfg.data.path.empty()) fail(ErrorKind::Config, "config key data.path is not set");
    if (!fs::exists(cfg.data.path)) fail(ErrorKind::Io, "dataset not found: " + cfg.data.path);
    PreparedData d;
    d.digest = sha256_file_hex(cfg.data.path);
    d.series = regularize_daily(read_price_csv(cfg.data.path, cfg.data.schema), cfg.data.gap_policy);
    const std::size_t need = cfg.data.seq_len + cfg.data.pred_len;
    d.split = chronological_split(d.series, cfg.data.split, need);
    d.stats = fit_standardizer(channel_values(d.split.train, cfg.data.channel));

    d.train_segment = cfg.train.protocol == Protocol::FewShot
                          ? few_shot_truncate(d.split.train, cfg.train.few_shot_fraction, cfg.data.seq_len,
                                              cfg.data.pred_len)
                          : d.split.train;
    d.train = standardized_windows(d.train_segment, cfg, d.stats);
    if (d.split.val.size() >= need) {
        d.val = standardized_windows(d.split.val, cfg, d.stats);
    } else {
        d.val.seq_len = cfg.data.seq_len;
        d.val.pred_len = cfg.data.pred_len;
        d.val.inputs = Matrix(0, cfg.data.seq_len);
        d.val.targets = Matrix(0, cfg.data.pred_len);
    }
    d.test = standardized_windows(d.split.test, cfg, d.stats);
    d.test_dates = window_target_dates(d.split.test, d.test);
    return d;
}

std::unique_ptr<Forecaster> build_model(const ExperimentConfig& cfg, LoadReport* report) {
    const auto& m = cfg.model;
    if (!is_backbone(m.kind)) {
        if (!m.weights.empty()) fail(ErrorKind::Config, "config key model.weights applies to gpt2 and llama only");
        return build_baseline(m.baseline);
    }
    BackboneConfig bc = m.backbone;
    WeightArchive archive;
    if (!m.weights.empty()) {
        archive = read_archive(m.weights);
        bc = reconcile_with_archive(bc, archive);
    }
    auto model = build_backbone(bc, cfg.train.seed);
    if (!m.weights.empty()) {
        LoadReport r = load_pretrained_weights(*model, archive);
        if (report) *report = std::move(r);
    }
    apply_freeze_policy(*model, m.freeze);
    return model;
}

RunResult run_command(std::string_view command, const RunRequest& request) {
    if (command == "prepare") return cmd_prepare(request);
    if (command == "train") return cmd_train(request, std::nullopt);
    if (command == "fewshot") return cmd_train(request, Protocol::FewShot);
    if (command == "evaluate") return cmd_evaluate(request);
    if (command == "compare") return cmd_compare(request);
    if (command == "export-plot-data") return cmd_export_plot_data(request);
    fail(ErrorKind::Usage, "unknown command \"" + std::string(command) +
                               "\" (prepare|train|evaluate|fewshot|compare|export-plot-data)");
}

}  // namespace ethcast
