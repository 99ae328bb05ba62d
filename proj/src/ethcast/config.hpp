#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/backbone.hpp"
#include "ethcast/baselines.hpp"
#include "ethcast/ingest.hpp"
#include "ethcast/train.hpp"

namespace ethcast {

struct ConfigKey {
    const char* name;  // "section.key"
    const char* help;
};

// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Sectioned key = value text:
//
//   # comment
//   [train]
//   epochs = 20
//
// A fully qualified "section.key = value" line is accepted anywhere.
// Unknown keys are Config errors that name the key.
class ConfigFile {
public:
    static ConfigFile parse(std::string_view text, std::string_view origin = "config");
    static ConfigFile load(const std::filesystem::path& path);

    void set(std::string_view key, std::string value);
    std::optional<std::string> get(std::string_view key) const;
    bool has(std::string_view key) const { return values_.count(std::string(key)) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    // Sorted "key=value" lines of every explicit value that defines the
    // experiment (output paths, data path and seed excluded).
    std::string identity_text() const;
    // Sorted "key=value" lines of every explicit value.
    std::string text() const;

private:
    std::map<std::string, std::string> values_;
};

enum class ModelKind { Gpt2, Llama, Ann, Mlp, Lstm, PatchTst };

ModelKind parse_model_kind(std::string_view name);
const char* model_kind_name(ModelKind kind);
bool is_backbone(ModelKind kind);

struct DataConfig {
    std::string path;
    std::string name;
    ColumnSchema schema;
    GapPolicy gap_policy = GapPolicy::ForwardFill;
    Channel channel = Channel::Open;
    std::size_t seq_len = 7;
    std::size_t pred_len = 1;
    SplitSpec split;
};

struct ModelConfig {
    ModelKind kind = ModelKind::Gpt2;
    BackboneConfig backbone;   // gpt2 / llama
    FreezeMode freeze = FreezeMode::Fpt;
    std::string weights;       // pretrained archive, optional
    BaselineConfig baseline;   // ann / mlp / lstm / patchtst
    std::size_t vocab_size = 0;  // informational; inputs are patches, not tokens
};

struct OutputConfig {
    std::string dir = "out";
    std::string registry;    // empty: environment, then <dir>/registry.jsonl
    std::string checkpoint;  // evaluate / export-plot-data input
};

struct ExperimentConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    OutputConfig output;
    std::string identity;  // ConfigFile::identity_text()
    std::string snapshot;  // ConfigFile::text()
};

ExperimentConfig resolve_config(const ConfigFile& file);

}  // namespace ethcast
