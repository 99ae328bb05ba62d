#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ethcast/archive.hpp"
#include "ethcast/config.hpp"
#include "ethcast/eval.hpp"
#include "ethcast/forecaster.hpp"
#include "ethcast/ingest.hpp"
#include "ethcast/normpatch.hpp"

namespace ethcast {

using LogSink = std::function<void(std::string_view)>;

struct RunRequest {
    std::string config_path;  // optional; overrides alone can define a run
    // "section.key" -> value, applied in order after the file
    std::vector<std::pair<std::string, std::string>> overrides;
    LogSink log;
};

struct RunResult {
    std::string output;                  // human-readable summary
    std::vector<std::string> artifacts;  // files written
};

// prepare | train | evaluate | fewshot | compare | export-plot-data.
// Unknown commands raise a Usage error.
RunResult run_command(std::string_view command, const RunRequest& request);

const std::vector<std::string>& command_names();

// Exit status for an error kind: 2 for usage errors, 1 otherwise.
int exit_code_for(ErrorKind kind);

// Config file + overrides. A --model override that changes the model kind
// drops the file's other model.* keys so the new kind starts from its defaults.
ConfigFile load_config(const RunRequest& request);

struct PreparedData {
    PriceSeries series;  // regularized
    SplitResult split;
    PriceSeries train_segment;  // split.train, truncated under few_shot
    std::string digest;         // sha256 of the raw dataset bytes
    StandardizationStats stats;  // fitted on the full train split
    WindowSet train;
    WindowSet val;  // may be empty
    WindowSet test;
    std::vector<Date> test_dates;
};

PreparedData prepare_data(const ExperimentConfig& config);

// Builds the configured model with seed train.seed, loads model.weights when
// set and applies the freeze policy. `report` receives the pretrained load report.
std::unique_ptr<Forecaster> build_model(const ExperimentConfig& config, LoadReport* report = nullptr);

}  // namespace ethcast
