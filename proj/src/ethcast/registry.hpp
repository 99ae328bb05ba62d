#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/eval.hpp"

namespace ethcast {

struct ArtifactPaths {
    std::string checkpoint;
    std::string predictions;
};

struct ExperimentRecord {
    // <first 16 hex of content_hash>-<1-based position in the registry>; assigned on append
    std::string id;
    std::string content_hash;  // sha256 over (config, seed, dataset digest)
    std::string timestamp;     // UTC, ISO 8601
    std::string protocol;
    std::string model;
    std::string dataset;
    std::string dataset_digest;
    std::uint64_t seed = 0;
    std::optional<MetricReport> metrics;  // only for completed runs
    ArtifactPaths artifacts;
    std::string config_snapshot;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);
std::string experiment_hash(std::string_view config_text, std::uint64_t seed, std::string_view dataset_digest);
std::string utc_timestamp();

// Single-line JSON; parsing and re-serializing yields the same bytes.
std::string record_to_json(const ExperimentRecord& record);
ExperimentRecord record_from_json(std::string_view line);

// Absent file reads as an empty registry. Malformed or truncated lines raise
// an Integrity error naming the 0-based record index.
std::vector<ExperimentRecord> read_registry(const std::filesystem::path& path);

// Validates the existing file, assigns record.id, and rewrites the registry via
// a temp file + rename while holding an exclusive lock on "<path>.lock".
// Existing bytes are preserved verbatim.
std::vector<ExperimentRecord> registry_append(ExperimentRecord record, const std::filesystem::path& path);

}  // namespace ethcast
