#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ethcast/backbone.hpp"
#include "ethcast/params.hpp"

namespace ethcast {

struct WeightArray {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

using WeightArchive = std::map<std::string, WeightArray>;

enum class StorageType : std::uint8_t { Float32 = 0, Float64 = 1 };

// Binary container, little-endian:
//   "ECWA" | u32 version (1) | u64 entry count
//   per entry: u32 name length | name bytes | u8 dtype (0 f32, 1 f64)
//              | u32 ndim | u64 dims[ndim] | ndim-product values
void write_archive(std::ostream& out, const WeightArchive& archive, StorageType dtype = StorageType::Float64);
void write_archive(const std::filesystem::path& path, const WeightArchive& archive,
                   StorageType dtype = StorageType::Float64);
WeightArchive read_archive(std::istream& in);
WeightArchive read_archive(const std::filesystem::path& path);

WeightArchive archive_from_params(const ParameterStore& store);

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> missing;  // model parameters left at their initial values
    std::vector<std::string> unused;   // archive keys the model has no slot for
    std::size_t archive_blocks = 0;
    std::size_t model_blocks = 0;
    bool truncated = false;            // archive deeper than the model; leading blocks loaded
};

// Copies every archive entry whose name and shape match a model parameter.
// A name match with a different shape is a hard error.
LoadReport load_pretrained_weights(ParameterStore& store, const WeightArchive& archive);
LoadReport load_pretrained_weights(TransformerForecaster& model, const WeightArchive& archive);

// Adopts FFN width and positional table length from a checkpoint so that a
// config written for scratch builds still loads the published weights.
BackboneConfig reconcile_with_archive(BackboneConfig config, const WeightArchive& archive);

}  // namespace ethcast
