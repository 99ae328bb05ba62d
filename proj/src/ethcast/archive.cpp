#include "ethcast/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "ethcast/common.hpp"

namespace ethcast {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'C', 'W', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        fail(ErrorKind::Integrity, std::string("weight archive truncated while reading ") + what);
    }
    return value;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_text(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Block index of "h.3.attn..." / "layers.3.mlp...", or -1.
long block_index(const std::string& name) {
    for (const char* prefix : {"h.", "layers."}) {
        const std::size_t n = std::strlen(prefix);
        if (name.compare(0, n, prefix) == 0) {
            const auto dot = name.find('.', n);
            if (dot == std::string::npos) return -1;
            try {
                return std::stol(name.substr(n, dot - n));
            } catch (const std::exception&) {
                return -1;
            }
        }
    }
    return -1;
}

}  // namespace

void write_archive(std::ostream& out, const WeightArchive& archive, StorageType dtype) {
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, archive.size());
    for (const auto& [name, array] : archive) {
        if (element_count(array.shape) != array.values.size()) {
            fail(ErrorKind::Shape, "archive entry " + name + " has " + std::to_string(array.values.size()) +
                                       " values for shape " + shape_text(array.shape));
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(array.shape.size()));
        for (auto d : array.shape) put<std::uint64_t>(out, d);
        if (dtype == StorageType::Float64) {
            out.write(reinterpret_cast<const char*>(array.values.data()),
                      static_cast<std::streamsize>(array.values.size() * sizeof(double)));
        } else {
            for (double v : array.values) put<float>(out, static_cast<float>(v));
        }
    }
    if (!out) fail(ErrorKind::Io, "failed writing weight archive");
}

void write_archive(const std::filesystem::path& path, const WeightArchive& archive, StorageType dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot create weight archive " + path.string());
    write_archive(out, archive, dtype);
}

WeightArchive read_archive(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        fail(ErrorKind::Integrity, "not a weight archive (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kVersion) fail(ErrorKind::Integrity, "unsupported weight archive version " + std::to_string(version));
    const auto count = get<std::uint64_t>(in, "entry count");
    WeightArchive archive;
    for (std::uint64_t e = 0; e < count; ++e) {
        const auto name_len = get<std::uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) fail(ErrorKind::Integrity, "weight archive truncated in entry name");
        const auto dtype = get<std::uint8_t>(in, "dtype");
        if (dtype > 1) fail(ErrorKind::Integrity, "unknown dtype in archive entry " + name);
        const auto ndim = get<std::uint32_t>(in, "ndim");
        WeightArray array;
        for (std::uint32_t d = 0; d < ndim; ++d) array.shape.push_back(get<std::uint64_t>(in, "dims"));
        const std::size_t n = element_count(array.shape);
        array.values.resize(n);
        if (dtype == static_cast<std::uint8_t>(StorageType::Float64)) {
            if (!in.read(reinterpret_cast<char*>(array.values.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
                fail(ErrorKind::Integrity, "weight archive truncated in values of " + name);
            }
        } else {
            std::vector<float> tmp(n);
            if (!in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
                fail(ErrorKind::Integrity, "weight archive truncated in values of " + name);
            }
            std::copy(tmp.begin(), tmp.end(), array.values.begin());
        }
        archive.emplace(std::move(name), std::move(array));
    }
    return archive;
}

WeightArchive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open weight archive " + path.string());
    return read_archive(in);
}

WeightArchive archive_from_params(const ParameterStore& store) {
    WeightArchive archive;
    for (const auto& p : store) archive.emplace(p.name, WeightArray{p.shape, p.value});
    return archive;
}

LoadReport load_pretrained_weights(ParameterStore& store, const WeightArchive& archive) {
    LoadReport report;
    // Validate every shape before touching the store so a failed load leaves it unchanged.
    for (const auto& p : store) {
        const auto it = archive.find(p.name);
        if (it != archive.end() && it->second.shape != p.shape) {
            fail(ErrorKind::Shape, "shape mismatch for " + p.name + ": model " + shape_text(p.shape) + ", archive " +
                                       shape_text(it->second.shape));
        }
    }
    std::set<std::string> used;
    long model_max_block = -1;
    for (auto& p : store) {
        model_max_block = std::max(model_max_block, block_index(p.name));
        const auto it = archive.find(p.name);
        if (it == archive.end()) {
            report.missing.push_back(p.name);
            continue;
        }
        p.value = it->second.values;
        report.loaded.push_back(p.name);
        used.insert(p.name);
    }
    long archive_max_block = -1;
    for (const auto& [name, array] : archive) {
        archive_max_block = std::max(archive_max_block, block_index(name));
        if (!used.count(name)) report.unused.push_back(name);
    }
    report.archive_blocks = static_cast<std::size_t>(archive_max_block + 1);
    report.model_blocks = static_cast<std::size_t>(model_max_block + 1);
    report.truncated = report.archive_blocks > report.model_blocks;
    return report;
}

LoadReport load_pretrained_weights(TransformerForecaster& model, const WeightArchive& archive) {
    return load_pretrained_weights(model.params(), archive);
}

BackboneConfig reconcile_with_archive(BackboneConfig config, const WeightArchive& archive) {
    const char* ffn_key = config.variant == Variant::Gpt2 ? "h.0.mlp.c_fc.weight" : "layers.0.mlp.up_proj.weight";
    if (const auto it = archive.find(ffn_key); it != archive.end() && it->second.shape.size() == 2) {
        config.ffn_dim = it->second.shape[1];
    }
    if (config.variant == Variant::Gpt2) {
        if (const auto it = archive.find("wpe.weight"); it != archive.end() && it->second.shape.size() == 2) {
            config.max_positions = it->second.shape[0];
        }
    }
    return config;
}

}  // namespace ethcast
