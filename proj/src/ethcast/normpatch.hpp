#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ethcast {

inline constexpr double kNormEps = 1e-5;

struct StandardizationStats {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    double eps = kNormEps;
};

enum class Direction { Forward, Inverse };

StandardizationStats fit_standardizer(std::span<const double> train_values);
std::vector<double> apply_standardizer(std::span<const double> values, const StandardizationStats& stats,
                                       Direction direction);
double standardize(double value, const StandardizationStats& stats);
double destandardize(double value, const StandardizationStats& stats);

struct RevinState {
    double mean = 0.0;
    double variance = 0.0;  // population variance of the window
    double eps = kNormEps;

    double scale() const;
};

enum class RevinMode { Normalize, Denormalize };

// Normalize ignores `state` and returns the window's own statistics;
// denormalize requires the state captured when the input window was normalized.
std::pair<std::vector<double>, RevinState> revin(std::span<const double> window, RevinMode mode,
                                                 const std::optional<RevinState>& state = std::nullopt,
                                                 double eps = kNormEps);

struct PatchGrid {
    std::vector<std::vector<double>> patches;
    std::size_t patch_len = 0;
    std::size_t stride = 0;
    std::size_t padded_length = 0;
};

std::size_t padded_length(std::size_t sequence_length, std::size_t patch_len, std::size_t stride);
std::size_t patch_count(std::size_t sequence_length, std::size_t patch_len, std::size_t stride);

// Right-pads by repeating the last value, then cuts patches every `stride`.
PatchGrid patchify(std::span<const double> sequence, std::size_t patch_len, std::size_t stride);

}  // namespace ethcast
