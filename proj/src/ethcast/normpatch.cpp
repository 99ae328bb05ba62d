#include "ethcast/normpatch.hpp"

#include <algorithm>
#include <cmath>

#include "ethcast/common.hpp"

namespace ethcast {

namespace {

std::pair<double, double> mean_and_variance(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    return {mean, sq / static_cast<double>(values.size())};
}

}  // namespace

StandardizationStats fit_standardizer(std::span<const double> train_values) {
    if (train_values.empty()) fail(ErrorKind::EmptyInput, "cannot fit standardizer on empty data");
    const auto [mean, var] = mean_and_variance(train_values);
    return {mean, std::sqrt(var), kNormEps};
}

double standardize(double value, const StandardizationStats& stats) {
    return (value - stats.mean) / (stats.std + stats.eps);
}

double destandardize(double value, const StandardizationStats& stats) {
    return value * (stats.std + stats.eps) + stats.mean;
}

std::vector<double> apply_standardizer(std::span<const double> values, const StandardizationStats& stats,
                                       Direction direction) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = direction == Direction::Forward ? standardize(values[i], stats) : destandardize(values[i], stats);
    }
    return out;
}

double RevinState::scale() const { return std::sqrt(variance + eps); }

std::pair<std::vector<double>, RevinState> revin(std::span<const double> window, RevinMode mode,
                                                 const std::optional<RevinState>& state, double eps) {
    if (mode == RevinMode::Normalize) {
        if (window.empty()) fail(ErrorKind::EmptyInput, "cannot normalize an empty window");
        const auto [mean, var] = mean_and_variance(window);
        RevinState s{mean, var, eps};
        const double scale = s.scale();
        std::vector<double> out(window.size());
        for (std::size_t i = 0; i < window.size(); ++i) out[i] = (window[i] - mean) / scale;
        return {std::move(out), s};
    }
    if (!state) fail(ErrorKind::Usage, "denormalize requires the state of the normalized input window");
    const double scale = state->scale();
    std::vector<double> out(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) out[i] = window[i] * scale + state->mean;
    return {std::move(out), *state};
}

std::size_t padded_length(std::size_t sequence_length, std::size_t patch_len, std::size_t stride) {
    return std::max(sequence_length + stride, patch_len);
}

std::size_t patch_count(std::size_t sequence_length, std::size_t patch_len, std::size_t stride) {
    if (patch_len < 1 || stride < 1) fail(ErrorKind::Config, "patch_len and stride must be at least 1");
    return (padded_length(sequence_length, patch_len, stride) - patch_len) / stride + 1;
}

PatchGrid patchify(std::span<const double> sequence, std::size_t patch_len, std::size_t stride) {
    if (patch_len < 1 || stride < 1) fail(ErrorKind::Config, "patch_len and stride must be at least 1");
    if (sequence.empty()) fail(ErrorKind::EmptyInput, "cannot patchify an empty sequence");
    PatchGrid grid;
    grid.patch_len = patch_len;
    grid.stride = stride;
    grid.padded_length = padded_length(sequence.size(), patch_len, stride);

    std::vector<double> padded(sequence.begin(), sequence.end());
    padded.resize(grid.padded_length, sequence.back());

    const std::size_t n = patch_count(sequence.size(), patch_len, stride);
    grid.patches.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto start = padded.begin() + static_cast<std::ptrdiff_t>(p * stride);
        grid.patches.emplace_back(start, start + static_cast<std::ptrdiff_t>(patch_len));
    }
    return grid;
}

}  // namespace ethcast
