#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ethcast/registry.hpp"

namespace ethcast {

struct ComparisonRow {
    std::string model;
    std::string dataset;
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t runs = 0;  // seeds averaged into this row
};

struct ComparisonTable {
    std::string protocol;
    std::string scale_label;
    std::vector<ComparisonRow> rows;      // ascending MSE
    std::array<std::size_t, 3> best{};    // row index of the minimum MSE, MAE, RMSE
    std::string text;                     // aligned, minima marked with '*'

    std::string csv() const;
};

// Records without metrics are skipped; an error is raised when nothing is left,
// when protocols differ, or when scale labels differ.
ComparisonTable make_comparison_table(std::span<const ExperimentRecord> records);

}  // namespace ethcast
