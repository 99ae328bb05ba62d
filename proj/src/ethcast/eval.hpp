#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ethcast/forecaster.hpp"
#include "ethcast/ingest.hpp"
#include "ethcast/normpatch.hpp"

namespace ethcast {

inline constexpr const char* kStandardizedScale = "standardized(train mean/std)";

struct MetricReport {
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
    std::string scale_label = kStandardizedScale;
};

MetricReport compute_metrics(std::span<const double> actual, std::span<const double> predicted);

struct PredictionRow {
    std::string date;  // ISO date of the first predicted day, or the window index when dates are unknown
    double actual_std = 0.0;
    double pred_std = 0.0;
    double actual_usd = 0.0;
    double pred_usd = 0.0;
};

// One row per test window; multi-day horizons contribute their first day.
struct PredictionTable {
    std::vector<PredictionRow> rows;
};

// target_dates, when non-empty, holds the first target date of each window.
std::pair<MetricReport, PredictionTable> evaluate_model(const Forecaster& model, const WindowSet& test,
                                                        const StandardizationStats& stats,
                                                        std::span<const Date> target_dates = {});

// First target date of every window cut from `segment`.
std::vector<Date> window_target_dates(const PriceSeries& segment, const WindowSet& windows);

// date,actual_std,pred_std,actual_usd,pred_usd
void write_prediction_csv(std::ostream& out, const PredictionTable& table);

}  // namespace ethcast
