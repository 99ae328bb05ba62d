#include "ethcast/eval.hpp"

#include <cmath>
#include <ostream>

#include "ethcast/train.hpp"

namespace ethcast {

MetricReport compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) {
        fail(ErrorKind::Shape, "metric inputs differ in length (" + std::to_string(actual.size()) + " vs " +
                                   std::to_string(predicted.size()) + ")");
    }
    if (actual.empty()) fail(ErrorKind::EmptyInput, "metrics need at least one value");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t k = 0; k < actual.size(); ++k) {
        const double e = actual[k] - predicted[k];
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const double n = static_cast<double>(actual.size());
    MetricReport r;
    r.n = actual.size();
    r.mae = abs_sum / n;
    r.mse = sq_sum / n;
    r.rmse = std::sqrt(r.mse);
    return r;
}

std::pair<MetricReport, PredictionTable> evaluate_model(const Forecaster& model, const WindowSet& test,
                                                        const StandardizationStats& stats,
                                                        std::span<const Date> target_dates) {
    if (test.empty()) fail(ErrorKind::EmptyInput, "test set has no windows");
    if (model.pred_len() != test.pred_len) {
        fail(ErrorKind::Shape, "model predicts " + std::to_string(model.pred_len()) + " days but windows hold " +
                                   std::to_string(test.pred_len));
    }
    if (!target_dates.empty() && target_dates.size() != test.size()) {
        fail(ErrorKind::Shape, "one target date per window is required");
    }
    const Matrix pred = predict_all(model, test.inputs);
    MetricReport report = compute_metrics(test.targets.data, pred.data);

    PredictionTable table;
    table.rows.reserve(test.size());
    for (std::size_t k = 0; k < test.size(); ++k) {
        PredictionRow row;
        row.date = target_dates.empty() ? std::to_string(k) : format_date(target_dates[k]);
        row.actual_std = test.targets(k, 0);
        row.pred_std = pred(k, 0);
        row.actual_usd = destandardize(row.actual_std, stats);
        row.pred_usd = destandardize(row.pred_std, stats);
        table.rows.push_back(std::move(row));
    }
    return {report, std::move(table)};
}

std::vector<Date> window_target_dates(const PriceSeries& segment, const WindowSet& windows) {
    std::vector<Date> dates;
    dates.reserve(windows.size());
    for (std::size_t origin : windows.origin_indices) dates.push_back(segment.records.at(origin + windows.seq_len).date);
    return dates;
}

void write_prediction_csv(std::ostream& out, const PredictionTable& table) {
    out << "date,actual_std,pred_std,actual_usd,pred_usd\n";
    for (const auto& r : table.rows) {
        out << r.date << ',' << format_double(r.actual_std) << ',' << format_double(r.pred_std) << ','
            << format_double(r.actual_usd) << ',' << format_double(r.pred_usd) << '\n';
    }
}

}  // namespace ethcast
