#include "ethcast/comparison.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <utility>

namespace ethcast {

namespace {

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string ComparisonTable::csv() const {
    std::ostringstream out;
    out << "model,mse,mae,rmse,dataset,runs\n";
    for (const auto& r : rows) {
        out << r.model << ',' << format_double(r.mse) << ',' << format_double(r.mae) << ',' << format_double(r.rmse)
            << ',' << r.dataset << ',' << r.runs << '\n';
    }
    return out.str();
}

ComparisonTable make_comparison_table(std::span<const ExperimentRecord> records) {
    ComparisonTable table;
    std::map<std::pair<std::string, std::string>, ComparisonRow> groups;
    for (const auto& r : records) {
        if (!r.metrics) continue;
        if (table.protocol.empty()) {
            table.protocol = r.protocol;
            table.scale_label = r.metrics->scale_label;
        } else if (r.protocol != table.protocol) {
            fail(ErrorKind::Usage, "cannot compare protocols \"" + table.protocol + "\" and \"" + r.protocol + "\"");
        } else if (r.metrics->scale_label != table.scale_label) {
            fail(ErrorKind::Usage, "cannot compare metrics on different scales");
        }
        auto& row = groups[{r.model, r.dataset}];
        row.model = r.model;
        row.dataset = r.dataset;
        row.mse += r.metrics->mse;
        row.mae += r.metrics->mae;
        row.rmse += r.metrics->rmse;
        ++row.runs;
    }
    if (groups.empty()) fail(ErrorKind::EmptyInput, "no completed records to compare");

    for (auto& [key, row] : groups) {
        const double n = static_cast<double>(row.runs);
        row.mse /= n;
        row.mae /= n;
        row.rmse /= n;
        table.rows.push_back(row);
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.mse < b.mse; });

    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        if (table.rows[i].mse < table.rows[table.best[0]].mse) table.best[0] = i;
        if (table.rows[i].mae < table.rows[table.best[1]].mae) table.best[1] = i;
        if (table.rows[i].rmse < table.rows[table.best[2]].rmse) table.best[2] = i;
    }

    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"Model", "MSE", "MAE", "RMSE", "Dataset"});
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        auto mark = [&](double v, std::size_t col) { return fixed4(v) + (table.best[col] == i ? "*" : ""); };
        cells.push_back({r.model, mark(r.mse, 0), mark(r.mae, 1), mark(r.rmse, 2), r.dataset});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream text;
    text << "protocol: " << table.protocol << "  scale: " << table.scale_label << '\n';
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < 5; ++c) {
            text << row[c];
            if (c + 1 < 5) text << std::string(width[c] - row[c].size() + 2, ' ');
        }
        text << '\n';
    }
    table.text = text.str();
    return table;
}

}  // namespace ethcast
