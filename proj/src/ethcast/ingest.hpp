#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/common.hpp"

namespace ethcast {

using Date = std::chrono::sys_days;

Date parse_date(std::string_view text);
std::string format_date(Date date);

struct PriceRecord {
    Date date{};
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;
    double change_pct = 0.0;  // fraction, -0.0123 for "-1.23%"
    bool filled = false;

    bool operator==(const PriceRecord&) const = default;
};

// Daily OHLCV sequence ordered by date.
struct PriceSeries {
    std::vector<PriceRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    bool operator==(const PriceSeries&) const = default;
};

// Maps canonical roles onto header names. An empty optional role
// (volume, change, filled) is read as zero / false.
struct ColumnSchema {
    std::string date = "Date";
    std::string open = "Open";
    std::string high = "High";
    std::string low = "Low";
    std::string close = "Price";
    std::string volume = "Vol.";
    std::string change = "Change %";
    std::string filled;

    // Header layout written by write_canonical_csv.
    static ColumnSchema canonical();
};

PriceSeries parse_price_csv(std::istream& in, const ColumnSchema& schema);
PriceSeries read_price_csv(const std::filesystem::path& path, const ColumnSchema& schema);
void write_canonical_csv(std::ostream& out, const PriceSeries& series);

enum class GapPolicy { ForwardFill, Strict };

PriceSeries regularize_daily(const PriceSeries& series, GapPolicy policy = GapPolicy::ForwardFill);

struct SplitSpec {
    double train_ratio = 0.7;
    double val_ratio = 0.1;
    double test_ratio = 0.2;
};

struct SplitResult {
    PriceSeries train;
    PriceSeries val;
    PriceSeries test;
    std::vector<std::string> warnings;
};

// Segments shorter than min_segment_length are reported in warnings.
SplitResult chronological_split(const PriceSeries& series, const SplitSpec& spec,
                                std::size_t min_segment_length = 0);

enum class Channel { Open, High, Low, Close, Volume };

Channel parse_channel(std::string_view name);
const char* channel_name(Channel channel);
std::vector<double> channel_values(const PriceSeries& series, Channel channel = Channel::Open);

struct WindowSet {
    Matrix inputs;   // count x seq_len
    Matrix targets;  // count x pred_len
    std::vector<std::size_t> origin_indices;
    std::size_t seq_len = 0;
    std::size_t pred_len = 0;

    std::size_t size() const { return origin_indices.size(); }
    bool empty() const { return origin_indices.empty(); }
};

WindowSet make_windows(std::span<const double> values, std::size_t seq_len, std::size_t pred_len);
WindowSet make_windows(const PriceSeries& segment, std::size_t seq_len, std::size_t pred_len,
                       Channel channel = Channel::Open);

PriceSeries few_shot_truncate(const PriceSeries& train, double fraction, std::size_t seq_len,
                              std::size_t pred_len);

}  // namespace ethcast
