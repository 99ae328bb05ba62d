#include "ethcast/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace ethcast {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// RFC 4180 subset: quoted fields with doubled quotes, no embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    for (auto& f : fields) f = std::string(trim(f));
    return fields;
}

std::optional<double> parse_number(std::string_view cell) {
    std::string cleaned;
    cleaned.reserve(cell.size());
    for (char c : trim(cell)) {
        if (c != ',' && c != '$' && c != ' ') cleaned.push_back(c);
    }
    double scale = 1.0;
    if (!cleaned.empty()) {
        switch (cleaned.back()) {
            case '%': scale = 0.01; cleaned.pop_back(); break;
            case 'K': case 'k': scale = 1e3; cleaned.pop_back(); break;
            case 'M': case 'm': scale = 1e6; cleaned.pop_back(); break;
            case 'B': case 'b': scale = 1e9; cleaned.pop_back(); break;
            default: break;
        }
    }
    if (cleaned.empty()) return std::nullopt;
    const char* first = cleaned.data();
    if (*first == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, cleaned.data() + cleaned.size(), value);
    if (ec != std::errc{} || ptr != cleaned.data() + cleaned.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value * scale;
}

constexpr std::array<std::string_view, 12> kMonths = {"jan", "feb", "mar", "apr", "may", "jun",
                                                      "jul", "aug", "sep", "oct", "nov", "dec"};

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<Date> try_parse_date(std::string_view text) {
    using namespace std::chrono;
    text = trim(text);
    std::optional<int> y, m, d;
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        y = parse_int(text.substr(0, 4));
        m = parse_int(text.substr(5, 2));
        d = parse_int(text.substr(8, 2));
    } else if (text.size() >= 11 && text[3] == ' ') {
        // "Mon DD, YYYY"
        std::string mon(text.substr(0, 3));
        std::transform(mon.begin(), mon.end(), mon.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const auto it = std::find(kMonths.begin(), kMonths.end(), mon);
        const auto comma = text.find(',');
        if (it != kMonths.end() && comma != std::string_view::npos) {
            m = static_cast<int>(it - kMonths.begin()) + 1;
            d = parse_int(trim(text.substr(4, comma - 4)));
            y = parse_int(trim(text.substr(comma + 1)));
        }
    }
    if (!y || !m || !d) return std::nullopt;
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::Schema, "missing column \"" + name + "\"");
    return static_cast<std::size_t>(it - header.begin());
}

std::string list_dates(const std::vector<Date>& dates) {
    std::string out;
    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (i) out += ", ";
        if (i == 20) {
            out += "... (" + std::to_string(dates.size()) + " total)";
            break;
        }
        out += format_date(dates[i]);
    }
    return out;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (auto d = try_parse_date(text)) return *d;
    fail(ErrorKind::Parse, "unparseable date \"" + std::string(text) + "\"");
}

std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

ColumnSchema ColumnSchema::canonical() {
    ColumnSchema s;
    s.date = "date";
    s.open = "open";
    s.high = "high";
    s.low = "low";
    s.close = "close";
    s.volume = "volume";
    s.change = "change_pct";
    s.filled = "filled";
    return s;
}

PriceSeries parse_price_csv(std::istream& in, const ColumnSchema& schema) {
    const std::pair<const char*, const std::string*> required[] = {
        {"date", &schema.date}, {"open", &schema.open}, {"high", &schema.high},
        {"low", &schema.low},   {"close", &schema.close}};
    for (const auto& [role, column] : required) {
        if (column->empty()) fail(ErrorKind::Schema, std::string("schema has no mapping for \"") + role + "\"");
    }

    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::EmptyInput, "input has no header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);

    const std::size_t c_date = find_column(header, schema.date);
    const std::size_t c_open = find_column(header, schema.open);
    const std::size_t c_high = find_column(header, schema.high);
    const std::size_t c_low = find_column(header, schema.low);
    const std::size_t c_close = find_column(header, schema.close);
    const std::optional<std::size_t> c_volume =
        schema.volume.empty() ? std::nullopt : std::optional(find_column(header, schema.volume));
    const std::optional<std::size_t> c_change =
        schema.change.empty() ? std::nullopt : std::optional(find_column(header, schema.change));
    const std::optional<std::size_t> c_filled =
        schema.filled.empty() ? std::nullopt : std::optional(find_column(header, schema.filled));

    PriceSeries series;
    std::size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        const auto where = [&](const std::string& what) { return "row " + std::to_string(row) + ": " + what; };
        const auto cell = [&](std::size_t idx) -> const std::string& {
            if (idx >= cells.size()) fail(ErrorKind::Parse, where("too few fields"));
            return cells[idx];
        };
        const auto number = [&](std::size_t idx, const char* role) {
            const auto v = parse_number(cell(idx));
            if (!v) fail(ErrorKind::Parse, where(std::string("unparseable ") + role + " \"" + cell(idx) + "\""));
            return *v;
        };

        PriceRecord rec;
        const auto date = try_parse_date(cell(c_date));
        if (!date) fail(ErrorKind::Parse, where("unparseable date \"" + cell(c_date) + "\""));
        rec.date = *date;
        rec.open = number(c_open, "open");
        rec.high = number(c_high, "high");
        rec.low = number(c_low, "low");
        rec.close = number(c_close, "close");
        if (c_volume) {
            const auto& v = cell(*c_volume);
            rec.volume = (v.empty() || v == "-") ? 0.0 : number(*c_volume, "volume");
        }
        if (c_change) rec.change_pct = number(*c_change, "change");
        if (c_filled) {
            const auto& f = cell(*c_filled);
            if (f == "1" || f == "true") rec.filled = true;
            else if (f == "0" || f == "false" || f.empty()) rec.filled = false;
            else fail(ErrorKind::Parse, where("unparseable filled flag \"" + f + "\""));
        }

        if (!(rec.open > 0.0)) fail(ErrorKind::Parse, where("open must be positive"));
        if (rec.high < std::max(rec.open, rec.close)) fail(ErrorKind::Parse, where("high below open/close"));
        if (rec.low > std::min(rec.open, rec.close)) fail(ErrorKind::Parse, where("low above open/close"));
        if (rec.volume < 0.0) fail(ErrorKind::Parse, where("negative volume"));
        series.records.push_back(rec);
    }
    if (series.empty()) fail(ErrorKind::EmptyInput, "input has no data rows");

    std::stable_sort(series.records.begin(), series.records.end(),
                     [](const PriceRecord& a, const PriceRecord& b) { return a.date < b.date; });
    return series;
}

PriceSeries read_price_csv(const std::filesystem::path& path, const ColumnSchema& schema) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open dataset " + path.string());
    return parse_price_csv(in, schema);
}

void write_canonical_csv(std::ostream& out, const PriceSeries& series) {
    out << "date,open,high,low,close,volume,change_pct,filled\n";
    for (const auto& r : series.records) {
        out << format_date(r.date) << ',' << format_double(r.open) << ',' << format_double(r.high) << ','
            << format_double(r.low) << ',' << format_double(r.close) << ',' << format_double(r.volume) << ','
            << format_double(r.change_pct) << ',' << (r.filled ? 1 : 0) << '\n';
    }
}

PriceSeries regularize_daily(const PriceSeries& series, GapPolicy policy) {
    if (series.empty()) fail(ErrorKind::EmptyInput, "series is empty");
    PriceSeries out;
    out.records.reserve(series.size());
    std::vector<Date> missing;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& rec = series.records[i];
        if (i > 0) {
            const auto& prev = series.records[i - 1];
            if (rec.date == prev.date) fail(ErrorKind::Duplicate, "duplicate date " + format_date(rec.date));
            if (rec.date < prev.date) fail(ErrorKind::Parse, "series not sorted at " + format_date(rec.date));
            for (Date d = prev.date + std::chrono::days{1}; d < rec.date; d += std::chrono::days{1}) {
                if (policy == GapPolicy::Strict) {
                    missing.push_back(d);
                    continue;
                }
                PriceRecord fill = prev;
                fill.date = d;
                fill.volume = 0.0;
                fill.change_pct = 0.0;
                fill.filled = true;
                out.records.push_back(fill);
            }
        }
        out.records.push_back(rec);
    }
    if (!missing.empty()) fail(ErrorKind::Continuity, "missing dates: " + list_dates(missing));
    return out;
}

SplitResult chronological_split(const PriceSeries& series, const SplitSpec& spec,
                                std::size_t min_segment_length) {
    const double ratios[] = {spec.train_ratio, spec.val_ratio, spec.test_ratio};
    for (double r : ratios) {
        if (!(r > 0.0 && r < 1.0)) fail(ErrorKind::Split, "split ratios must lie in (0,1)");
    }
    if (std::abs(spec.train_ratio + spec.val_ratio + spec.test_ratio - 1.0) > 1e-9) {
        fail(ErrorKind::Split, "split ratios must sum to 1");
    }
    const std::size_t n = series.size();
    if (n < 10) fail(ErrorKind::InsufficientData, "need at least 10 records to split, got " + std::to_string(n));

    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_ratio * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val_ratio * static_cast<double>(n)));
    const std::size_t n_test = n - n_train - n_val;

    SplitResult result;
    const auto begin = series.records.begin();
    result.train.records.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
    result.val.records.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                              begin + static_cast<std::ptrdiff_t>(n_train + n_val));
    result.test.records.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), series.records.end());

    const std::pair<const char*, std::size_t> sizes[] = {{"train", n_train}, {"val", n_val}, {"test", n_test}};
    for (const auto& [name, size] : sizes) {
        if (size < min_segment_length) {
            result.warnings.push_back(std::string(name) + " segment has " + std::to_string(size) +
                                      " records, fewer than the " + std::to_string(min_segment_length) +
                                      " needed for one window");
        }
    }
    return result;
}

Channel parse_channel(std::string_view name) {
    if (name == "open") return Channel::Open;
    if (name == "high") return Channel::High;
    if (name == "low") return Channel::Low;
    if (name == "close") return Channel::Close;
    if (name == "volume") return Channel::Volume;
    fail(ErrorKind::Config, "unknown channel \"" + std::string(name) + "\"");
}

const char* channel_name(Channel channel) {
    switch (channel) {
        case Channel::Open: return "open";
        case Channel::High: return "high";
        case Channel::Low: return "low";
        case Channel::Close: return "close";
        case Channel::Volume: return "volume";
    }
    return "open";
}

std::vector<double> channel_values(const PriceSeries& series, Channel channel) {
    std::vector<double> out;
    out.reserve(series.size());
    for (const auto& r : series.records) {
        switch (channel) {
            case Channel::Open: out.push_back(r.open); break;
            case Channel::High: out.push_back(r.high); break;
            case Channel::Low: out.push_back(r.low); break;
            case Channel::Close: out.push_back(r.close); break;
            case Channel::Volume: out.push_back(r.volume); break;
        }
    }
    return out;
}

WindowSet make_windows(std::span<const double> values, std::size_t seq_len, std::size_t pred_len) {
    if (seq_len == 0 || pred_len == 0) fail(ErrorKind::Config, "seq_len and pred_len must be positive");
    const std::size_t need = seq_len + pred_len;
    if (values.size() < need) {
        fail(ErrorKind::InsufficientData, "segment has " + std::to_string(values.size()) +
                                              " values, need at least " + std::to_string(need));
    }
    const std::size_t count = values.size() - need + 1;
    WindowSet ws;
    ws.seq_len = seq_len;
    ws.pred_len = pred_len;
    ws.inputs = Matrix(count, seq_len);
    ws.targets = Matrix(count, pred_len);
    ws.origin_indices.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k), seq_len, ws.inputs.row(k).begin());
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k + seq_len), pred_len, ws.targets.row(k).begin());
        ws.origin_indices[k] = k;
    }
    return ws;
}

WindowSet make_windows(const PriceSeries& segment, std::size_t seq_len, std::size_t pred_len, Channel channel) {
    const auto values = channel_values(segment, channel);
    return make_windows(values, seq_len, pred_len);
}

PriceSeries few_shot_truncate(const PriceSeries& train, double fraction, std::size_t seq_len, std::size_t pred_len) {
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::Config, "few-shot fraction must lie in (0,1]");
    // 1e-9 absorbs representation error such as 0.1 * 1000 = 100.00000000000001
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size()) - 1e-9));
    if (keep < seq_len + pred_len) {
        fail(ErrorKind::InsufficientData, "few-shot training segment has " + std::to_string(keep) +
                                              " timesteps, need at least " + std::to_string(seq_len + pred_len));
    }
    PriceSeries out;
    out.records.assign(train.records.begin(), train.records.begin() + static_cast<std::ptrdiff_t>(keep));
    return out;
}

}  // namespace ethcast
