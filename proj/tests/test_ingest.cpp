#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ethcast/ingest.hpp"
#include "support.hpp"

using namespace ethcast;
using testutil::day;

namespace {

const char* kKaggleFixture =
    "\"Date\",\"Price\",\"Open\",\"High\",\"Low\",\"Vol.\",\"Change %\"\n"
    "\"Mar 02, 2023\",\"1,647.24\",\"1,663.00\",\"1,670.10\",\"1,620.53\",\"512.34K\",\"-1.04%\"\n"
    "\"Mar 01, 2023\",\"1,664.50\",\"1,664.50\",\"1,680.00\",\"1,600.00\",\"1.20M\",\"0.50%\"\n";

PriceSeries parse_text(const std::string& text, const ColumnSchema& schema = {}) {
    std::istringstream in(text);
    return parse_price_csv(in, schema);
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an ethcast::Error");
    return ErrorKind::Usage;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("kaggle row with thousands separators parses by hand") {
    const auto s = parse_text(kKaggleFixture);
    REQUIRE(s.size() == 2);
    // sorted ascending although the file is newest-first
    CHECK(format_date(s.records[0].date) == "2023-03-01");
    CHECK(s.records[0].open == 1664.50);
    CHECK(s.records[0].close == 1664.50);
    CHECK(s.records[0].volume == doctest::Approx(1.2e6));
    CHECK(s.records[0].change_pct == doctest::Approx(0.005));
    CHECK(s.records[1].open == 1663.00);
    CHECK(s.records[1].volume == doctest::Approx(512340.0));
    CHECK(s.records[1].change_pct == doctest::Approx(-0.0104));
    CHECK_FALSE(s.records[0].filled);
}

TEST_CASE("ISO and month-name dates are both accepted") {
    CHECK(parse_date("2023-03-01") == day(2023, 3, 1));
    CHECK(parse_date("Mar 01, 2023") == day(2023, 3, 1));
    CHECK(parse_date("Dec 31, 2019") == day(2019, 12, 31));
    CHECK(kind_of([] { parse_date("31/12/2019"); }) == ErrorKind::Parse);
}

TEST_CASE("header-only file is an empty-input error") {
    CHECK(kind_of([] { parse_text("Date,Price,Open,High,Low,Vol.,Change %\n"); }) == ErrorKind::EmptyInput);
}

TEST_CASE("schema lacking open names the role") {
    ColumnSchema schema;
    schema.open = "";
    try {
        parse_text(kKaggleFixture, schema);
        FAIL("expected schema error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Schema);
        CHECK(std::string(e.what()).find("open") != std::string::npos);
    }
}

TEST_CASE("missing mapped column names the column") {
    ColumnSchema schema;
    schema.open = "Opening";
    try {
        parse_text(kKaggleFixture, schema);
        FAIL("expected schema error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Schema);
        CHECK(std::string(e.what()).find("Opening") != std::string::npos);
    }
}

TEST_CASE("unparseable cell reports the row") {
    const std::string bad = "Date,Price,Open,High,Low,Vol.,Change %\n"
                            "2023-03-01,10,10,11,9,1K,0%\n"
                            "2023-03-02,10,abc,11,9,1K,0%\n";
    try {
        parse_text(bad);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);  // file line; the header is row 1
    }
}

TEST_CASE("record invariants are enforced") {
    const std::string bad = "Date,Price,Open,High,Low,Vol.,Change %\n"
                            "2023-03-01,10,12,11,9,1K,0%\n";  // high < open
    CHECK_THROWS_AS(parse_text(bad), Error);
}

TEST_CASE("parse -> canonical -> parse round trip") {
    const auto a = regularize_daily(parse_text(kKaggleFixture));
    std::ostringstream out;
    write_canonical_csv(out, a);
    const auto b = parse_text(out.str(), ColumnSchema::canonical());
    CHECK(a.records == b.records);
    CHECK(out.str().rfind("date,open,high,low,close,volume,change_pct,filled\n", 0) == 0);
}

TEST_CASE("regularize: contiguous days unchanged") {
    const auto s = testutil::series_from(testutil::sine_trend(5));
    const auto r = regularize_daily(s);
    CHECK(r.records == s.records);
    for (const auto& rec : r.records) CHECK_FALSE(rec.filled);
}

TEST_CASE("regularize: forward fill d2 from d1") {
    auto s = testutil::series_from({1.0, 2.0, 3.0});
    s.records.erase(s.records.begin() + 1);
    const auto r = regularize_daily(s, GapPolicy::ForwardFill);
    REQUIRE(r.size() == 3);
    CHECK(r.records[1].date == r.records[0].date + std::chrono::days{1});
    CHECK(r.records[1].filled);
    CHECK(r.records[1].open == r.records[0].open);
    CHECK(r.records[1].high == r.records[0].high);
    CHECK(r.records[1].low == r.records[0].low);
    CHECK(r.records[1].close == r.records[0].close);
    CHECK(r.records[1].volume == 0.0);
    CHECK_FALSE(r.records[2].filled);
    SUBCASE("idempotent") { CHECK(regularize_daily(r).records == r.records); }
}

TEST_CASE("regularize: duplicates and strict gaps") {
    auto s = testutil::series_from({1.0, 2.0, 3.0, 4.0});
    auto dup = s;
    dup.records[1].date = dup.records[0].date;
    CHECK(kind_of([&] { regularize_daily(dup); }) == ErrorKind::Duplicate);

    s.records.erase(s.records.begin() + 1, s.records.begin() + 3);
    try {
        regularize_daily(s, GapPolicy::Strict);
        FAIL("expected continuity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Continuity);
        CHECK(std::string(e.what()).find("2020-01-02") != std::string::npos);
        CHECK(std::string(e.what()).find("2020-01-03") != std::string::npos);
    }
}

TEST_CASE("chronological split sizes") {
    const auto s100 = testutil::series_from(testutil::sine_trend(100));
    auto r = chronological_split(s100, {0.7, 0.1, 0.2});
    CHECK(r.train.size() == 70);
    CHECK(r.val.size() == 10);
    CHECK(r.test.size() == 20);

    const auto s10 = testutil::series_from(testutil::sine_trend(10));
    r = chronological_split(s10, {0.7, 0.1, 0.2}, 8);
    CHECK(r.train.size() == 7);
    CHECK(r.val.size() == 1);
    CHECK(r.test.size() == 2);
    CHECK(r.warnings.size() == 3);

    CHECK(kind_of([&] { chronological_split(s100, {0.5, 0.1, 0.1}); }) == ErrorKind::Split);
    CHECK(kind_of([] { chronological_split(testutil::series_from({1, 2, 3}), {}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("split segments partition the series") {
    for (std::size_t n : {10u, 11u, 37u, 100u, 1001u}) {
        const auto s = testutil::series_from(testutil::sine_trend(n));
        const auto r = chronological_split(s, {0.7, 0.1, 0.2});
        std::vector<PriceRecord> joined = r.train.records;
        joined.insert(joined.end(), r.val.records.begin(), r.val.records.end());
        joined.insert(joined.end(), r.test.records.begin(), r.test.records.end());
        CHECK(joined == s.records);
    }
}

TEST_CASE("windows match index enumeration") {
    std::vector<double> v(10);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 1.5;
    const auto ws = make_windows(v, 7, 1);
    REQUIRE(ws.size() == 3);
    for (std::size_t k = 0; k < ws.size(); ++k) {
        CHECK(ws.origin_indices[k] == k);
        for (std::size_t j = 0; j < 7; ++j) CHECK(ws.inputs(k, j) == v[k + j]);
        CHECK(ws.targets(k, 0) == v[k + 7]);
    }
    CHECK(make_windows(std::vector<double>(8, 1.0), 7, 1).size() == 1);
    CHECK(kind_of([] { make_windows(std::vector<double>(7, 1.0), 7, 1); }) == ErrorKind::InsufficientData);
}

TEST_CASE("windows on a series default to the open channel") {
    const auto s = testutil::series_from(testutil::sine_trend(12));
    const auto ws = make_windows(s, 7, 2);
    CHECK(ws.size() == 4);
    CHECK(ws.inputs(1, 0) == s.records[1].open);
    CHECK(ws.targets(3, 1) == s.records[11].open);
}

TEST_CASE("few-shot truncation keeps the leading timesteps") {
    const auto train = testutil::series_from(testutil::sine_trend(1000));
    const auto t = few_shot_truncate(train, 0.1, 7, 1);
    REQUIRE(t.size() == 100);
    CHECK(t.records.front() == train.records.front());
    CHECK(t.records.back() == train.records[99]);
    CHECK(few_shot_truncate(train, 1.0, 7, 1).records == train.records);
    CHECK(kind_of([] { few_shot_truncate(testutil::series_from(testutil::sine_trend(50)), 0.1, 7, 1); }) ==
          ErrorKind::InsufficientData);
    CHECK(few_shot_truncate(testutil::series_from(testutil::sine_trend(81)), 0.1, 7, 1).size() == 9);
}

}  // TEST_SUITE
