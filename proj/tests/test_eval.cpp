#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ethcast/comparison.hpp"
#include "ethcast/eval.hpp"
#include "support.hpp"

using namespace ethcast;

namespace {

// Returns the first horizon target of a known test set, looked up by window content.
class OracleModel final : public Forecaster {
public:
    explicit OracleModel(const WindowSet& w) : w_(w) {}
    std::string kind() const override { return "oracle"; }
    std::size_t seq_len() const override { return w_.seq_len; }
    std::size_t pred_len() const override { return w_.pred_len; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }
    Matrix predict(const Matrix& x) const override {
        Matrix y(x.rows, w_.pred_len);
        for (std::size_t r = 0; r < x.rows; ++r) {
            for (std::size_t k = 0; k < w_.size(); ++k) {
                if (std::equal(x.row(r).begin(), x.row(r).end(), w_.inputs.row(k).begin())) {
                    std::copy(w_.targets.row(k).begin(), w_.targets.row(k).end(), y.row(r).begin());
                }
            }
        }
        return y;
    }
    Matrix forward_train(const Matrix& x, std::uint64_t) override { return predict(x); }
    void backward(const Matrix&) override {}

private:
    WindowSet w_;
    ParameterStore params_;
};

class ZeroModel final : public Forecaster {
public:
    ZeroModel(std::size_t seq, std::size_t pred) : seq_(seq), pred_(pred) {}
    std::string kind() const override { return "zero"; }
    std::size_t seq_len() const override { return seq_; }
    std::size_t pred_len() const override { return pred_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }
    Matrix predict(const Matrix& x) const override { return Matrix(x.rows, pred_); }
    Matrix forward_train(const Matrix& x, std::uint64_t) override { return predict(x); }
    void backward(const Matrix&) override {}

private:
    std::size_t seq_;
    std::size_t pred_;
    ParameterStore params_;
};

ExperimentRecord record(std::string model, double mse, std::string protocol = "short_term") {
    ExperimentRecord r;
    r.model = std::move(model);
    r.dataset = "Kaggle";
    r.protocol = std::move(protocol);
    MetricReport m;
    m.mse = mse;
    m.rmse = std::sqrt(mse);
    m.mae = 0.8 * m.rmse;
    m.n = 10;
    r.metrics = m;
    return r;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("metric examples") {
    const std::vector<double> a = {1, 2, 3};
    const auto z = compute_metrics(a, a);
    CHECK(z.mse == 0.0);
    CHECK(z.mae == 0.0);
    CHECK(z.rmse == 0.0);
    CHECK(z.n == 3);
    CHECK(z.scale_label == kStandardizedScale);

    const auto one = compute_metrics(std::vector<double>{0, 0}, std::vector<double>{1, 1});
    CHECK(one.mse == 1.0);
    CHECK(one.mae == 1.0);
    CHECK(one.rmse == 1.0);
}

TEST_CASE("metric errors") {
    try {
        compute_metrics(std::vector<double>{1, 2}, std::vector<double>{1});
        FAIL("expected shape error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Shape);
    }
    try {
        compute_metrics(std::vector<double>{}, std::vector<double>{});
        FAIL("expected empty-input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyInput);
    }
}

TEST_CASE("metrics against a summation oracle, identities, permutation invariance") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial;
        std::vector<double> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = g(rng);
            p[i] = y[i] + 0.1 * g(rng);
        }
        long double se = 0.0L;
        long double ae = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const long double d = static_cast<long double>(y[i]) - static_cast<long double>(p[i]);
            se += d * d;
            ae += d < 0 ? -d : d;
        }
        const auto m = compute_metrics(y, p);
        CHECK(std::abs(m.mse - static_cast<double>(se / n)) < 1e-12);
        CHECK(std::abs(m.mae - static_cast<double>(ae / n)) < 1e-12);
        CHECK(std::abs(m.rmse * m.rmse - m.mse) < 1e-12);
        CHECK(m.mae <= m.rmse + 1e-15);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> ys(n), ps(n);
        for (std::size_t i = 0; i < n; ++i) {
            ys[i] = y[perm[i]];
            ps[i] = p[perm[i]];
        }
        const auto q = compute_metrics(ys, ps);
        CHECK(std::abs(q.mse - m.mse) < 1e-12);
        CHECK(std::abs(q.mae - m.mae) < 1e-12);
    }
}

TEST_CASE("evaluate_model: oracle and zero predictors") {
    const auto series = testutil::sine_trend(60, 0.2, 4);
    const auto test = make_windows(series, 7, 1);
    StandardizationStats st;
    st.mean = 1500.0;
    st.std = 300.0;

    const auto [om, ot] = evaluate_model(OracleModel(test), test, st);
    CHECK(om.mse == 0.0);
    CHECK(om.mae == 0.0);
    REQUIRE(ot.rows.size() == test.size());
    CHECK(ot.rows[0].date == "0");
    CHECK(ot.rows[3].actual_usd == doctest::Approx(destandardize(test.targets(3, 0), st)));

    const auto [zm, zt] = evaluate_model(ZeroModel(7, 1), test, st);
    double ms = 0.0;
    for (double v : test.targets.data) ms += v * v;
    ms /= static_cast<double>(test.targets.data.size());
    CHECK(zm.mse == doctest::Approx(ms).epsilon(1e-12));
    CHECK(zt.rows[5].pred_usd == doctest::Approx(1500.0));
}

TEST_CASE("evaluate_model errors and dates") {
    const auto s = testutil::series_from(testutil::sine_trend(20));
    const auto test = make_windows(s, 7, 1);
    StandardizationStats st;
    CHECK_THROWS_AS(evaluate_model(ZeroModel(7, 2), test, st), Error);
    CHECK_THROWS_AS(evaluate_model(ZeroModel(7, 1), WindowSet{}, st), Error);

    const auto dates = window_target_dates(s, test);
    REQUIRE(dates.size() == test.size());
    CHECK(dates[0] == s.records[7].date);
    const auto [m, table] = evaluate_model(ZeroModel(7, 1), test, st, dates);
    CHECK(table.rows[0].date == "2020-01-08");
    std::ostringstream out;
    write_prediction_csv(out, table);
    CHECK(out.str().rfind("date,actual_std,pred_std,actual_usd,pred_usd\n2020-01-08,", 0) == 0);
}

TEST_CASE("comparison table ranks by MSE and marks minima") {
    const std::vector<ExperimentRecord> recs = {record("gpt2", 0.0029), record("llama3", 0.0027)};
    const auto t = make_comparison_table(recs);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].model == "llama3");
    CHECK(t.rows[1].model == "gpt2");
    CHECK(t.best[0] == 0);
    CHECK(t.protocol == "short_term");
    CHECK(t.text.find("Model") != std::string::npos);
    CHECK(t.text.find("0.0027*") != std::string::npos);
    const auto header = t.text.substr(t.text.find('\n') + 1);
    CHECK(header.find("MSE") < header.find("MAE"));
    CHECK(header.find("MAE") < header.find("RMSE"));
    CHECK(header.find("RMSE") < header.find("Dataset"));
    CHECK(t.csv().rfind("model,mse,mae,rmse,dataset", 0) == 0);
}

TEST_CASE("comparison table: seeds averaged, single row, errors") {
    const std::vector<ExperimentRecord> two_seeds = {record("gpt2", 0.002), record("gpt2", 0.004)};
    const auto t = make_comparison_table(two_seeds);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].runs == 2);
    CHECK(t.rows[0].mse == doctest::Approx(0.003));

    CHECK_THROWS_AS(make_comparison_table(std::vector<ExperimentRecord>{}), Error);
    const std::vector<ExperimentRecord> mixed = {record("gpt2", 0.1), record("lstm", 0.2, "few_shot")};
    try {
        make_comparison_table(mixed);
        FAIL("expected usage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Usage);
    }
    auto incomplete = record("ann", 0.1);
    incomplete.metrics.reset();
    CHECK_THROWS_AS(make_comparison_table(std::vector<ExperimentRecord>{incomplete}), Error);
}

}  // TEST_SUITE
