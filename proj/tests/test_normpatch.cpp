#include <doctest.h>

#include <cmath>
#include <random>

#include "ethcast/normpatch.hpp"
#include "ethcast/common.hpp"

using namespace ethcast;

TEST_SUITE("normpatch") {

TEST_CASE("standardizer fit by hand") {
    const std::vector<double> v = {1, 2, 3};
    const auto st = fit_standardizer(v);
    CHECK(st.mean == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(st.std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    CHECK(st.std == doctest::Approx(0.8165).epsilon(1e-4));

    const auto fwd = apply_standardizer(v, st, Direction::Forward);
    CHECK(fwd[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(fwd[1] == 0.0);
    CHECK(fwd[2] == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK(fwd[2] == doctest::Approx(1.0 / (st.std + st.eps)));
}

TEST_CASE("constant series: std 0, zeros forward") {
    const std::vector<double> v = {5, 5, 5};
    const auto st = fit_standardizer(v);
    CHECK(st.mean == 5.0);
    CHECK(st.std == 0.0);
    for (double x : apply_standardizer(v, st, Direction::Forward)) CHECK(x == 0.0);
}

TEST_CASE("empty standardizer input is an error") {
    CHECK_THROWS_AS(fit_standardizer(std::vector<double>{}), Error);
}

TEST_CASE("standardizer round trip within 1e-9") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(1500.0, 400.0);
    std::vector<double> v(500);
    for (auto& x : v) x = g(rng);
    const auto st = fit_standardizer(v);
    const auto back = apply_standardizer(apply_standardizer(v, st, Direction::Forward), st, Direction::Inverse);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-9);
    CHECK(destandardize(standardize(1234.5, st), st) == doctest::Approx(1234.5).epsilon(1e-14));
}

TEST_CASE("revin normalize by hand") {
    const std::vector<double> w = {1, 2, 3};
    const auto [y, st] = revin(w, RevinMode::Normalize);
    CHECK(st.mean == doctest::Approx(2.0));
    CHECK(st.variance == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(y[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == doctest::Approx(1.0 / std::sqrt(2.0 / 3.0 + 1e-5)).epsilon(1e-15));
}

TEST_CASE("revin constant window is all zeros") {
    const auto [y, st] = revin(std::vector<double>(7, 42.0), RevinMode::Normalize);
    for (double v : y) CHECK(v == 0.0);
    CHECK(st.variance == 0.0);
}

TEST_CASE("revin denormalize needs a state") {
    try {
        revin(std::vector<double>{1.0}, RevinMode::Denormalize);
        FAIL("expected usage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Usage);
    }
}

TEST_CASE("revin round trip and normalized moments") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> w(7 + trial % 13);
        for (auto& x : w) x = g(rng) + 10.0;
        const auto [y, st] = revin(w, RevinMode::Normalize);
        const auto [back, unused] = revin(y, RevinMode::Denormalize, st);
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(std::abs(back[i] - w[i]) < 1e-6);
            mean += y[i];
        }
        mean /= static_cast<double>(y.size());
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(y.size());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) <= st.eps / st.variance + 1e-12);
    }
}

TEST_CASE("patchify: seq 7, patch 16, stride 8 -> one padded patch") {
    const std::vector<double> s = {1, 2, 3, 4, 5, 6, 7};
    const auto g = patchify(s, 16, 8);
    CHECK(g.padded_length == 16);
    REQUIRE(g.patches.size() == 1);
    for (std::size_t i = 0; i < 7; ++i) CHECK(g.patches[0][i] == s[i]);
    for (std::size_t i = 7; i < 16; ++i) CHECK(g.patches[0][i] == 7.0);
}

TEST_CASE("patchify: seq 16 -> padded 24, two patches") {
    std::vector<double> s(16);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
    const auto g = patchify(s, 16, 8);
    CHECK(g.padded_length == 24);
    REQUIRE(g.patches.size() == 2);
    CHECK(g.patches[1][0] == 8.0);
    CHECK(g.patches[1][7] == 15.0);
    CHECK(g.patches[1][15] == 15.0);
}

TEST_CASE("patchify errors") {
    const std::vector<double> s = {1, 2, 3};
    try {
        patchify(s, 0, 8);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    CHECK_THROWS_AS(patchify(s, 4, 0), Error);
    CHECK_THROWS_AS(patchify(std::vector<double>{}, 4, 2), Error);
}

TEST_CASE("patch count formula against offset enumeration") {
    for (std::size_t len = 1; len <= 64; ++len) {
        for (std::size_t patch = 1; patch <= 32; ++patch) {
            for (std::size_t stride = 1; stride <= 16; ++stride) {
                const std::size_t padded = std::max(len + stride, patch);
                std::size_t brute = 0;
                for (std::size_t off = 0; off + patch <= padded; off += stride) ++brute;
                REQUIRE(patch_count(len, patch, stride) == brute);
                REQUIRE(padded_length(len, patch, stride) == padded);
            }
        }
    }
}

}  // TEST_SUITE
