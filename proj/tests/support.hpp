#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ethcast/backbone.hpp"
#include "ethcast/forecaster.hpp"
#include "ethcast/ingest.hpp"

namespace testutil {

inline ethcast::Date day(int y, unsigned m, unsigned d) {
    return std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

// Linear trend plus a weekly sine, optional Gaussian noise.
inline std::vector<double> sine_trend(std::size_t n, double noise = 0.0, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        v[i] = 0.02 * t + 0.6 * std::sin(2.0 * std::numbers::pi * t / 7.0) + noise * g(rng);
    }
    return v;
}

// Daily series with the given opens; prices are shifted to stay positive.
inline ethcast::PriceSeries series_from(const std::vector<double>& opens, ethcast::Date start = day(2020, 1, 1)) {
    ethcast::PriceSeries s;
    double lo = 0.0;
    for (double v : opens) lo = std::min(lo, v);
    for (std::size_t i = 0; i < opens.size(); ++i) {
        ethcast::PriceRecord r;
        r.date = start + std::chrono::days{static_cast<int>(i)};
        r.open = opens[i] - lo + 100.0;
        r.close = r.open;
        r.high = r.open * 1.01;
        r.low = r.open * 0.99;
        r.volume = 1000.0;
        s.records.push_back(r);
    }
    return s;
}

inline ethcast::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    ethcast::Matrix m(rows, cols);
    for (auto& v : m.data) v = g(rng);
    return m;
}

inline double mse_loss(const ethcast::Matrix& pred, const ethcast::Matrix& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double e = pred.data[i] - y.data[i];
        s += e * e;
    }
    return s / static_cast<double>(pred.data.size());
}

struct GradCheckResult {
    double worst_relative = 0.0;  // max over tensors of ||a - n|| / max(||a||, ||n||)
    std::string worst_tensor;
    std::size_t elements = 0;
    std::size_t element_failures = 0;  // |a - n| > 1e-4 * max(|a|, |n|) + 1e-8
};

// Analytic gradient of the MSE loss from forward_train/backward against
// central differences of predict(), for every trainable element.
inline GradCheckResult gradient_check(ethcast::Forecaster& model, const ethcast::Matrix& x, const ethcast::Matrix& y,
                                      double h = 1e-6) {
    auto& params = model.params();
    params.zero_grad();
    const ethcast::Matrix pred = model.forward_train(x, 0);
    ethcast::Matrix dy(pred.rows, pred.cols);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        dy.data[i] = 2.0 * (pred.data[i] - y.data[i]) / static_cast<double>(pred.data.size());
    }
    model.backward(dy);

    GradCheckResult result;
    for (auto& p : params) {
        if (!p.trainable) continue;
        double diff2 = 0.0;
        double a2 = 0.0;
        double n2 = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = mse_loss(model.predict(x), y);
            p.value[i] = saved - h;
            const double down = mse_loss(model.predict(x), y);
            p.value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p.grad[i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
            ++result.elements;
            if (std::abs(analytic - numeric) > 1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-8) {
                ++result.element_failures;
            }
        }
        const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
        const double rel = denom < 1e-12 ? 0.0 : std::sqrt(diff2) / denom;
        if (rel >= result.worst_relative) {
            result.worst_relative = rel;
            result.worst_tensor = p.name;
        }
    }
    return result;
}

// 1 layer, hidden 8, 8 patches so attention, positions and causality all matter.
inline ethcast::BackboneConfig grad_check_config(ethcast::Variant variant) {
    ethcast::BackboneConfig c;
    c.variant = variant;
    c.n_layers = 1;
    c.hidden = 8;
    c.n_heads = 2;
    c.n_kv_groups = variant == ethcast::Variant::Llama ? 1 : 2;
    c.ffn_dim = 16;
    c.max_positions = 8;
    c.seq_len = 32;
    c.patch_len = 8;
    c.stride = 4;
    c.pred_len = 2;
    c.activation = variant == ethcast::Variant::Llama ? ethcast::Activation::Swiglu : ethcast::Activation::Gelu;
    return c;
}

// 2 layers, hidden 32.
inline ethcast::BackboneConfig toy_config(ethcast::Variant variant) {
    ethcast::BackboneConfig c;
    c.variant = variant;
    c.n_layers = 2;
    c.hidden = 32;
    c.n_heads = 4;
    c.n_kv_groups = variant == ethcast::Variant::Llama ? 2 : 4;
    c.ffn_dim = 64;
    c.max_positions = 16;
    c.seq_len = 7;
    c.patch_len = 16;
    c.stride = 8;
    c.pred_len = 1;
    c.activation = variant == ethcast::Variant::Llama ? ethcast::Activation::Swiglu : ethcast::Activation::Gelu;
    return c;
}

// Trainable names expected under fpt, spelled out by hand.
inline std::vector<std::string> expected_fpt_names(const ethcast::BackboneConfig& c) {
    std::vector<std::string> names = {"in_layer.weight", "in_layer.bias", "out_layer.weight", "out_layer.bias"};
    if (c.variant == ethcast::Variant::Gpt2) {
        names.push_back("wpe.weight");
        for (std::size_t l = 0; l < c.n_layers; ++l) {
            const std::string p = "h." + std::to_string(l) + ".";
            for (const char* n : {"ln_1.weight", "ln_1.bias", "ln_2.weight", "ln_2.bias"}) names.push_back(p + n);
        }
        names.push_back("ln_f.weight");
        names.push_back("ln_f.bias");
    } else {
        names.push_back("rotary.inv_freq");
        for (std::size_t l = 0; l < c.n_layers; ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            names.push_back(p + "input_layernorm.weight");
            names.push_back(p + "post_attention_layernorm.weight");
        }
        names.push_back("norm.weight");
    }
    std::sort(names.begin(), names.end());
    return names;
}

inline std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("ethcast_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Windows of consecutive values of `series`, for model-level tests.
inline void windows_from(const std::vector<double>& series, std::size_t seq, std::size_t pred, ethcast::Matrix& x,
                         ethcast::Matrix& y) {
    const auto ws = ethcast::make_windows(series, seq, pred);
    x = ws.inputs;
    y = ws.targets;
}

}  // namespace testutil
