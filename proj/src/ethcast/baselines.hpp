#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/backbone.hpp"
#include "ethcast/forecaster.hpp"
#include "ethcast/layers.hpp"

namespace ethcast {

enum class BaselineKind { Ann, Mlp, Lstm, PatchTst };

BaselineKind parse_baseline_kind(std::string_view name);
const char* baseline_kind_name(BaselineKind kind);

struct BaselineConfig {
    BaselineKind kind = BaselineKind::Ann;
    std::size_t seq_len = 7;
    std::size_t pred_len = 1;
    std::vector<std::size_t> hidden_sizes;  // ann / mlp
    double dropout = 0.0;                  // mlp / lstm
    std::size_t units = 50;                // lstm
    // patchtst
    std::size_t patch_len = 16;
    std::size_t stride = 8;
    std::size_t n_layers = 3;
    std::size_t hidden = 128;
    std::size_t n_heads = 8;
    std::size_t ffn_dim = 256;
    std::uint64_t seed = 0;

    // ann 32-16 ReLU; mlp 64-32 ReLU with dropout 0.4; lstm 50 units with
    // dropout 0.4; patchtst 3 layers, hidden 128, 8 heads.
    static BaselineConfig defaults(BaselineKind kind);
    void validate() const;
};

// Fully connected stack with ReLU, optional inverted dropout after every hidden layer.
class DenseForecaster final : public Forecaster {
public:
    DenseForecaster(std::string kind, std::size_t seq_len, std::size_t pred_len, std::vector<std::size_t> hidden,
                    double dropout);

    std::string kind() const override { return kind_; }
    std::size_t seq_len() const override { return seq_len_; }
    std::size_t pred_len() const override { return pred_len_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    Matrix predict(const Matrix& windows) const override;
    Matrix forward_train(const Matrix& windows, std::uint64_t dropout_seed) override;
    void backward(const Matrix& grad_output) override;

    void initialize(std::uint64_t seed);

private:
    Matrix run(const Matrix& windows, bool training, std::uint64_t dropout_seed);

    std::string kind_;
    std::size_t seq_len_;
    std::size_t pred_len_;
    double dropout_;
    ParameterStore params_;
    std::vector<nn::Dense> layers_;
    // training cache: inputs to every layer, pre-activations and dropout masks
    std::vector<Matrix> inputs_;
    std::vector<Matrix> pre_;
    std::vector<Matrix> masks_;
    bool cached_ = false;
};

// Single-layer LSTM over the window (one scalar per step), dropout on the
// last hidden state, dense projection to pred_len. Gate order i, f, g, o.
class LstmForecaster final : public Forecaster {
public:
    LstmForecaster(std::size_t seq_len, std::size_t pred_len, std::size_t units, double dropout);

    std::string kind() const override { return "lstm"; }
    std::size_t seq_len() const override { return seq_len_; }
    std::size_t pred_len() const override { return pred_len_; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    Matrix predict(const Matrix& windows) const override;
    Matrix forward_train(const Matrix& windows, std::uint64_t dropout_seed) override;
    void backward(const Matrix& grad_output) override;

    std::size_t units() const { return units_; }
    void initialize(std::uint64_t seed);

private:
    struct Step {
        Matrix x, h_prev, c_prev, i, f, g, o, c;
    };
    Matrix run(const Matrix& windows, bool training, std::uint64_t dropout_seed, std::vector<Step>* steps,
               Matrix* mask, Matrix* last_hidden) const;

    std::size_t seq_len_;
    std::size_t pred_len_;
    std::size_t units_;
    double dropout_;
    ParameterStore params_;
    nn::Dense input_;
    nn::Dense recurrent_;
    nn::Dense head_;
    std::vector<Step> steps_;
    Matrix mask_;
    Matrix last_hidden_;
    bool cached_ = false;
};

BackboneConfig patchtst_backbone_config(const BaselineConfig& config);

std::unique_ptr<Forecaster> build_baseline(const BaselineConfig& config);

}  // namespace ethcast
