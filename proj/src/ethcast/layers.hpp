#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ethcast/common.hpp"
#include "ethcast/params.hpp"

namespace ethcast {

enum class Activation { Gelu, Swiglu };

// Standalone forms of the block operations. The model uses the batched
// kernels in ethcast::nn below; these exist for direct use and testing.

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps);
std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain, double eps);

double gelu(double x);  // tanh approximation used by GPT-2
double silu(double x);

struct RotaryTable {
    std::vector<double> inv_freq;  // head_dim / 2 entries
    double base = 10000.0;

    static RotaryTable make(std::size_t head_dim, double base);
};

// heads x T x d, stored in that order.
struct HeadTensor {
    std::size_t heads = 0;
    std::size_t steps = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    HeadTensor() = default;
    HeadTensor(std::size_t h, std::size_t t, std::size_t d) : heads(h), steps(t), dim(d), data(h * t * d, 0.0) {}
    double& at(std::size_t h, std::size_t t, std::size_t i) { return data[(h * steps + t) * dim + i]; }
    double at(std::size_t h, std::size_t t, std::size_t i) const { return data[(h * steps + t) * dim + i]; }
};

std::pair<HeadTensor, HeadTensor> rotary_apply(const HeadTensor& q, const HeadTensor& k,
                                               std::span<const std::size_t> positions, const RotaryTable& table);

HeadTensor grouped_query_attention(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v, bool causal);

// Dense weights are [in, out]. gelu uses w_in/w_out; swiglu additionally
// needs w_gate and computes w_out(silu(w_gate x) * w_in x).
struct FfnWeights {
    Matrix w_in;
    std::vector<double> b_in;
    Matrix w_gate;
    Matrix w_out;
    std::vector<double> b_out;
};

std::vector<double> ffn_forward(std::span<const double> x, const FfnWeights& weights, Activation activation);

namespace nn {

// y = x W + b with W stored [in, out].
struct Dense {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    std::size_t in = 0;
    std::size_t out = 0;

    Matrix forward(const Matrix& x) const;
    // Accumulates weight/bias gradients when trainable; dx is skipped when null.
    void backward(const Matrix& x, const Matrix& dy, Matrix* dx) const;
};

struct NormCache {
    Matrix normalized;
    std::vector<double> inv_scale;
};

// LayerNorm (gain + bias) or RMSNorm (gain only), applied per row.
struct Norm {
    Parameter* gain = nullptr;
    Parameter* bias = nullptr;
    bool rms = false;
    double eps = 1e-5;

    Matrix forward(const Matrix& x, NormCache* cache) const;
    Matrix backward(const Matrix& dy, const NormCache& cache) const;
};

double gelu_grad(double x);
double silu_grad(double x);

// Rotates each (2i, 2i+1) pair of every head in one token by position * inv_freq[i].
void rotary_rotate(std::span<double> token, std::size_t n_heads, std::size_t head_dim, double position,
                   std::span<const double> inv_freq);
// Given dy for the rotated token y, turns dy into dx in place and adds the
// inv_freq gradient into freq_grad when it is non-empty.
void rotary_backward(std::span<double> grad, std::span<const double> rotated, std::size_t n_heads,
                     std::size_t head_dim, double position, std::span<const double> inv_freq,
                     std::span<double> freq_grad);

struct AttentionShape {
    std::size_t steps = 0;
    std::size_t n_heads = 0;
    std::size_t n_kv = 0;
    std::size_t head_dim = 0;
    bool causal = true;
};

// Token-major layout for one sequence: q is steps x (n_heads*head_dim),
// k and v are steps x (n_kv*head_dim). probs receives n_heads x steps x steps.
void attention_forward(const AttentionShape& shape, const double* q, const double* k, const double* v, double* out,
                       double* probs);
void attention_backward(const AttentionShape& shape, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv);

}  // namespace nn

}  // namespace ethcast
