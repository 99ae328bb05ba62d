#include "ethcast/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ethcast {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
    if (x.empty() || gain.size() != x.size() || bias.size() != x.size()) {
        fail(ErrorKind::Shape, "layer_norm: x, gain and bias must have the same non-zero length");
    }
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv * gain[i] + bias[i];
    return y;
}

std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain, double eps) {
    if (x.empty() || gain.size() != x.size()) fail(ErrorKind::Shape, "rms_norm: x and gain must match");
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + eps);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv * gain[i];
    return y;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double silu(double x) { return x * sigmoid(x); }

RotaryTable RotaryTable::make(std::size_t head_dim, double base) {
    if (head_dim % 2 != 0) fail(ErrorKind::Config, "rotary embeddings need an even head dimension");
    if (!(base > 0.0)) fail(ErrorKind::Config, "rotary base must be positive");
    RotaryTable t;
    t.base = base;
    t.inv_freq.resize(head_dim / 2);
    for (std::size_t i = 0; i < t.inv_freq.size(); ++i) {
        t.inv_freq[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
    }
    return t;
}

std::pair<HeadTensor, HeadTensor> rotary_apply(const HeadTensor& q, const HeadTensor& k,
                                               std::span<const std::size_t> positions, const RotaryTable& table) {
    if (q.dim % 2 != 0 || k.dim % 2 != 0) fail(ErrorKind::Config, "rotary embeddings need an even head dimension");
    if (q.dim != k.dim || q.dim / 2 != table.inv_freq.size()) fail(ErrorKind::Shape, "rotary table/head_dim mismatch");
    if (positions.size() != q.steps || positions.size() != k.steps) {
        fail(ErrorKind::Shape, "rotary_apply needs one position per step");
    }
    auto rotate = [&](const HeadTensor& x) {
        HeadTensor y = x;
        for (std::size_t h = 0; h < x.heads; ++h) {
            for (std::size_t t = 0; t < x.steps; ++t) {
                std::span<double> tok(&y.at(h, t, 0), x.dim);
                nn::rotary_rotate(tok, 1, x.dim, static_cast<double>(positions[t]), table.inv_freq);
            }
        }
        return y;
    };
    return {rotate(q), rotate(k)};
}

HeadTensor grouped_query_attention(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v, bool causal) {
    if (k.heads == 0 || q.heads % k.heads != 0) {
        fail(ErrorKind::Config, "query heads must be divisible by key/value groups");
    }
    if (k.heads != v.heads || q.steps != k.steps || k.steps != v.steps || q.dim != k.dim || k.dim != v.dim) {
        fail(ErrorKind::Shape, "grouped_query_attention: inconsistent tensor shapes");
    }
    const std::size_t T = q.steps;
    const std::size_t d = q.dim;
    // Repack head-major tensors into the token-major kernel layout.
    auto to_tokens = [&](const HeadTensor& x) {
        std::vector<double> out(T * x.heads * d);
        for (std::size_t h = 0; h < x.heads; ++h)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t i = 0; i < d; ++i) out[(t * x.heads + h) * d + i] = x.at(h, t, i);
        return out;
    };
    const auto qt = to_tokens(q);
    const auto kt = to_tokens(k);
    const auto vt = to_tokens(v);
    std::vector<double> ot(qt.size());
    std::vector<double> probs(q.heads * T * T);
    nn::attention_forward({T, q.heads, k.heads, d, causal}, qt.data(), kt.data(), vt.data(), ot.data(), probs.data());
    HeadTensor out(q.heads, T, d);
    for (std::size_t h = 0; h < q.heads; ++h)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < d; ++i) out.at(h, t, i) = ot[(t * q.heads + h) * d + i];
    return out;
}

std::vector<double> ffn_forward(std::span<const double> x, const FfnWeights& w, Activation activation) {
    const std::size_t hidden = x.size();
    const std::size_t ffn = w.w_in.cols;
    if (w.w_in.rows != hidden || w.w_out.rows != ffn || (!w.b_in.empty() && w.b_in.size() != ffn) ||
        (!w.b_out.empty() && w.b_out.size() != w.w_out.cols)) {
        fail(ErrorKind::Shape, "ffn_forward: weight shapes do not match the input");
    }
    if (activation == Activation::Swiglu && (w.w_gate.rows != hidden || w.w_gate.cols != ffn)) {
        fail(ErrorKind::Shape, "ffn_forward: swiglu needs a gate projection shaped like the up projection");
    }
    std::vector<double> up(ffn, 0.0);
    std::vector<double> gate(ffn, 0.0);
    for (std::size_t j = 0; j < ffn; ++j) {
        double s = w.b_in.empty() ? 0.0 : w.b_in[j];
        for (std::size_t i = 0; i < hidden; ++i) s += x[i] * w.w_in(i, j);
        up[j] = s;
        if (activation == Activation::Swiglu) {
            double g = 0.0;
            for (std::size_t i = 0; i < hidden; ++i) g += x[i] * w.w_gate(i, j);
            gate[j] = g;
        }
    }
    std::vector<double> act(ffn);
    for (std::size_t j = 0; j < ffn; ++j) {
        act[j] = activation == Activation::Gelu ? gelu(up[j]) : silu(gate[j]) * up[j];
    }
    std::vector<double> y(w.w_out.cols, 0.0);
    for (std::size_t o = 0; o < y.size(); ++o) {
        double s = w.b_out.empty() ? 0.0 : w.b_out[o];
        for (std::size_t j = 0; j < ffn; ++j) s += act[j] * w.w_out(j, o);
        y[o] = s;
    }
    return y;
}

namespace nn {

Matrix Dense::forward(const Matrix& x) const {
    if (x.cols != in) fail(ErrorKind::Shape, "dense input width mismatch for " + weight->name);
    Matrix y(x.rows, out);
    const double* w = weight->value.data();
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* yr = y.row(r).data();
        if (bias) std::copy(bias->value.begin(), bias->value.end(), yr);
    }
    constexpr std::size_t kRowBlock = 8;
    for (std::size_t r0 = 0; r0 < x.rows; r0 += kRowBlock) {
        const std::size_t r1 = std::min(x.rows, r0 + kRowBlock);
        for (std::size_t k = 0; k < in; ++k) {
            const double* wk = w + k * out;
            for (std::size_t r = r0; r < r1; ++r) {
                const double a = x(r, k);
                double* yr = y.row(r).data();
                for (std::size_t j = 0; j < out; ++j) yr[j] += a * wk[j];
            }
        }
    }
    return y;
}

void Dense::backward(const Matrix& x, const Matrix& dy, Matrix* dx) const {
    const double* w = weight->value.data();
    if (dx) {
        *dx = Matrix(x.rows, in);
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double* dyr = dy.row(r).data();
            double* dxr = dx->row(r).data();
            for (std::size_t k = 0; k < in; ++k) {
                const double* wk = w + k * out;
                double s = 0.0;
                for (std::size_t j = 0; j < out; ++j) s += wk[j] * dyr[j];
                dxr[k] = s;
            }
        }
    }
    if (weight->trainable) {
        double* gw = weight->grad.data();
        for (std::size_t r = 0; r < x.rows; ++r) {
            const double* dyr = dy.row(r).data();
            for (std::size_t k = 0; k < in; ++k) {
                const double a = x(r, k);
                double* gk = gw + k * out;
                for (std::size_t j = 0; j < out; ++j) gk[j] += a * dyr[j];
            }
        }
    }
    if (bias && bias->trainable) {
        for (std::size_t r = 0; r < dy.rows; ++r) {
            const auto dyr = dy.row(r);
            for (std::size_t j = 0; j < out; ++j) bias->grad[j] += dyr[j];
        }
    }
}

Matrix Norm::forward(const Matrix& x, NormCache* cache) const {
    const std::size_t n = x.cols;
    Matrix y(x.rows, n);
    if (cache) {
        cache->normalized = Matrix(x.rows, n);
        cache->inv_scale.assign(x.rows, 0.0);
    }
    const double* g = gain->value.data();
    const double* b = bias ? bias->value.data() : nullptr;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto xr = x.row(r);
        double mean = 0.0;
        if (!rms) {
            for (double v : xr) mean += v;
            mean /= static_cast<double>(n);
        }
        double ms = 0.0;
        for (double v : xr) ms += (v - mean) * (v - mean);
        ms /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(ms + eps);
        auto yr = y.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            const double xh = (xr[i] - mean) * inv;
            if (cache) cache->normalized(r, i) = xh;
            yr[i] = xh * g[i] + (b ? b[i] : 0.0);
        }
        if (cache) cache->inv_scale[r] = inv;
    }
    return y;
}

Matrix Norm::backward(const Matrix& dy, const NormCache& cache) const {
    const std::size_t n = dy.cols;
    Matrix dx(dy.rows, n);
    const double* g = gain->value.data();
    std::vector<double> dxh(n);
    for (std::size_t r = 0; r < dy.rows; ++r) {
        const auto dyr = dy.row(r);
        const auto xh = cache.normalized.row(r);
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dxh[i] = dyr[i] * g[i];
            mean_d += dxh[i];
            mean_dx += dxh[i] * xh[i];
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        if (rms) mean_d = 0.0;
        auto dxr = dx.row(r);
        const double inv = cache.inv_scale[r];
        for (std::size_t i = 0; i < n; ++i) dxr[i] = inv * (dxh[i] - mean_d - xh[i] * mean_dx);
        if (gain->trainable) {
            for (std::size_t i = 0; i < n; ++i) gain->grad[i] += dyr[i] * xh[i];
        }
        if (bias && bias->trainable) {
            for (std::size_t i = 0; i < n; ++i) bias->grad[i] += dyr[i];
        }
    }
    return dx;
}

double gelu_grad(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

void rotary_rotate(std::span<double> token, std::size_t n_heads, std::size_t head_dim, double position,
                   std::span<const double> inv_freq) {
    if (head_dim % 2 != 0) fail(ErrorKind::Config, "rotary embeddings need an even head dimension");
    if (position == 0.0) return;
    const std::size_t pairs = head_dim / 2;
    for (std::size_t i = 0; i < pairs; ++i) {
        const double angle = position * inv_freq[i];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        for (std::size_t h = 0; h < n_heads; ++h) {
            double& a = token[h * head_dim + 2 * i];
            double& b = token[h * head_dim + 2 * i + 1];
            const double a0 = a;
            const double b0 = b;
            a = a0 * c - b0 * s;
            b = a0 * s + b0 * c;
        }
    }
}

void rotary_backward(std::span<double> grad, std::span<const double> rotated, std::size_t n_heads,
                     std::size_t head_dim, double position, std::span<const double> inv_freq,
                     std::span<double> freq_grad) {
    if (position == 0.0) return;
    const std::size_t pairs = head_dim / 2;
    for (std::size_t i = 0; i < pairs; ++i) {
        const double angle = position * inv_freq[i];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        double dangle = 0.0;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const std::size_t ia = h * head_dim + 2 * i;
            const double ga = grad[ia];
            const double gb = grad[ia + 1];
            // d(rotated)/d(angle) = (-rotated_b, rotated_a)
            dangle += -ga * rotated[ia + 1] + gb * rotated[ia];
            grad[ia] = ga * c + gb * s;
            grad[ia + 1] = -ga * s + gb * c;
        }
        if (!freq_grad.empty()) freq_grad[i] += dangle * position;
    }
}

void attention_forward(const AttentionShape& shape, const double* q, const double* k, const double* v, double* out,
                       double* probs) {
    const std::size_t T = shape.steps;
    const std::size_t d = shape.head_dim;
    const std::size_t q_stride = shape.n_heads * d;
    const std::size_t kv_stride = shape.n_kv * d;
    const std::size_t group = shape.n_heads / shape.n_kv;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> p(T);
    for (std::size_t h = 0; h < shape.n_heads; ++h) {
        const std::size_t g = h / group;
        for (std::size_t i = 0; i < T; ++i) {
            const double* qi = q + i * q_stride + h * d;
            const std::size_t visible = shape.causal ? i + 1 : T;
            double max_score = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < visible; ++j) {
                const double* kj = k + j * kv_stride + g * d;
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += qi[c] * kj[c];
                p[j] = s * scale;
                max_score = std::max(max_score, p[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < visible; ++j) {
                p[j] = std::exp(p[j] - max_score);
                denom += p[j];
            }
            double* oi = out + i * q_stride + h * d;
            std::fill(oi, oi + d, 0.0);
            for (std::size_t j = 0; j < T; ++j) {
                const double pj = j < visible ? p[j] / denom : 0.0;
                if (probs) probs[(h * T + i) * T + j] = pj;
                if (pj == 0.0) continue;
                const double* vj = v + j * kv_stride + g * d;
                for (std::size_t c = 0; c < d; ++c) oi[c] += pj * vj[c];
            }
        }
    }
}

void attention_backward(const AttentionShape& shape, const double* q, const double* k, const double* v,
                        const double* probs, const double* dout, double* dq, double* dk, double* dv) {
    const std::size_t T = shape.steps;
    const std::size_t d = shape.head_dim;
    const std::size_t q_stride = shape.n_heads * d;
    const std::size_t kv_stride = shape.n_kv * d;
    const std::size_t group = shape.n_heads / shape.n_kv;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::fill(dq, dq + T * q_stride, 0.0);
    std::fill(dk, dk + T * kv_stride, 0.0);
    std::fill(dv, dv + T * kv_stride, 0.0);
    std::vector<double> dp(T);
    for (std::size_t h = 0; h < shape.n_heads; ++h) {
        const std::size_t g = h / group;
        for (std::size_t i = 0; i < T; ++i) {
            const double* pi = probs + (h * T + i) * T;
            const double* doi = dout + i * q_stride + h * d;
            double weighted = 0.0;
            for (std::size_t j = 0; j < T; ++j) {
                const double* vj = v + j * kv_stride + g * d;
                double* dvj = dv + j * kv_stride + g * d;
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    s += doi[c] * vj[c];
                    dvj[c] += pi[j] * doi[c];
                }
                dp[j] = s;
                weighted += pi[j] * s;
            }
            const double* qi = q + i * q_stride + h * d;
            double* dqi = dq + i * q_stride + h * d;
            for (std::size_t j = 0; j < T; ++j) {
                const double ds = pi[j] * (dp[j] - weighted) * scale;
                if (ds == 0.0) continue;
                const double* kj = k + j * kv_stride + g * d;
                double* dkj = dk + j * kv_stride + g * d;
                for (std::size_t c = 0; c < d; ++c) {
                    dqi[c] += ds * kj[c];
                    dkj[c] += ds * qi[c];
                }
            }
        }
    }
}

}  // namespace nn

}  // namespace ethcast
