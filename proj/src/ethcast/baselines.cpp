#include "ethcast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ethcast {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void init_dense(Parameter& weight, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(weight.shape.front())));
    for (auto& v : weight.value) v = normal(rng);
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng) {
    Matrix mask(rows, cols, 1.0);
    if (rate <= 0.0) return mask;
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (auto& m : mask.data) m = keep(rng) ? scale : 0.0;
    return mask;
}

}  // namespace

BaselineKind parse_baseline_kind(std::string_view name) {
    if (name == "ann") return BaselineKind::Ann;
    if (name == "mlp") return BaselineKind::Mlp;
    if (name == "lstm") return BaselineKind::Lstm;
    if (name == "patchtst") return BaselineKind::PatchTst;
    fail(ErrorKind::Config, "unknown baseline kind \"" + std::string(name) + "\"");
}

const char* baseline_kind_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::Ann: return "ann";
        case BaselineKind::Mlp: return "mlp";
        case BaselineKind::Lstm: return "lstm";
        case BaselineKind::PatchTst: return "patchtst";
    }
    return "ann";
}

BaselineConfig BaselineConfig::defaults(BaselineKind kind) {
    BaselineConfig c;
    c.kind = kind;
    switch (kind) {
        case BaselineKind::Ann: c.hidden_sizes = {32, 16}; break;
        case BaselineKind::Mlp:
            c.hidden_sizes = {64, 32};
            c.dropout = 0.4;
            break;
        case BaselineKind::Lstm:
            c.units = 50;
            c.dropout = 0.4;
            break;
        case BaselineKind::PatchTst: break;
    }
    return c;
}

void BaselineConfig::validate() const {
    if (seq_len == 0 || pred_len == 0) fail(ErrorKind::Config, "seq_len and pred_len must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::Config, "dropout must lie in [0,1)");
    if ((kind == BaselineKind::Ann || kind == BaselineKind::Mlp) &&
        (hidden_sizes.empty() || std::count(hidden_sizes.begin(), hidden_sizes.end(), 0u) > 0)) {
        fail(ErrorKind::Config, "dense baselines need positive hidden layer sizes");
    }
    if (kind == BaselineKind::Lstm && units == 0) fail(ErrorKind::Config, "lstm units must be positive");
}

DenseForecaster::DenseForecaster(std::string kind, std::size_t seq_len, std::size_t pred_len,
                                 std::vector<std::size_t> hidden, double dropout)
    : kind_(std::move(kind)), seq_len_(seq_len), pred_len_(pred_len), dropout_(dropout) {
    std::vector<std::size_t> sizes{seq_len};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(pred_len);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::string name = "fc" + std::to_string(l + 1);
        const bool last = l + 2 == sizes.size();
        nn::Dense d;
        d.in = sizes[l];
        d.out = sizes[l + 1];
        d.weight = &params_.add(name + ".weight", {d.in, d.out}, last ? ParamRole::Head : ParamRole::Dense);
        d.bias = &params_.add(name + ".bias", {d.out}, last ? ParamRole::Head : ParamRole::Dense);
        layers_.push_back(d);
    }
}

void DenseForecaster::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& d : layers_) {
        init_dense(*d.weight, rng);
        std::fill(d.bias->value.begin(), d.bias->value.end(), 0.0);
    }
}

Matrix DenseForecaster::run(const Matrix& windows, bool training, std::uint64_t dropout_seed) {
    check_windows(windows);
    std::mt19937_64 rng(dropout_seed);
    if (training) {
        inputs_.clear();
        pre_.clear();
        masks_.clear();
    }
    Matrix x = windows;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix z = layers_[l].forward(x);
        if (training) inputs_.push_back(std::move(x));
        if (l + 1 == layers_.size()) {
            cached_ = training;
            return z;
        }
        Matrix a = z;
        for (auto& v : a.data) v = std::max(v, 0.0);
        if (training) {
            Matrix mask = dropout_mask(a.rows, a.cols, dropout_, rng);
            for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] *= mask.data[i];
            pre_.push_back(std::move(z));
            masks_.push_back(std::move(mask));
        }
        x = std::move(a);
    }
    return x;
}

Matrix DenseForecaster::predict(const Matrix& windows) const {
    check_windows(windows);
    Matrix x = windows;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        x = layers_[l].forward(x);
        if (l + 1 < layers_.size()) {
            for (auto& v : x.data) v = std::max(v, 0.0);
        }
    }
    return x;
}

Matrix DenseForecaster::forward_train(const Matrix& windows, std::uint64_t dropout_seed) {
    return run(windows, true, dropout_seed);
}

void DenseForecaster::backward(const Matrix& grad_output) {
    if (!cached_) fail(ErrorKind::Usage, "backward called without a preceding forward_train");
    Matrix dy = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        Matrix dx;
        layers_[l].backward(inputs_[l], dy, l > 0 ? &dx : nullptr);
        if (l == 0) break;
        const Matrix& z = pre_[l - 1];
        const Matrix& mask = masks_[l - 1];
        for (std::size_t i = 0; i < dx.data.size(); ++i) {
            dx.data[i] = z.data[i] > 0.0 ? dx.data[i] * mask.data[i] : 0.0;
        }
        dy = std::move(dx);
    }
    cached_ = false;
}

LstmForecaster::LstmForecaster(std::size_t seq_len, std::size_t pred_len, std::size_t units, double dropout)
    : seq_len_(seq_len), pred_len_(pred_len), units_(units), dropout_(dropout) {
    input_.in = 1;
    input_.out = 4 * units;
    input_.weight = &params_.add("lstm.weight_ih", {1, 4 * units}, ParamRole::Recurrent);
    input_.bias = &params_.add("lstm.bias", {4 * units}, ParamRole::Recurrent);
    recurrent_.in = units;
    recurrent_.out = 4 * units;
    recurrent_.weight = &params_.add("lstm.weight_hh", {units, 4 * units}, ParamRole::Recurrent);
    head_.in = units;
    head_.out = pred_len;
    head_.weight = &params_.add("fc.weight", {units, pred_len}, ParamRole::Head);
    head_.bias = &params_.add("fc.bias", {pred_len}, ParamRole::Head);
}

void LstmForecaster::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    init_dense(*input_.weight, rng);
    init_dense(*recurrent_.weight, rng);
    init_dense(*head_.weight, rng);
    std::fill(input_.bias->value.begin(), input_.bias->value.end(), 0.0);
    std::fill(head_.bias->value.begin(), head_.bias->value.end(), 0.0);
}

Matrix LstmForecaster::run(const Matrix& windows, bool training, std::uint64_t dropout_seed,
                           std::vector<Step>* steps, Matrix* mask, Matrix* last_hidden) const {
    check_windows(windows);
    const std::size_t B = windows.rows;
    const std::size_t H = units_;
    Matrix h(B, H);
    Matrix c(B, H);
    if (steps) steps->clear();
    for (std::size_t t = 0; t < seq_len_; ++t) {
        Matrix x(B, 1);
        for (std::size_t b = 0; b < B; ++b) x(b, 0) = windows(b, t);
        Matrix z = input_.forward(x);
        const Matrix zr = recurrent_.forward(h);
        for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += zr.data[i];
        Step s{std::move(x), h, c, Matrix(B, H), Matrix(B, H), Matrix(B, H), Matrix(B, H), Matrix(B, H)};
        for (std::size_t b = 0; b < B; ++b) {
            const auto zb = z.row(b);
            for (std::size_t u = 0; u < H; ++u) {
                const double ig = sigmoid(zb[u]);
                const double fg = sigmoid(zb[H + u]);
                const double gg = std::tanh(zb[2 * H + u]);
                const double og = sigmoid(zb[3 * H + u]);
                const double cn = fg * c(b, u) + ig * gg;
                c(b, u) = cn;
                h(b, u) = og * std::tanh(cn);
                s.i(b, u) = ig;
                s.f(b, u) = fg;
                s.g(b, u) = gg;
                s.o(b, u) = og;
                s.c(b, u) = cn;
            }
        }
        if (steps) steps->push_back(std::move(s));
    }
    if (training) {
        std::mt19937_64 rng(dropout_seed);
        Matrix m = dropout_mask(B, H, dropout_, rng);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] *= m.data[i];
        if (mask) *mask = std::move(m);
        if (last_hidden) *last_hidden = h;
    }
    return head_.forward(h);
}

Matrix LstmForecaster::predict(const Matrix& windows) const {
    return run(windows, false, 0, nullptr, nullptr, nullptr);
}

Matrix LstmForecaster::forward_train(const Matrix& windows, std::uint64_t dropout_seed) {
    Matrix y = run(windows, true, dropout_seed, &steps_, &mask_, &last_hidden_);
    cached_ = true;
    return y;
}

void LstmForecaster::backward(const Matrix& grad_output) {
    if (!cached_) fail(ErrorKind::Usage, "backward called without a preceding forward_train");
    const std::size_t B = grad_output.rows;
    const std::size_t H = units_;
    Matrix dh;
    head_.backward(last_hidden_, grad_output, &dh);
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= mask_.data[i];
    Matrix dc(B, H);
    for (std::size_t t = steps_.size(); t-- > 0;) {
        const Step& s = steps_[t];
        Matrix dz(B, 4 * H);
        for (std::size_t b = 0; b < B; ++b) {
            auto dzb = dz.row(b);
            for (std::size_t u = 0; u < H; ++u) {
                const double tc = std::tanh(s.c(b, u));
                const double ig = s.i(b, u), fg = s.f(b, u), gg = s.g(b, u), og = s.o(b, u);
                const double dhv = dh(b, u);
                const double dcv = dc(b, u) + dhv * og * (1.0 - tc * tc);
                dzb[u] = dcv * gg * ig * (1.0 - ig);
                dzb[H + u] = dcv * s.c_prev(b, u) * fg * (1.0 - fg);
                dzb[2 * H + u] = dcv * ig * (1.0 - gg * gg);
                dzb[3 * H + u] = dhv * tc * og * (1.0 - og);
                dc(b, u) = dcv * fg;
            }
        }
        input_.backward(s.x, dz, nullptr);
        Matrix dh_prev;
        recurrent_.backward(s.h_prev, dz, &dh_prev);
        dh = std::move(dh_prev);
    }
    cached_ = false;
}

BackboneConfig patchtst_backbone_config(const BaselineConfig& config) {
    BackboneConfig c;
    c.variant = Variant::Gpt2;
    c.n_layers = config.n_layers;
    c.hidden = config.hidden;
    c.n_heads = config.n_heads;
    c.n_kv_groups = config.n_heads;
    c.ffn_dim = config.ffn_dim;
    c.seq_len = config.seq_len;
    c.pred_len = config.pred_len;
    c.patch_len = config.patch_len;
    c.stride = config.stride;
    c.max_positions = std::max<std::size_t>(1, patch_count(config.seq_len, config.patch_len, config.stride));
    c.activation = Activation::Gelu;
    c.causal = false;
    return c;
}

std::unique_ptr<Forecaster> build_baseline(const BaselineConfig& config) {
    config.validate();
    switch (config.kind) {
        case BaselineKind::Ann:
        case BaselineKind::Mlp: {
            auto m = std::make_unique<DenseForecaster>(baseline_kind_name(config.kind), config.seq_len,
                                                       config.pred_len, config.hidden_sizes, config.dropout);
            m->initialize(config.seed);
            return m;
        }
        case BaselineKind::Lstm: {
            auto m = std::make_unique<LstmForecaster>(config.seq_len, config.pred_len, config.units, config.dropout);
            m->initialize(config.seed);
            return m;
        }
        case BaselineKind::PatchTst: {
            auto m = std::make_unique<TransformerForecaster>(patchtst_backbone_config(config), "patchtst");
            m->initialize(config.seed);
            apply_freeze_policy(*m, FreezeMode::Full);
            return m;
        }
    }
    fail(ErrorKind::Config, "unknown baseline kind");
}

}  // namespace ethcast
