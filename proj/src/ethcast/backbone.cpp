#include "ethcast/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ethcast {

Variant parse_variant(std::string_view name) {
    if (name == "gpt2") return Variant::Gpt2;
    if (name == "llama") return Variant::Llama;
    fail(ErrorKind::Config, "unknown backbone variant \"" + std::string(name) + "\"");
}

const char* variant_name(Variant variant) { return variant == Variant::Gpt2 ? "gpt2" : "llama"; }

Activation parse_activation(std::string_view name) {
    if (name == "gelu") return Activation::Gelu;
    if (name == "swiglu") return Activation::Swiglu;
    fail(ErrorKind::Config, "unknown activation \"" + std::string(name) + "\"");
}

const char* activation_name(Activation activation) { return activation == Activation::Gelu ? "gelu" : "swiglu"; }

FreezeMode parse_freeze_mode(std::string_view name) {
    if (name == "fpt") return FreezeMode::Fpt;
    if (name == "full") return FreezeMode::Full;
    if (name == "linear_probe") return FreezeMode::LinearProbe;
    fail(ErrorKind::Config, "unknown freeze mode \"" + std::string(name) + "\"");
}

const char* freeze_mode_name(FreezeMode mode) {
    switch (mode) {
        case FreezeMode::Fpt: return "fpt";
        case FreezeMode::Full: return "full";
        case FreezeMode::LinearProbe: return "linear_probe";
    }
    return "fpt";
}

void BackboneConfig::validate() const {
    if (n_layers < 1) fail(ErrorKind::Config, "n_layers must be at least 1");
    if (hidden == 0 || n_heads == 0 || hidden % n_heads != 0) {
        fail(ErrorKind::Config, "hidden (" + std::to_string(hidden) + ") must be divisible by n_heads (" +
                                    std::to_string(n_heads) + ")");
    }
    if (n_kv_groups == 0 || n_heads % n_kv_groups != 0) {
        fail(ErrorKind::Config, "n_heads (" + std::to_string(n_heads) + ") must be divisible by n_kv_groups (" +
                                    std::to_string(n_kv_groups) + ")");
    }
    if (ffn_dim == 0) fail(ErrorKind::Config, "ffn_dim must be positive");
    if (seq_len == 0 || pred_len == 0) fail(ErrorKind::Config, "seq_len and pred_len must be positive");
    if (patch_len < 1 || stride < 1) fail(ErrorKind::Config, "patch_len and stride must be at least 1");
    if (variant == Variant::Gpt2 && n_patches() > max_positions) {
        fail(ErrorKind::Config, "patch count exceeds max_positions");
    }
    if (variant == Variant::Llama) {
        if (head_dim() % 2 != 0) fail(ErrorKind::Config, "rotary embeddings need an even head dimension");
        if (!(rope_base > 0.0)) fail(ErrorKind::Config, "rope_base must be positive");
    }
    if (!(norm_eps > 0.0)) fail(ErrorKind::Config, "norm eps must be positive");
}

BackboneConfig BackboneConfig::gpt2() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::llama2_70b() {
    BackboneConfig c;
    c.variant = Variant::Llama;
    c.n_layers = 80;
    c.hidden = 8192;
    c.n_heads = 64;
    c.n_kv_groups = 8;
    c.ffn_dim = 28672;
    c.max_positions = 4096;
    c.activation = Activation::Swiglu;
    c.rope_base = 10000.0;
    return c;
}

BackboneConfig BackboneConfig::llama3_70b() {
    BackboneConfig c = llama2_70b();
    c.max_positions = 8192;
    c.rope_base = 500000.0;
    return c;
}

struct TransformerForecaster::Block {
    nn::Norm norm1;
    nn::Norm norm2;
    nn::Dense qkv;  // fused (gpt2 layout)
    nn::Dense q, k, v;  // separate (llama layout)
    nn::Dense proj;
    nn::Dense ffn_in;
    nn::Dense ffn_gate;
    nn::Dense ffn_out;
    bool fused = false;
    bool gated = false;
};

struct TransformerForecaster::BlockCache {
    nn::NormCache n1;
    nn::NormCache n2;
    Matrix a;
    Matrix q, k, v;  // q and k after rotation
    std::vector<double> probs;
    Matrix att;
    Matrix m;
    Matrix up;
    Matrix gate;
    Matrix act;
};

struct TransformerForecaster::Cache {
    std::size_t batch = 0;
    Matrix patches;
    std::vector<RevinState> revin;
    std::vector<BlockCache> blocks;
    nn::NormCache final_norm;
    Matrix flat;
};

TransformerForecaster::TransformerForecaster(BackboneConfig config, std::string kind)
    : config_(std::move(config)), kind_(std::move(kind)) {
    config_.validate();
    const auto& c = config_;
    const std::size_t hd = c.head_dim();
    const bool gpt2 = c.variant == Variant::Gpt2;

    auto dense = [&](const std::string& name, std::size_t in, std::size_t out, bool with_bias, ParamRole role) {
        nn::Dense d;
        d.in = in;
        d.out = out;
        d.weight = &params_.add(name + ".weight", {in, out}, role);
        if (with_bias) d.bias = &params_.add(name + ".bias", {out}, role);
        return d;
    };
    auto norm = [&](const std::string& name) {
        nn::Norm n;
        n.rms = !gpt2;
        n.eps = c.norm_eps;
        n.gain = &params_.add(name + ".weight", {c.hidden}, ParamRole::Norm);
        if (gpt2) n.bias = &params_.add(name + ".bias", {c.hidden}, ParamRole::Norm);
        return n;
    };

    in_layer_ = dense("in_layer", c.patch_len, c.hidden, true, ParamRole::InputEmbed);
    if (gpt2) {
        positional_ = &params_.add("wpe.weight", {c.max_positions, c.hidden}, ParamRole::Positional);
    } else {
        inv_freq_ = &params_.add("rotary.inv_freq", {hd / 2}, ParamRole::Rotary);
    }

    blocks_.resize(c.n_layers);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
        Block& b = blocks_[l];
        b.gated = c.activation == Activation::Swiglu;
        if (gpt2) {
            const std::string p = "h." + std::to_string(l) + ".";
            b.fused = true;
            b.norm1 = norm(p + "ln_1");
            b.qkv = dense(p + "attn.c_attn", c.hidden, c.hidden + 2 * c.kv_dim(), true, ParamRole::Attention);
            b.proj = dense(p + "attn.c_proj", c.hidden, c.hidden, true, ParamRole::Attention);
            b.norm2 = norm(p + "ln_2");
            b.ffn_in = dense(p + "mlp.c_fc", c.hidden, c.ffn_dim, true, ParamRole::Ffn);
            if (b.gated) b.ffn_gate = dense(p + "mlp.c_gate", c.hidden, c.ffn_dim, true, ParamRole::Ffn);
            b.ffn_out = dense(p + "mlp.c_proj", c.ffn_dim, c.hidden, true, ParamRole::Ffn);
        } else {
            const std::string p = "layers." + std::to_string(l) + ".";
            b.norm1 = norm(p + "input_layernorm");
            b.q = dense(p + "self_attn.q_proj", c.hidden, c.hidden, false, ParamRole::Attention);
            b.k = dense(p + "self_attn.k_proj", c.hidden, c.kv_dim(), false, ParamRole::Attention);
            b.v = dense(p + "self_attn.v_proj", c.hidden, c.kv_dim(), false, ParamRole::Attention);
            b.proj = dense(p + "self_attn.o_proj", c.hidden, c.hidden, false, ParamRole::Attention);
            b.norm2 = norm(p + "post_attention_layernorm");
            if (b.gated) b.ffn_gate = dense(p + "mlp.gate_proj", c.hidden, c.ffn_dim, false, ParamRole::Ffn);
            b.ffn_in = dense(p + "mlp.up_proj", c.hidden, c.ffn_dim, false, ParamRole::Ffn);
            b.ffn_out = dense(p + "mlp.down_proj", c.ffn_dim, c.hidden, false, ParamRole::Ffn);
        }
    }
    final_norm_ = norm(gpt2 ? "ln_f" : "norm");
    head_ = dense("out_layer", c.n_patches() * c.hidden, c.pred_len, true, ParamRole::Head);
}

TransformerForecaster::~TransformerForecaster() = default;

void TransformerForecaster::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& p : params_) {
        const bool is_bias = p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
        if (p.role == ParamRole::Norm) {
            std::fill(p.value.begin(), p.value.end(), is_bias ? 0.0 : 1.0);
        } else if (p.role == ParamRole::Rotary) {
            const auto table = RotaryTable::make(config_.head_dim(), config_.rope_base);
            p.value = table.inv_freq;
        } else if (is_bias) {
            std::fill(p.value.begin(), p.value.end(), 0.0);
        } else {
            const double stddev =
                p.role == ParamRole::Positional ? 0.02 : 1.0 / std::sqrt(static_cast<double>(p.shape.front()));
            for (auto& v : p.value) v = stddev * normal(rng);
        }
    }
}

Matrix TransformerForecaster::block_forward(const Block& b, const Matrix& h, std::size_t batch,
                                            BlockCache* cache) const {
    const auto& c = config_;
    const std::size_t P = c.n_patches();
    const std::size_t hd = c.head_dim();
    const std::size_t qdim = c.hidden;
    const std::size_t kvdim = c.kv_dim();
    const std::size_t rows = h.rows;

    Matrix a = b.norm1.forward(h, cache ? &cache->n1 : nullptr);
    Matrix q, k, v;
    if (b.fused) {
        const Matrix qkv = b.qkv.forward(a);
        q = Matrix(rows, qdim);
        k = Matrix(rows, kvdim);
        v = Matrix(rows, kvdim);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto src = qkv.row(r);
            std::copy_n(src.begin(), qdim, q.row(r).begin());
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(qdim), kvdim, k.row(r).begin());
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(qdim + kvdim), kvdim, v.row(r).begin());
        }
    } else {
        q = b.q.forward(a);
        k = b.k.forward(a);
        v = b.v.forward(a);
    }
    if (inv_freq_) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double pos = static_cast<double>(r % P);
            nn::rotary_rotate(q.row(r), c.n_heads, hd, pos, inv_freq_->value);
            nn::rotary_rotate(k.row(r), c.n_kv_groups, hd, pos, inv_freq_->value);
        }
    }

    Matrix att(rows, qdim);
    std::vector<double> probs(batch * c.n_heads * P * P);
    const nn::AttentionShape shape{P, c.n_heads, c.n_kv_groups, hd, c.causal};
    for (std::size_t w = 0; w < batch; ++w) {
        nn::attention_forward(shape, q.data.data() + w * P * qdim, k.data.data() + w * P * kvdim,
                              v.data.data() + w * P * kvdim, att.data.data() + w * P * qdim,
                              probs.data() + w * c.n_heads * P * P);
    }
    Matrix h1 = b.proj.forward(att);
    for (std::size_t i = 0; i < h1.data.size(); ++i) h1.data[i] += h.data[i];

    Matrix m = b.norm2.forward(h1, cache ? &cache->n2 : nullptr);
    Matrix up = b.ffn_in.forward(m);
    Matrix gate;
    Matrix act(rows, c.ffn_dim);
    if (b.gated) {
        gate = b.ffn_gate.forward(m);
        for (std::size_t i = 0; i < act.data.size(); ++i) act.data[i] = silu(gate.data[i]) * up.data[i];
    } else {
        for (std::size_t i = 0; i < act.data.size(); ++i) act.data[i] = gelu(up.data[i]);
    }
    Matrix out = b.ffn_out.forward(act);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += h1.data[i];

    if (cache) {
        cache->a = std::move(a);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->att = std::move(att);
        cache->m = std::move(m);
        cache->up = std::move(up);
        cache->gate = std::move(gate);
        cache->act = std::move(act);
    }
    return out;
}

Matrix TransformerForecaster::block_backward(const Block& b, const Matrix& dh2, std::size_t batch, BlockCache& bc) {
    const auto& c = config_;
    const std::size_t P = c.n_patches();
    const std::size_t hd = c.head_dim();
    const std::size_t qdim = c.hidden;
    const std::size_t kvdim = c.kv_dim();
    const std::size_t rows = dh2.rows;

    // FFN branch
    Matrix dact;
    b.ffn_out.backward(bc.act, dh2, &dact);
    Matrix dup(rows, c.ffn_dim);
    Matrix dm;
    if (b.gated) {
        Matrix dgate(rows, c.ffn_dim);
        for (std::size_t i = 0; i < dup.data.size(); ++i) {
            const double g = bc.gate.data[i];
            dup.data[i] = dact.data[i] * silu(g);
            dgate.data[i] = dact.data[i] * bc.up.data[i] * nn::silu_grad(g);
        }
        Matrix dm_gate;
        b.ffn_gate.backward(bc.m, dgate, &dm_gate);
        b.ffn_in.backward(bc.m, dup, &dm);
        for (std::size_t i = 0; i < dm.data.size(); ++i) dm.data[i] += dm_gate.data[i];
    } else {
        for (std::size_t i = 0; i < dup.data.size(); ++i) dup.data[i] = dact.data[i] * nn::gelu_grad(bc.up.data[i]);
        b.ffn_in.backward(bc.m, dup, &dm);
    }
    Matrix dh1 = b.norm2.backward(dm, bc.n2);
    for (std::size_t i = 0; i < dh1.data.size(); ++i) dh1.data[i] += dh2.data[i];

    // attention branch
    Matrix datt;
    b.proj.backward(bc.att, dh1, &datt);
    Matrix dq(rows, qdim);
    Matrix dk(rows, kvdim);
    Matrix dv(rows, kvdim);
    const nn::AttentionShape shape{P, c.n_heads, c.n_kv_groups, hd, c.causal};
    for (std::size_t w = 0; w < batch; ++w) {
        nn::attention_backward(shape, bc.q.data.data() + w * P * qdim, bc.k.data.data() + w * P * kvdim,
                               bc.v.data.data() + w * P * kvdim, bc.probs.data() + w * c.n_heads * P * P,
                               datt.data.data() + w * P * qdim, dq.data.data() + w * P * qdim,
                               dk.data.data() + w * P * kvdim, dv.data.data() + w * P * kvdim);
    }
    if (inv_freq_) {
        std::span<double> freq_grad = inv_freq_->trainable ? std::span<double>(inv_freq_->grad) : std::span<double>();
        for (std::size_t r = 0; r < rows; ++r) {
            const double pos = static_cast<double>(r % P);
            nn::rotary_backward(dq.row(r), bc.q.row(r), c.n_heads, hd, pos, inv_freq_->value, freq_grad);
            nn::rotary_backward(dk.row(r), bc.k.row(r), c.n_kv_groups, hd, pos, inv_freq_->value, freq_grad);
        }
    }
    Matrix da;
    if (b.fused) {
        Matrix dqkv(rows, qdim + 2 * kvdim);
        for (std::size_t r = 0; r < rows; ++r) {
            auto dst = dqkv.row(r).begin();
            dst = std::copy(dq.row(r).begin(), dq.row(r).end(), dst);
            dst = std::copy(dk.row(r).begin(), dk.row(r).end(), dst);
            std::copy(dv.row(r).begin(), dv.row(r).end(), dst);
        }
        b.qkv.backward(bc.a, dqkv, &da);
    } else {
        Matrix da_k, da_v;
        b.q.backward(bc.a, dq, &da);
        b.k.backward(bc.a, dk, &da_k);
        b.v.backward(bc.a, dv, &da_v);
        for (std::size_t i = 0; i < da.data.size(); ++i) da.data[i] += da_k.data[i] + da_v.data[i];
    }
    Matrix dh = b.norm1.backward(da, bc.n1);
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh1.data[i];
    return dh;
}

Matrix TransformerForecaster::run(const Matrix& windows, Cache* cache, Matrix* block_out) const {
    check_windows(windows);
    const auto& c = config_;
    const std::size_t B = windows.rows;
    const std::size_t P = c.n_patches();

    Matrix patches(B * P, c.patch_len);
    std::vector<RevinState> states(B);
    for (std::size_t w = 0; w < B; ++w) {
        auto [normed, state] = revin(windows.row(w), RevinMode::Normalize);
        states[w] = state;
        const auto grid = patchify(normed, c.patch_len, c.stride);
        for (std::size_t t = 0; t < P; ++t) std::copy(grid.patches[t].begin(), grid.patches[t].end(), patches.row(w * P + t).begin());
    }

    Matrix h = in_layer_.forward(patches);
    if (positional_) {
        for (std::size_t r = 0; r < h.rows; ++r) {
            const double* pos = positional_->value.data() + (r % P) * c.hidden;
            auto hr = h.row(r);
            for (std::size_t i = 0; i < c.hidden; ++i) hr[i] += pos[i];
        }
    }
    if (cache) cache->blocks.assign(blocks_.size(), BlockCache{});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        h = block_forward(blocks_[l], h, B, cache ? &cache->blocks[l] : nullptr);
    }
    if (block_out) *block_out = h;

    Matrix z = final_norm_.forward(h, cache ? &cache->final_norm : nullptr);
    Matrix flat;
    flat.rows = B;
    flat.cols = P * c.hidden;
    flat.data = std::move(z.data);
    Matrix y = head_.forward(flat);
    for (std::size_t w = 0; w < B; ++w) {
        const double scale = states[w].scale();
        for (auto& v : y.row(w)) v = v * scale + states[w].mean;
    }
    if (cache) {
        cache->batch = B;
        cache->patches = std::move(patches);
        cache->revin = std::move(states);
        cache->flat = std::move(flat);
    }
    return y;
}

Matrix TransformerForecaster::predict(const Matrix& windows) const { return run(windows, nullptr); }

Matrix TransformerForecaster::forward_train(const Matrix& windows, std::uint64_t) {
    cache_ = std::make_unique<Cache>();
    return run(windows, cache_.get());
}

void TransformerForecaster::backward(const Matrix& grad_output) {
    if (!cache_) fail(ErrorKind::Usage, "backward called without a preceding forward_train");
    Cache& cache = *cache_;
    const auto& c = config_;
    const std::size_t B = cache.batch;
    const std::size_t P = c.n_patches();
    if (grad_output.rows != B || grad_output.cols != c.pred_len) fail(ErrorKind::Shape, "gradient shape mismatch");

    // The RevIN add-back depends on the input only, so it just rescales.
    Matrix dy = grad_output;
    for (std::size_t w = 0; w < B; ++w) {
        const double scale = cache.revin[w].scale();
        for (auto& v : dy.row(w)) v *= scale;
    }
    Matrix dflat;
    head_.backward(cache.flat, dy, &dflat);
    dflat.rows = B * P;
    dflat.cols = c.hidden;
    Matrix dh = final_norm_.backward(dflat, cache.final_norm);
    for (std::size_t l = blocks_.size(); l-- > 0;) {
        dh = block_backward(blocks_[l], dh, B, cache.blocks[l]);
    }
    if (positional_ && positional_->trainable) {
        for (std::size_t r = 0; r < dh.rows; ++r) {
            double* g = positional_->grad.data() + (r % P) * c.hidden;
            const auto dr = dh.row(r);
            for (std::size_t i = 0; i < c.hidden; ++i) g[i] += dr[i];
        }
    }
    in_layer_.backward(cache.patches, dh, nullptr);
    cache_.reset();
}

Matrix TransformerForecaster::block_outputs(std::span<const double> window) const {
    Matrix w(1, window.size());
    std::copy(window.begin(), window.end(), w.data.begin());
    Matrix out;
    run(w, nullptr, &out);
    return out;
}

std::unique_ptr<TransformerForecaster> build_backbone(const BackboneConfig& config, std::uint64_t seed) {
    auto model = std::make_unique<TransformerForecaster>(config, variant_name(config.variant));
    model->initialize(seed);
    return model;
}

ParameterStore& apply_freeze_policy(TransformerForecaster& model, FreezeMode mode) {
    const bool gpt2 = model.config().variant == Variant::Gpt2;
    auto& store = model.params();
    for (auto& p : store) {
        bool trainable = false;
        switch (mode) {
            case FreezeMode::Full: trainable = true; break;
            case FreezeMode::LinearProbe:
                trainable = p.role == ParamRole::InputEmbed || p.role == ParamRole::Head;
                break;
            case FreezeMode::Fpt:
                trainable = p.role == ParamRole::InputEmbed || p.role == ParamRole::Head || p.role == ParamRole::Norm ||
                            (gpt2 ? p.role == ParamRole::Positional : p.role == ParamRole::Rotary);
                break;
        }
        store.set_trainable(p, trainable);
    }
    return store;
}

}  // namespace ethcast
