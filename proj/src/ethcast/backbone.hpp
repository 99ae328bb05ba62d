#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ethcast/forecaster.hpp"
#include "ethcast/layers.hpp"
#include "ethcast/normpatch.hpp"

namespace ethcast {

enum class Variant { Gpt2, Llama };

Variant parse_variant(std::string_view name);
const char* variant_name(Variant variant);
Activation parse_activation(std::string_view name);
const char* activation_name(Activation activation);

struct BackboneConfig {
    Variant variant = Variant::Gpt2;
    std::size_t n_layers = 12;
    std::size_t hidden = 768;
    std::size_t n_heads = 12;
    std::size_t n_kv_groups = 12;  // == n_heads gives plain multi-head attention
    std::size_t ffn_dim = 3072;
    std::size_t max_positions = 1024;
    std::size_t seq_len = 7;
    std::size_t patch_len = 16;
    std::size_t stride = 8;
    std::size_t pred_len = 1;
    Activation activation = Activation::Gelu;
    double rope_base = 10000.0;
    double norm_eps = 1e-5;
    bool causal = true;

    std::size_t head_dim() const { return hidden / n_heads; }
    std::size_t kv_dim() const { return n_kv_groups * head_dim(); }
    std::size_t n_patches() const { return patch_count(seq_len, patch_len, stride); }
    void validate() const;

    // Shapes of the public 12-layer GPT-2 checkpoint (FFN 3072).
    static BackboneConfig gpt2();
    // 80-layer, 8192-hidden, 64-head, 8 KV-group Llama blocks.
    static BackboneConfig llama2_70b();
    static BackboneConfig llama3_70b();
};

enum class FreezeMode { Fpt, Full, LinearProbe };

FreezeMode parse_freeze_mode(std::string_view name);
const char* freeze_mode_name(FreezeMode mode);

// Patch transformer forecaster: RevIN -> patchify -> linear embedding
// (+ learned positions for the GPT-2 layout) -> pre-norm blocks -> final
// norm -> flatten -> linear head -> RevIN add-back.
//
// Parameter names follow the public checkpoint layouts:
//   gpt2:  wpe.weight, h.{i}.ln_1.{weight,bias}, h.{i}.attn.c_attn.{weight,bias},
//          h.{i}.attn.c_proj.{weight,bias}, h.{i}.ln_2.{weight,bias},
//          h.{i}.mlp.c_fc.{weight,bias}, h.{i}.mlp.c_proj.{weight,bias}, ln_f.{weight,bias}
//   llama: rotary.inv_freq, layers.{i}.input_layernorm.weight,
//          layers.{i}.self_attn.{q,k,v,o}_proj.weight, layers.{i}.post_attention_layernorm.weight,
//          layers.{i}.mlp.{gate,up,down}_proj.weight, norm.weight
//   both:  in_layer.{weight,bias}, out_layer.{weight,bias}
// Dense weights are stored [in, out].
class TransformerForecaster final : public Forecaster {
public:
    TransformerForecaster(BackboneConfig config, std::string kind);
    ~TransformerForecaster() override;

    std::string kind() const override { return kind_; }
    std::size_t seq_len() const override { return config_.seq_len; }
    std::size_t pred_len() const override { return config_.pred_len; }
    ParameterStore& params() override { return params_; }
    const ParameterStore& params() const override { return params_; }

    Matrix predict(const Matrix& windows) const override;
    Matrix forward_train(const Matrix& windows, std::uint64_t dropout_seed) override;
    void backward(const Matrix& grad_output) override;

    const BackboneConfig& config() const { return config_; }
    std::size_t head_input_dim() const { return config_.n_patches() * config_.hidden; }

    // Output of the block stack (before the final norm) for one window,
    // n_patches x hidden. Used to check causality.
    Matrix block_outputs(std::span<const double> window) const;

    void initialize(std::uint64_t seed);

private:
    struct Block;
    struct BlockCache;
    struct Cache;

    Matrix run(const Matrix& windows, Cache* cache, Matrix* block_out = nullptr) const;
    Matrix block_forward(const Block& block, const Matrix& h, std::size_t batch, BlockCache* cache) const;
    Matrix block_backward(const Block& block, const Matrix& dh, std::size_t batch, BlockCache& cache);

    BackboneConfig config_;
    std::string kind_;
    ParameterStore params_;
    nn::Dense in_layer_;
    Parameter* positional_ = nullptr;
    Parameter* inv_freq_ = nullptr;
    std::vector<Block> blocks_;
    nn::Norm final_norm_;
    nn::Dense head_;
    std::unique_ptr<Cache> cache_;
};

std::unique_ptr<TransformerForecaster> build_backbone(const BackboneConfig& config, std::uint64_t seed);

// Sets the trainable mask:
//   fpt + gpt2:  positional table, every LayerNorm, input embed, head
//   fpt + llama: every RMSNorm gain, rotary inv_freq, input embed, head
//   full:        everything
//   linear_probe: input embed and head
ParameterStore& apply_freeze_policy(TransformerForecaster& model, FreezeMode mode);

}  // namespace ethcast
