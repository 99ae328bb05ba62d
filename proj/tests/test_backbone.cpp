#include <doctest.h>

#include <cmath>
#include <random>

#include "ethcast/backbone.hpp"
#include "ethcast/train.hpp"
#include "support.hpp"

using namespace ethcast;

namespace {

Matrix random_windows(std::size_t b, std::size_t seq, std::uint64_t seed) {
    return testutil::random_matrix(b, seq, seed);
}

void zero_head(TransformerForecaster& m) {
    for (const char* n : {"out_layer.weight", "out_layer.bias"}) {
        auto& p = m.params().at(n);
        std::fill(p.value.begin(), p.value.end(), 0.0);
    }
}

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("toy config builds with head input n_patches * hidden") {
    BackboneConfig c = testutil::toy_config(Variant::Gpt2);
    c.hidden = 16;
    c.n_heads = 2;
    c.n_kv_groups = 2;
    const auto m = build_backbone(c, 1);
    CHECK(c.n_patches() == 1);
    CHECK(m->head_input_dim() == 16);
    CHECK(m->params().at("out_layer.weight").shape == std::vector<std::size_t>{16, 1});
    CHECK(m->kind() == "gpt2");
}

TEST_CASE("12-layer GPT-2 shapes") {
    const auto c = BackboneConfig::gpt2();
    CHECK(c.n_layers == 12);
    CHECK(c.hidden == 768);
    CHECK(c.n_heads == 12);
    CHECK(c.ffn_dim == 3072);
    const auto l2 = BackboneConfig::llama2_70b();
    const auto l3 = BackboneConfig::llama3_70b();
    for (const auto& l : {l2, l3}) {
        CHECK(l.n_layers == 80);
        CHECK(l.hidden == 8192);
        CHECK(l.n_heads == 64);
        CHECK(l.n_kv_groups == 8);
        CHECK(l.activation == Activation::Swiglu);
    }
}

TEST_CASE("config errors") {
    auto c = testutil::toy_config(Variant::Gpt2);
    c.hidden = 10;
    c.n_heads = 4;
    c.n_kv_groups = 4;
    try {
        build_backbone(c, 1);
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    auto l = testutil::toy_config(Variant::Llama);
    l.n_kv_groups = 3;
    CHECK_THROWS_AS(build_backbone(l, 1), Error);
    CHECK_THROWS_AS(parse_freeze_mode("partial"), Error);
}

TEST_CASE("forward shape, wrong window length") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        const auto m = build_backbone(testutil::toy_config(v), 3);
        const auto y = m->predict(random_windows(4, 7, 1));
        CHECK(y.rows == 4);
        CHECK(y.cols == 1);
        try {
            m->predict(random_windows(4, 8, 1));
            FAIL("expected shape error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Shape);
        }
    }
}

TEST_CASE("zero head predicts the window mean") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        auto m = build_backbone(testutil::toy_config(v), 5);
        zero_head(*m);
        const auto x = random_windows(16, 7, 2);
        const auto y = m->predict(x);
        for (std::size_t r = 0; r < x.rows; ++r) {
            double mean = 0.0;
            for (double e : x.row(r)) mean += e;
            mean /= 7.0;
            CHECK(std::abs(y(r, 0) - mean) < 1e-6);
        }
    }
}

TEST_CASE("same batch twice and same seed give identical outputs") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        const auto a = build_backbone(testutil::toy_config(v), 9);
        const auto b = build_backbone(testutil::toy_config(v), 9);
        const auto x = random_windows(8, 7, 4);
        CHECK(a->predict(x).data == a->predict(x).data);
        CHECK(a->predict(x).data == b->predict(x).data);
        const auto c = build_backbone(testutil::toy_config(v), 10);
        CHECK(a->predict(x).data != c->predict(x).data);
    }
}

TEST_CASE("initialization: norm gains one, biases zero, rotary table") {
    const auto g = build_backbone(testutil::toy_config(Variant::Gpt2), 1);
    for (double v : g->params().at("h.1.ln_2.weight").value) CHECK(v == 1.0);
    for (double v : g->params().at("h.0.attn.c_attn.bias").value) CHECK(v == 0.0);
    const auto l = build_backbone(testutil::toy_config(Variant::Llama), 1);
    const auto& f = l->params().at("rotary.inv_freq").value;
    REQUIRE(f.size() == 4);  // head_dim 8
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == doctest::Approx(std::pow(10000.0, -2.0 * i / 8.0)));
    CHECK_FALSE(l->params().contains("layers.0.self_attn.q_proj.bias"));
    CHECK(l->params().at("layers.0.self_attn.k_proj.weight").shape == std::vector<std::size_t>{32, 16});
}

TEST_CASE("causality: block outputs before a perturbed patch are unchanged") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        auto c = testutil::grad_check_config(v);
        c.n_layers = 2;
        const auto m = build_backbone(c, 11);
        // Small integers keep the window sums exact, so a swap leaves the
        // normalization statistics bit-identical.
        Matrix base(1, c.seq_len);
        std::mt19937_64 rng(6);
        std::uniform_int_distribution<int> pick(-20, 20);
        for (auto& e : base.data) e = pick(rng);
        const auto ref = m->block_outputs(base.row(0));
        // Swapping two values keeps the window mean and variance; only
        // patches from the first swapped position onward may move.
        for (std::size_t a = 4; a + 3 < c.seq_len - 1; a += 4) {
            Matrix w = base;
            std::swap(w(0, a), w(0, a + 3));
            const auto out = m->block_outputs(w.row(0));
            const std::size_t first = a < c.patch_len ? 0 : (a - c.patch_len) / c.stride + 1;
            for (std::size_t t = 0; t < c.n_patches(); ++t) {
                double diff = 0.0;
                for (std::size_t i = 0; i < c.hidden; ++i) diff = std::max(diff, std::abs(out(t, i) - ref(t, i)));
                if (t < first) {
                    CHECK(diff == 0.0);
                } else if (t == first) {
                    CHECK(diff > 0.0);
                }
            }
        }
    }
}

TEST_CASE("freeze policy trainable sets") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        const auto c = testutil::toy_config(v);
        auto m = build_backbone(c, 1);
        apply_freeze_policy(*m, FreezeMode::Fpt);
        CHECK(testutil::sorted(m->params().trainable_names()) == testutil::expected_fpt_names(c));
        for (const auto& p : m->params()) {
            const bool is_weight_matrix = p.name.find("attn") != std::string::npos ||
                                          p.name.find("mlp") != std::string::npos;
            if (is_weight_matrix) CHECK_FALSE(p.trainable);
        }

        apply_freeze_policy(*m, FreezeMode::Full);
        CHECK(m->params().trainable_names().size() == m->params().count());

        apply_freeze_policy(*m, FreezeMode::LinearProbe);
        CHECK(testutil::sorted(m->params().trainable_names()) ==
              std::vector<std::string>{"in_layer.bias", "in_layer.weight", "out_layer.bias", "out_layer.weight"});
    }
}

TEST_CASE("gradient check, 1 layer hidden 8") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        for (auto mode : {FreezeMode::Fpt, FreezeMode::Full}) {
            CAPTURE(variant_name(v));
            CAPTURE(freeze_mode_name(mode));
            const auto c = testutil::grad_check_config(v);
            auto m = build_backbone(c, 21);
            apply_freeze_policy(*m, mode);
            Matrix x, y;
            testutil::windows_from(testutil::sine_trend(40, 0.3, 5), c.seq_len, c.pred_len, x, y);
            const auto r = testutil::gradient_check(*m, x, y);
            CAPTURE(r.worst_tensor);
            CHECK(r.worst_relative < 1e-4);
            CHECK(r.elements == m->params().trainable_element_count());
        }
    }
}

TEST_CASE("frozen parameters are bit-identical after training") {
    for (auto v : {Variant::Gpt2, Variant::Llama}) {
        auto m = build_backbone(testutil::toy_config(v), 2);
        apply_freeze_policy(*m, FreezeMode::Fpt);
        const auto before = m->params().snapshot();
        const auto series = testutil::sine_trend(120, 0.05, 3);
        const auto train = make_windows(std::span(series).first(90), 7, 1);
        const auto val = make_windows(std::span(series).subspan(83), 7, 1);
        TrainConfig tc;
        tc.base_lr = 1e-3;
        tc.min_lr = 1e-5;
        tc.max_epochs = 3;
        tc.batch_size = 16;
        fit(*m, train, val, tc);
        std::size_t changed = 0;
        for (const auto& p : m->params()) {
            if (p.trainable) {
                changed += p.value != before.at(p.name);
            } else {
                CHECK(p.value == before.at(p.name));
            }
        }
        CHECK(changed > 0);
    }
}

}  // TEST_SUITE
