#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spellbee/gradcheck.hpp"
#include "spellbee/model.hpp"
#include "spellbee/trainer.hpp"

using namespace spellbee;

namespace {

ModelConfig tiny_config(int vocab) {
    ModelConfig c;
    c.n_layers = 2;
    c.n_heads = 2;
    c.n_kv_heads = 1;
    c.head_dim = 8;
    c.d_model = 16;
    c.vocab_size = vocab;
    c.seq_len = 32;
    return c.finalized();
}

template <class Real>
ModelWeights<Real> zero_weights(const ModelConfig& config, EmbedMode mode) {
    // init, then clear every tensor
    auto w = init_weights<Real>(config, mode, 1);
    for (auto& [name, t] : w.named_params())
        std::fill(t.value().begin(), t.value().end(), Real(0));
    return w;
}

}  // namespace

TEST_CASE("zero weights give uniform logits and ln V loss") {
    auto config = tiny_config(32);
    auto w = zero_weights<double>(config, EmbedMode::Baseline);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(32);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> ids{1, 2, 3, 4};
    auto logits = forward(w, table, ids, 1, 4);
    for (auto v : logits.value()) CHECK(v == 0.0);
    auto loss = cross_entropy(logits, std::vector<std::int32_t>{2, 3, 4, 5});
    CHECK(loss.item() == Catch::Approx(std::log(32.0)).epsilon(1e-12));
}

TEST_CASE("forward matches a hand-assembled op composition") {
    ModelConfig c;
    c.n_layers = 1;
    c.n_heads = 2;
    c.n_kv_heads = 1;
    c.head_dim = 4;
    c.d_model = 8;
    c.vocab_size = 16;
    c.seq_len = 8;
    c = c.finalized();
    auto w = init_weights<double>(c, EmbedMode::Baseline, 7);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(16);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> ids{3, 1, 4, 1, 5};
    std::size_t batch = 1, seq = 5;

    auto logits = forward(w, table, ids, batch, seq);

    auto& L = w.layers[0];
    auto x = gather_rows(w.embed.token_table, ids);
    auto h = layer_norm(x, L.ln1_w);
    auto q = rope_sequence(matmul(h, L.wq), batch, seq, 2, c.rope_base);
    auto k = rope_sequence(matmul(h, L.wk), batch, seq, 1, c.rope_base);
    auto v = matmul(h, L.wv);
    auto attn = attention(q, k, v, batch, seq, 2, 1, true);
    x = add(x, matmul(attn, L.wo));
    auto h2 = layer_norm(x, L.ln2_w);
    x = add(x, swiglu(h2, L.w_up, L.w_gate, L.w_down));
    x = layer_norm(x, w.final_ln_w);
    auto expect = matmul(x, w.w_out);

    REQUIRE(logits.numel() == expect.numel());
    for (std::size_t i = 0; i < expect.numel(); ++i)
        CHECK(logits.value()[i] == Catch::Approx(expect.value()[i]).margin(1e-6));
}

TEST_CASE("causal mask: perturbing a later token leaves earlier logits bit-identical") {
    auto config = tiny_config(64);
    auto w = init_weights<double>(config, EmbedMode::Baseline, 3);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(64);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> ids{5, 9, 12, 7, 33, 21};
    auto base = forward(w, table, ids, 1, ids.size());
    std::size_t j = 4;
    auto perturbed_ids = ids;
    perturbed_ids[j] = 60;
    auto perturbed = forward(w, table, perturbed_ids, 1, ids.size());
    for (std::size_t pos = 0; pos < j; ++pos)
        for (std::size_t t = 0; t < 64; ++t)
            CHECK(base.value()[pos * 64 + t] == perturbed.value()[pos * 64 + t]);
    bool any_diff = false;
    for (std::size_t t = 0; t < 64; ++t)
        any_diff = any_diff || base.value()[j * 64 + t] != perturbed.value()[j * 64 + t];
    CHECK(any_diff);
}

TEST_CASE("forward is deterministic") {
    auto config = tiny_config(32);
    auto w = init_weights<double>(config, EmbedMode::Bee, 5);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(32);
    auto table = build_spelling_table(vocab);
    w.embed.alpha = calibrate_alpha(w.embed, table);
    std::vector<std::int32_t> ids{1, 2, 3, 4, 5, 6, 7, 8};
    auto a = forward(w, table, ids, 2, 4);
    auto b = forward(w, table, ids, 2, 4);
    CHECK(a.value() == b.value());
}

TEST_CASE("parameter counts match a hand count on a tiny config") {
    ModelConfig c = tiny_config(32);
    // per layer: wq 256, wk 128, wv 128, wo 256, norms 32, swiglu 3*16*48
    // layers 2: 6208; final norm 16; output 512; tables 32*16 + 256*16
    auto counts = count_params(c, EmbedMode::Bee);
    CHECK(counts.non_embedding == 2 * (256 + 128 + 128 + 256 + 32 + 2304) + 16 + 512);
    CHECK(counts.total == counts.non_embedding + 512 + 4096);
}

TEST_CASE("byte table adds exactly 256*d to the total") {
    ModelConfig c = tiny_config(32);
    auto baseline = count_params(c, EmbedMode::Baseline);
    auto bee = count_params(c, EmbedMode::Bee);
    CHECK(bee.total - baseline.total == 256 * c.d_model);
    CHECK(bee.non_embedding == baseline.non_embedding);
    auto bias = count_params(c, EmbedMode::BiasOnly);
    CHECK(bias.total - baseline.total == c.d_model);
}

TEST_CASE("816m configuration reproduces the published parameter counts") {
    auto c = ModelConfig::chinchilla_816m(100256);
    auto counts = count_params(c, EmbedMode::Bee);
    CHECK(std::abs(static_cast<double>(counts.total) / 918e6 - 1.0) < 0.01);
    CHECK(std::abs(static_cast<double>(counts.non_embedding) / 764e6 - 1.0) < 0.01);
}

TEST_CASE("activation switch changes only the MLP path") {
    auto config = tiny_config(32);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(32);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> ids{3, 14, 15, 9};

    auto w_swiglu = init_weights<double>(config, EmbedMode::Baseline, 11);
    ModelConfig gelu_cfg = config;
    gelu_cfg.activation = Activation::Gelu;
    gelu_cfg.ffn_hidden = config.ffn_hidden;
    auto w_gelu = init_weights<double>(gelu_cfg, EmbedMode::Baseline, 11);
    // share every non-MLP tensor, zero the MLP weights in both
    w_gelu.embed.token_table.value() = w_swiglu.embed.token_table.value();
    for (std::size_t l = 0; l < w_swiglu.layers.size(); ++l) {
        auto& a = w_swiglu.layers[l];
        auto& b = w_gelu.layers[l];
        b.ln1_w.value() = a.ln1_w.value();
        b.wq.value() = a.wq.value();
        b.wk.value() = a.wk.value();
        b.wv.value() = a.wv.value();
        b.wo.value() = a.wo.value();
        b.ln2_w.value() = a.ln2_w.value();
        std::fill(a.w_up.value().begin(), a.w_up.value().end(), 0.0);
        std::fill(a.w_gate.value().begin(), a.w_gate.value().end(), 0.0);
        std::fill(a.w_down.value().begin(), a.w_down.value().end(), 0.0);
        std::fill(b.w_up.value().begin(), b.w_up.value().end(), 0.0);
        std::fill(b.w_down.value().begin(), b.w_down.value().end(), 0.0);
    }
    w_gelu.final_ln_w.value() = w_swiglu.final_ln_w.value();
    w_gelu.w_out.value() = w_swiglu.w_out.value();

    auto a = forward(w_swiglu, table, ids, 1, ids.size());
    auto b = forward(w_gelu, table, ids, 1, ids.size());
    CHECK(a.value() == b.value());
}

TEST_CASE("full tiny transformer passes grad check in every mode family") {
    ModelConfig c;
    c.n_layers = 1;
    c.n_heads = 2;
    c.n_kv_heads = 1;
    c.head_dim = 4;
    c.d_model = 8;
    c.vocab_size = 24;
    c.seq_len = 8;
    c = c.finalized();
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(24);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> ids{1, 5, 9, 13};
    std::vector<std::int32_t> targets{5, 9, 13, 17};

    for (auto mode : {EmbedMode::Bee, EmbedMode::BiasOnly}) {
        auto w = init_weights<double>(c, mode, 17);
        if (mode_uses_spelling(mode)) w.embed.alpha = calibrate_alpha(w.embed, table);
        auto params = w.named_params();
        std::vector<Tensor<double>> tensors;
        for (auto& [name, t] : params) tensors.push_back(t);
        auto loss_fn = [&] {
            return cross_entropy(forward(w, table, ids, 1, ids.size()), targets);
        };
        auto report = grad_check(loss_fn, tensors, 6);
        INFO("mode " << to_string(mode) << " worst " << report.worst_param << " rel "
                     << report.max_rel_error);
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("greedy generation stops immediately on the stop token") {
    auto config = tiny_config(256);
    auto w = zero_weights<double>(config, EmbedMode::Baseline);
    auto vocab = byte_fallback_vocab();
    auto table = build_spelling_table(vocab);
    // all logits tie, so the lowest id (0) is chosen; byte 0 is the stop mark
    auto text = generate_greedy(w, table, vocab, {65, 66}, 8, std::string(1, '\0'));
    CHECK(text.empty());
}

TEST_CASE("greedy generation follows the argmax chain") {
    auto config = tiny_config(64);
    auto w = init_weights<double>(config, EmbedMode::Baseline, 23);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(64);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> prompt{7, 21};

    // oracle: run the argmax loop by hand
    std::vector<std::int32_t> ctx = prompt;
    std::string expect;
    for (int step = 0; step < 4; ++step) {
        auto logits = forward(w, table, ctx, 1, ctx.size());
        const double* last = logits.value().data() + (ctx.size() - 1) * 64;
        std::size_t best = 0;
        for (std::size_t t = 1; t < 64; ++t)
            if (last[t] > last[best]) best = t;
        ctx.push_back(static_cast<std::int32_t>(best));
        expect += vocab.entries[best];
    }

    auto text = generate_greedy(w, table, vocab, prompt, 4, "\n");
    auto cut = expect.find('\n');
    if (cut != std::string::npos) expect = expect.substr(0, cut);
    CHECK(text == expect);
}

TEST_CASE("generation rejects prompts at the context limit") {
    auto config = tiny_config(32);
    auto w = zero_weights<double>(config, EmbedMode::Baseline);
    auto vocab = byte_fallback_vocab();
    vocab.entries.resize(32);
    auto table = build_spelling_table(vocab);
    std::vector<std::int32_t> prompt(static_cast<std::size_t>(config.seq_len), 1);
    CHECK_THROWS_AS(generate_greedy(w, table, vocab, prompt, 4, "\n"), Error);
}
