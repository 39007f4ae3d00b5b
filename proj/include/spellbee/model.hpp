#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spellbee/attention.hpp"
#include "spellbee/bee_embedding.hpp"
#include "spellbee/common.hpp"
#include "spellbee/rope.hpp"
#include "spellbee/tensor.hpp"
#include "spellbee/vocab.hpp"

namespace spellbee {

enum class Activation { Swiglu, Gelu, Relu };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Swiglu: return "swiglu";
        case Activation::Gelu: return "gelu";
        case Activation::Relu: return "relu";
    }
    return "?";
}

inline Activation activation_from_string(std::string_view s) {
    if (s == "swiglu") return Activation::Swiglu;
    if (s == "gelu") return Activation::Gelu;
    if (s == "relu") return Activation::Relu;
    fail("unknown activation '" + std::string(s) + "' (expected swiglu, gelu, relu)");
}

// Decoder-only transformer: pre-layer-norm blocks, GQA attention with
// sequence-level RoPE, gated or plain MLP, bias-free linears and norms,
// untied output projection.
struct ModelConfig {
    int n_layers = 2;
    int n_heads = 2;
    int n_kv_heads = 0;   // 0 -> max(1, n_heads/4)
    int head_dim = 16;
    int d_model = 32;
    int ffn_hidden = 0;   // 0 -> derived from the activation
    int vocab_size = 0;
    int seq_len = 64;
    double rope_base = 10000.0;
    Activation activation = Activation::Swiglu;

    int attn_width() const { return n_heads * head_dim; }
    int kv_width() const { return n_kv_heads * head_dim; }

    // SwiGLU keeps roughly the parameter count of a 4d two-matrix MLP:
    // round(8d/3), rounded up to a multiple of 8.
    static int default_ffn_hidden(int d, Activation act) {
        if (act == Activation::Swiglu) {
            int h = static_cast<int>(std::llround(8.0 * d / 3.0));
            return (h + 7) / 8 * 8;
        }
        return 4 * d;
    }

    ModelConfig finalized() const {
        ModelConfig c = *this;
        if (c.n_kv_heads == 0) c.n_kv_heads = std::max(1, c.n_heads / 4);
        if (c.ffn_hidden == 0) c.ffn_hidden = default_ffn_hidden(c.d_model, c.activation);
        check(c.n_layers >= 1 && c.n_heads >= 1 && c.head_dim >= 1 && c.d_model >= 1,
              "ModelConfig: sizes must be positive");
        check(c.d_model % 2 == 0 && c.head_dim % 2 == 0,
              "ModelConfig: d_model and head_dim must be even for RoPE");
        check(c.n_heads % c.n_kv_heads == 0, "ModelConfig: n_heads must divide by n_kv_heads");
        check(c.vocab_size >= 2, "ModelConfig: vocab_size must be set");
        check(c.seq_len >= 1, "ModelConfig: seq_len must be positive");
        return c;
    }

    // The "816m" family member with the published geometry. GQA uses 2 KV
    // heads, which reproduces the published 918m/764m parameter counts.
    static ModelConfig chinchilla_816m(int vocab_size) {
        ModelConfig c;
        c.n_layers = 25;
        c.n_heads = 12;
        c.n_kv_heads = 2;
        c.head_dim = 128;
        c.d_model = 1536;
        c.vocab_size = vocab_size;
        c.seq_len = 512;
        return c.finalized();
    }
};

template <class Real>
struct LayerWeights {
    Tensor<Real> ln1_w, wq, wk, wv, wo;
    Tensor<Real> ln2_w, w_up, w_gate, w_down;  // w_gate only for swiglu
};

template <class Real>
struct ModelWeights {
    ModelConfig config;
    BeeEmbeddingParams<Real> embed;
    std::vector<LayerWeights<Real>> layers;
    Tensor<Real> final_ln_w;
    Tensor<Real> w_out;  // untied output projection [d x V]

    std::vector<std::pair<std::string, Tensor<Real>>> named_params() {
        std::vector<std::pair<std::string, Tensor<Real>>> out;
        if (embed.token_table.defined()) out.emplace_back("embed.token_table", embed.token_table);
        if (embed.byte_table.defined()) out.emplace_back("embed.byte_table", embed.byte_table);
        if (embed.shared_bias.defined()) out.emplace_back("embed.shared_bias", embed.shared_bias);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto pfx = "layer" + std::to_string(l) + ".";
            out.emplace_back(pfx + "ln1_w", layers[l].ln1_w);
            out.emplace_back(pfx + "wq", layers[l].wq);
            out.emplace_back(pfx + "wk", layers[l].wk);
            out.emplace_back(pfx + "wv", layers[l].wv);
            out.emplace_back(pfx + "wo", layers[l].wo);
            out.emplace_back(pfx + "ln2_w", layers[l].ln2_w);
            out.emplace_back(pfx + "w_up", layers[l].w_up);
            if (layers[l].w_gate.defined()) out.emplace_back(pfx + "w_gate", layers[l].w_gate);
            out.emplace_back(pfx + "w_down", layers[l].w_down);
        }
        out.emplace_back("final_ln_w", final_ln_w);
        out.emplace_back("w_out", w_out);
        return out;
    }
};

struct ParamCounts {
    long long total = 0;
    long long non_embedding = 0;  // excludes input tables, includes output projection
};

inline ParamCounts count_params(const ModelConfig& config_in, EmbedMode mode) {
    ModelConfig c = config_in.finalized();
    long long d = c.d_model, aw = c.attn_width(), kw = c.kv_width(), h = c.ffn_hidden,
              v = c.vocab_size;
    long long per_layer = d * aw + 2 * d * kw + aw * d + 2 * d;  // qkv, o, two norms
    per_layer += (c.activation == Activation::Swiglu) ? 3 * d * h : 2 * d * h;
    long long non_emb = c.n_layers * per_layer + d /*final norm*/ + d * v /*output proj*/;
    long long emb = 0;
    if (mode_uses_token_table(mode)) emb += v * d;
    if (mode_uses_spelling(mode)) emb += 256 * d;
    if (mode == EmbedMode::BiasOnly) emb += d;
    return {non_emb + emb, non_emb};
}

// Full forward pass: ids laid out row-major [batch x seq], logits returned as
// [(batch*seq) x V].
template <class Real>
Tensor<Real> forward(ModelWeights<Real>& w, const SpellingTable& table,
                     std::span<const std::int32_t> ids, std::size_t batch, std::size_t seq) {
    const ModelConfig& c = w.config;
    check(seq <= static_cast<std::size_t>(c.seq_len),
          "forward: sequence length " + std::to_string(seq) + " exceeds configured " +
              std::to_string(c.seq_len));
    check(ids.size() == batch * seq, "forward: ids size must be batch*seq");

    Tensor<Real> x = embed_tokens(w.embed, table, ids);
    for (auto& layer : w.layers) {
        auto h = layer_norm(x, layer.ln1_w);
        auto q = rope_sequence(matmul(h, layer.wq), batch, seq,
                               static_cast<std::size_t>(c.n_heads), c.rope_base);
        auto k = rope_sequence(matmul(h, layer.wk), batch, seq,
                               static_cast<std::size_t>(c.n_kv_heads), c.rope_base);
        auto v = matmul(h, layer.wv);
        auto attn = attention(q, k, v, batch, seq, static_cast<std::size_t>(c.n_heads),
                              static_cast<std::size_t>(c.n_kv_heads), /*causal=*/true);
        x = add(x, matmul(attn, layer.wo));

        auto h2 = layer_norm(x, layer.ln2_w);
        Tensor<Real> mlp;
        switch (c.activation) {
            case Activation::Swiglu:
                mlp = swiglu(h2, layer.w_up, layer.w_gate, layer.w_down);
                break;
            case Activation::Gelu:
                mlp = matmul(gelu(matmul(h2, layer.w_up)), layer.w_down);
                break;
            case Activation::Relu:
                mlp = matmul(relu(matmul(h2, layer.w_up)), layer.w_down);
                break;
        }
        x = add(x, mlp);
    }
    x = layer_norm(x, w.final_ln_w);
    return matmul(x, w.w_out);
}

// Greedy decoding: repeatedly append the argmax token (ties resolve to the
// lowest id), stop after max_new tokens or once the decoded text contains
// stop; the text before stop is returned. Recomputes the full forward pass
// per step, which is fine at benchmark scale.
template <class Real>
std::string generate_greedy(ModelWeights<Real>& w, const SpellingTable& table,
                            const Vocabulary& vocab, std::vector<std::int32_t> prompt,
                            std::size_t max_new, const std::string& stop) {
    check(prompt.size() < static_cast<std::size_t>(w.config.seq_len),
          "generate_greedy: prompt length " + std::to_string(prompt.size()) +
              " must be below seq_len " + std::to_string(w.config.seq_len));
    std::vector<std::int32_t> generated;
    std::size_t vocab_size = static_cast<std::size_t>(w.config.vocab_size);
    for (std::size_t step = 0; step < max_new; ++step) {
        if (prompt.size() > static_cast<std::size_t>(w.config.seq_len)) break;
        auto logits = forward(w, table, prompt, 1, prompt.size());
        const Real* last = logits.value().data() + (prompt.size() - 1) * vocab_size;
        std::size_t best = 0;
        for (std::size_t t = 1; t < vocab_size; ++t)
            if (last[t] > last[best]) best = t;  // strict: ties keep the lowest id
        prompt.push_back(static_cast<std::int32_t>(best));
        generated.push_back(static_cast<std::int32_t>(best));
        std::string text = vocab.decode(generated);
        auto pos = text.find(stop);
        if (!stop.empty() && pos != std::string::npos) return text.substr(0, pos);
        if (prompt.size() >= static_cast<std::size_t>(w.config.seq_len)) break;
    }
    std::string text = vocab.decode(generated);
    auto pos = stop.empty() ? std::string::npos : text.find(stop);
    return pos == std::string::npos ? text : text.substr(0, pos);
}

}  // namespace spellbee
