#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/rope.hpp"
#include "spellbee/spelling_table.hpp"
#include "spellbee/tensor.hpp"

namespace spellbee {

// Embedding construction modes. bee is the full construction; the rest are
// the ablations. shuffled and first_char use the bee formula over the
// corresponding spelling-table variant.
enum class EmbedMode {
    Baseline,
    Bee,
    BiasOnly,
    NoRotary,
    NoTokenEmb,
    Shuffled,
    FirstChar,
};

inline std::string to_string(EmbedMode m) {
    switch (m) {
        case EmbedMode::Baseline: return "baseline";
        case EmbedMode::Bee: return "bee";
        case EmbedMode::BiasOnly: return "bias-only";
        case EmbedMode::NoRotary: return "no-rotary";
        case EmbedMode::NoTokenEmb: return "no-token-emb";
        case EmbedMode::Shuffled: return "shuffled";
        case EmbedMode::FirstChar: return "first-char";
    }
    return "?";
}

inline EmbedMode embed_mode_from_string(std::string_view s) {
    if (s == "baseline") return EmbedMode::Baseline;
    if (s == "bee") return EmbedMode::Bee;
    if (s == "bias-only") return EmbedMode::BiasOnly;
    if (s == "no-rotary") return EmbedMode::NoRotary;
    if (s == "no-token-emb") return EmbedMode::NoTokenEmb;
    if (s == "shuffled") return EmbedMode::Shuffled;
    if (s == "first-char") return EmbedMode::FirstChar;
    fail("unknown embedding mode '" + std::string(s) +
         "' (expected baseline, bee, bias-only, no-rotary, no-token-emb, shuffled, first-char)");
}

inline bool mode_uses_spelling(EmbedMode m) {
    return m == EmbedMode::Bee || m == EmbedMode::NoRotary || m == EmbedMode::NoTokenEmb ||
           m == EmbedMode::Shuffled || m == EmbedMode::FirstChar;
}

inline bool mode_uses_token_table(EmbedMode m) { return m != EmbedMode::NoTokenEmb; }

inline bool mode_rotates(EmbedMode m) {
    return mode_uses_spelling(m) && m != EmbedMode::NoRotary;
}

template <class Real>
struct BeeEmbeddingParams {
    EmbedMode mode = EmbedMode::Baseline;
    double rope_base = 10000.0;
    double alpha = 1.0;  // calibrated once at init, then frozen
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    Tensor<Real> token_table;  // [V x d], absent in no-token-emb mode
    Tensor<Real> byte_table;   // [256 x d], present in spelling modes
    Tensor<Real> shared_bias;  // [d], present in bias-only mode
};

// Position-rotated byte-spelling sum: out[t] = sum_i RoPE(byte_table[b_i], i)
// over the 16 spelling bytes of each requested token. Byte positions are
// 0-based. With rotate=false this is the plain bag-of-characters sum.
template <class Real>
Tensor<Real> spelling_char_sum(const Tensor<Real>& byte_table, const SpellingTable& table,
                               std::span<const std::int32_t> ids, bool rotate,
                               double rope_base) {
    check(byte_table.rank() == 2 && byte_table.dim(0) == 256,
          "spelling_char_sum: byte table must be [256 x d]");
    std::size_t d = byte_table.dim(1);
    for (auto id : ids)
        check(id >= 0 && static_cast<std::size_t>(id) < table.size(),
              "spelling_char_sum: token id " + std::to_string(id) + " outside spelling table");

    // Rotation coefficients for the 16 intra-token positions.
    auto freq = rope_frequencies<Real>(d, rope_base);
    auto cosines = std::make_shared<std::vector<Real>>(kSpellingBytes * d / 2);
    auto sines = std::make_shared<std::vector<Real>>(kSpellingBytes * d / 2);
    for (std::size_t pos = 0; pos < kSpellingBytes; ++pos)
        for (std::size_t k = 0; k < d / 2; ++k) {
            double angle = rotate ? static_cast<double>(pos) * static_cast<double>(freq[k]) : 0.0;
            (*cosines)[pos * (d / 2) + k] = static_cast<Real>(std::cos(angle));
            (*sines)[pos * (d / 2) + k] = static_cast<Real>(std::sin(angle));
        }

    auto rows = std::make_shared<std::vector<std::uint8_t>>();
    rows->reserve(ids.size() * kSpellingBytes);
    for (auto id : ids) {
        const std::uint8_t* r = table.row(static_cast<std::size_t>(id));
        rows->insert(rows->end(), r, r + kSpellingBytes);
    }

    std::size_t n = ids.size();
    auto bi = byte_table.impl();
    Tensor<Real> out = detail::make_op<Real>(
        {n, d}, {byte_table}, [bi, rows, cosines, sines, n, d](TensorImpl<Real>& self) {
            if (!bi->requires_grad) return;
            // transpose of a rotation = rotation by the negative angle
            for (std::size_t t = 0; t < n; ++t) {
                const Real* g = self.grad.data() + t * d;
                for (std::size_t i = 0; i < kSpellingBytes; ++i) {
                    std::uint8_t byte = (*rows)[t * kSpellingBytes + i];
                    Real* dst = bi->grad.data() + static_cast<std::size_t>(byte) * d;
                    const Real* c = cosines->data() + i * (d / 2);
                    const Real* s = sines->data() + i * (d / 2);
                    for (std::size_t k = 0; k < d / 2; ++k) {
                        Real g0 = g[2 * k], g1 = g[2 * k + 1];
                        dst[2 * k] += g0 * c[k] + g1 * s[k];
                        dst[2 * k + 1] += -g0 * s[k] + g1 * c[k];
                    }
                }
            }
        });
    parallel_for(n, [&](std::size_t t0, std::size_t t1) {
        for (std::size_t t = t0; t < t1; ++t) {
            Real* dst = out.value().data() + t * d;
            for (std::size_t i = 0; i < kSpellingBytes; ++i) {
                std::uint8_t byte = (*rows)[t * kSpellingBytes + i];
                const Real* src = byte_table.value().data() + static_cast<std::size_t>(byte) * d;
                const Real* c = cosines->data() + i * (d / 2);
                const Real* s = sines->data() + i * (d / 2);
                for (std::size_t k = 0; k < d / 2; ++k) {
                    dst[2 * k] += src[2 * k] * c[k] - src[2 * k + 1] * s[k];
                    dst[2 * k + 1] += src[2 * k] * s[k] + src[2 * k + 1] * c[k];
                }
            }
        }
    });
    return out;
}

// alpha = sqrt( mean_t ||char_sum(t)||^2 / mean_t ||token_table[t]||^2 ),
// computed over the whole vocabulary at initialization and then frozen. After
// dividing by alpha the expected squared norms match by construction.
template <class Real>
double calibrate_alpha(const BeeEmbeddingParams<Real>& params, const SpellingTable& table) {
    check(params.token_table.defined() && params.byte_table.defined(),
          "calibrate_alpha: needs both token and byte tables");
    check(table.size() == params.vocab_size, "calibrate_alpha: table size mismatch");
    std::size_t v = params.vocab_size, d = params.dim;
    check(v > 0, "calibrate_alpha: empty vocabulary");

    std::vector<std::int32_t> all(v);
    for (std::size_t t = 0; t < v; ++t) all[t] = static_cast<std::int32_t>(t);
    Tensor<Real> sums = spelling_char_sum(params.byte_table, table, all,
                                          params.mode != EmbedMode::NoRotary, params.rope_base);

    double char_sq = 0.0, tok_sq = 0.0;
    for (std::size_t t = 0; t < v; ++t)
        for (std::size_t j = 0; j < d; ++j) {
            double c = sums.value()[t * d + j];
            double e = params.token_table.value()[t * d + j];
            char_sq += c * c;
            tok_sq += e * e;
        }
    check(tok_sq > 0.0, "calibrate_alpha: token table has zero norm");
    return std::sqrt(char_sq / tok_sq);
}

// Per-token embedding by mode:
//   baseline     e_tok
//   bee          (e_tok + char_sum/alpha) / 2
//   bias-only    (e_tok + shared_bias) / 2
//   no-rotary    bee without rotation
//   no-token-emb char_sum/alpha
//   shuffled / first-char: bee formula over the corresponding table variant
//                          (the caller passes the variant table)
template <class Real>
Tensor<Real> embed_tokens(const BeeEmbeddingParams<Real>& params, const SpellingTable& table,
                          std::span<const std::int32_t> ids) {
    switch (params.mode) {
        case EmbedMode::Baseline:
            return gather_rows(params.token_table, ids);
        case EmbedMode::BiasOnly:
            return scale(add_row_broadcast(gather_rows(params.token_table, ids),
                                           params.shared_bias),
                         Real(0.5));
        case EmbedMode::NoTokenEmb:
            return scale(spelling_char_sum(params.byte_table, table, ids, true, params.rope_base),
                         static_cast<Real>(1.0 / params.alpha));
        case EmbedMode::NoRotary:
        case EmbedMode::Bee:
        case EmbedMode::Shuffled:
        case EmbedMode::FirstChar: {
            auto chars = spelling_char_sum(params.byte_table, table, ids,
                                           mode_rotates(params.mode), params.rope_base);
            auto scaled = scale(chars, static_cast<Real>(1.0 / params.alpha));
            return scale(add(gather_rows(params.token_table, ids), scaled), Real(0.5));
        }
    }
    fail("embed_tokens: bad mode");
}

}  // namespace spellbee
