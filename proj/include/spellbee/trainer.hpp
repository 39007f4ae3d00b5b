#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spellbee/bee_embedding.hpp"
#include "spellbee/common.hpp"
#include "spellbee/datapipe.hpp"
#include "spellbee/model.hpp"
#include "spellbee/tensor.hpp"

namespace spellbee {

struct TrainConfig {
    double lr_max = 3e-3;
    int warmup_steps = 500;
    double final_lr_frac = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.995;
    double eps = 1e-7;
    double weight_decay = 0.1;
    int batch_size = 192;
    int seq_len = 512;
    long long token_budget = 0;  // 0 -> 20 * chinchilla_multiplier * total params
    int chinchilla_multiplier = 1;
    std::uint64_t seed = 1;
    int eval_every = 100;   // test-loss cadence in steps
    int eval_batches = 8;   // held-out batches per evaluation

    void validate() const {
        check(lr_max > 0 && warmup_steps >= 0 && final_lr_frac > 0 && beta1 > 0 && beta2 > 0 &&
                  eps > 0 && weight_decay >= 0 && batch_size > 0 && seq_len > 0 &&
                  chinchilla_multiplier > 0,
              "TrainConfig: all fields must be positive");
    }
};

// ---------------------------------------------------------------------------
// Initialization. Zero-mean normal draws; Table-style variances:
//   token & byte embeddings       variance 1/sqrt(d)
//   gated-MLP up/gate projections variance (1/sqrt(fan_in)) * 1.679
//   layer norm weights            constant 1.0
//   everything else               variance 1/sqrt(fan_in)
// One RNG stream in a fixed tensor order keeps this bit-reproducible.
// ---------------------------------------------------------------------------
template <class Real>
ModelWeights<Real> init_weights(const ModelConfig& config_in, EmbedMode mode,
                                std::uint64_t seed) {
    ModelConfig c = config_in.finalized();
    Rng rng(seed);
    auto normal_tensor = [&](std::vector<std::size_t> shape, double variance,
                             const std::string& name) {
        Tensor<Real> t = Tensor<Real>::zeros(std::move(shape), true);
        double stddev = std::sqrt(variance);
        for (auto& x : t.value()) x = static_cast<Real>(rng.normal() * stddev);
        t.set_label(name);
        return t;
    };
    auto ones_tensor = [&](std::size_t n, const std::string& name) {
        Tensor<Real> t = Tensor<Real>::zeros({n}, true);
        std::fill(t.value().begin(), t.value().end(), Real(1));
        t.set_label(name);
        return t;
    };

    double d = static_cast<double>(c.d_model);
    ModelWeights<Real> w;
    w.config = c;
    w.embed.mode = mode;
    w.embed.rope_base = c.rope_base;
    w.embed.vocab_size = static_cast<std::size_t>(c.vocab_size);
    w.embed.dim = static_cast<std::size_t>(c.d_model);
    if (mode_uses_token_table(mode))
        w.embed.token_table = normal_tensor(
            {static_cast<std::size_t>(c.vocab_size), static_cast<std::size_t>(c.d_model)},
            1.0 / std::sqrt(d), "embed.token_table");
    if (mode_uses_spelling(mode))
        w.embed.byte_table =
            normal_tensor({256, static_cast<std::size_t>(c.d_model)}, 1.0 / std::sqrt(d),
                          "embed.byte_table");
    if (mode == EmbedMode::BiasOnly)
        w.embed.shared_bias = normal_tensor({static_cast<std::size_t>(c.d_model)},
                                            1.0 / std::sqrt(d), "embed.shared_bias");

    auto dm = static_cast<std::size_t>(c.d_model);
    auto aw = static_cast<std::size_t>(c.attn_width());
    auto kw = static_cast<std::size_t>(c.kv_width());
    auto ffn = static_cast<std::size_t>(c.ffn_hidden);
    const double up_gain = 1.679;
    for (int l = 0; l < c.n_layers; ++l) {
        LayerWeights<Real> layer;
        auto pfx = "layer" + std::to_string(l) + ".";
        layer.ln1_w = ones_tensor(dm, pfx + "ln1_w");
        layer.wq = normal_tensor({dm, aw}, 1.0 / std::sqrt(d), pfx + "wq");
        layer.wk = normal_tensor({dm, kw}, 1.0 / std::sqrt(d), pfx + "wk");
        layer.wv = normal_tensor({dm, kw}, 1.0 / std::sqrt(d), pfx + "wv");
        layer.wo = normal_tensor({aw, dm}, 1.0 / std::sqrt(static_cast<double>(aw)), pfx + "wo");
        layer.ln2_w = ones_tensor(dm, pfx + "ln2_w");
        layer.w_up = normal_tensor({dm, ffn}, up_gain / std::sqrt(d), pfx + "w_up");
        if (c.activation == Activation::Swiglu)
            layer.w_gate = normal_tensor({dm, ffn}, up_gain / std::sqrt(d), pfx + "w_gate");
        layer.w_down = normal_tensor({ffn, dm}, 1.0 / std::sqrt(static_cast<double>(ffn)),
                                     pfx + "w_down");
        w.layers.push_back(std::move(layer));
    }
    w.final_ln_w = ones_tensor(dm, "final_ln_w");
    w.w_out = normal_tensor({dm, static_cast<std::size_t>(c.vocab_size)}, 1.0 / std::sqrt(d),
                            "w_out");
    return w;
}

// Linear warmup to lr_max over warmup_steps, then linear decay to
// final_lr_frac * lr_max at total_steps. Steps beyond total clamp to final.
inline double lr_at(long long step, long long total_steps, const TrainConfig& cfg) {
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    if (step >= total_steps || total_steps <= cfg.warmup_steps)
        return cfg.final_lr_frac * cfg.lr_max;
    double progress = static_cast<double>(step - cfg.warmup_steps) /
                      static_cast<double>(total_steps - cfg.warmup_steps);
    return cfg.lr_max + progress * (cfg.final_lr_frac * cfg.lr_max - cfg.lr_max);
}

template <class Real>
struct OptimizerState {
    long long step = 0;
    std::vector<std::vector<Real>> m, v;  // aligned with named_params order
};

// Decoupled AdamW with bias correction:
//   m <- b1 m + (1-b1) g ;  v <- b2 v + (1-b2) g^2
//   w <- w - lr (m_hat / (sqrt(v_hat) + eps) + wd * w)
template <class Real>
void adamw_step(std::vector<std::pair<std::string, Tensor<Real>>>& params,
                OptimizerState<Real>& state, double lr, const TrainConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].second.numel(), Real(0));
            state.v[i].assign(params[i].second.numel(), Real(0));
        }
    }
    check(state.m.size() == params.size(), "adamw_step: state/parameter mismatch");
    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    Real b1 = static_cast<Real>(cfg.beta1), b2 = static_cast<Real>(cfg.beta2);
    Real eps = static_cast<Real>(cfg.eps), wd = static_cast<Real>(cfg.weight_decay);
    Real lr_r = static_cast<Real>(lr);
    Real inv_bc1 = static_cast<Real>(1.0 / bc1), inv_bc2 = static_cast<Real>(1.0 / bc2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = params[i].second;
        auto& g = t.grad();
        auto& val = t.value();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < val.size(); ++j) {
            if (!std::isfinite(static_cast<double>(g[j])))
                fail("adamw_step: non-finite gradient in tensor '" + params[i].first + "'");
            m[j] = b1 * m[j] + (Real(1) - b1) * g[j];
            v[j] = b2 * v[j] + (Real(1) - b2) * g[j] * g[j];
            Real m_hat = m[j] * inv_bc1;
            Real v_hat = v[j] * inv_bc2;
            val[j] -= lr_r * (m_hat / (std::sqrt(v_hat) + eps) + wd * val[j]);
        }
    }
}

// 6 p n, with p the non-embedding parameters and n the tokens processed.
inline double flops_estimate(long long non_embedding_params, long long tokens) {
    check(non_embedding_params >= 0 && tokens >= 0, "flops_estimate: inputs must be >= 0");
    return 6.0 * static_cast<double>(non_embedding_params) * static_cast<double>(tokens);
}

struct MetricsRow {
    long long step;
    long long tokens;
    double flops;
    double lr;
    double train_loss;
    double test_loss;      // NaN when not evaluated this step
};

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << "step,tokens,flops,lr,train_loss,test_loss\n";
    os.precision(10);
    for (const auto& r : rows) {
        os << r.step << "," << r.tokens << "," << r.flops << "," << r.lr << "," << r.train_loss
           << ",";
        if (std::isfinite(r.test_loss)) os << r.test_loss;
        os << "\n";
    }
    return os.str();
}

struct TrainResult {
    std::vector<MetricsRow> metrics;
    long long steps = 0;
    long long tokens = 0;
    double final_train_loss = 0.0;
    double final_test_loss = 0.0;
    double alpha = 1.0;
    bool aborted_non_finite = false;
};

// Mean cross-entropy over a fixed held-out batch list.
template <class Real>
double evaluate_loss(ModelWeights<Real>& w, const SpellingTable& table,
                     const std::vector<PackedBatch>& batches) {
    check(!batches.empty(), "evaluate_loss: no evaluation batches");
    double total = 0.0;
    long long positions = 0;
    for (const auto& batch : batches) {
        std::size_t bs = batch.batch_size, sl = batch.seq_len;
        std::vector<std::int32_t> inputs(bs * sl), targets(bs * sl);
        for (std::size_t r = 0; r < bs; ++r)
            for (std::size_t i = 0; i < sl; ++i) {
                inputs[r * sl + i] = batch.row(r)[i];
                targets[r * sl + i] = batch.row(r)[i + 1];
            }
        auto logits = forward(w, table, inputs, bs, sl);
        auto loss = cross_entropy(logits, targets);
        total += static_cast<double>(loss.item()) * static_cast<double>(bs * sl);
        positions += static_cast<long long>(bs * sl);
    }
    return total / static_cast<double>(positions);
}

// Full training run. Applies the spelling-table variant implied by the mode,
// calibrates alpha on the fresh init, then runs token_budget/(batch*seq)
// AdamW steps over the packed stream (wrapping in the same order when the
// corpus is shorter than the budget). Metrics rows are recorded per step.
template <class Real>
TrainResult train(const ModelConfig& model_config_in, const TrainConfig& cfg, EmbedMode mode,
                  ModelWeights<Real>& weights_out, OptimizerState<Real>& opt_out,
                  const Vocabulary& vocab, const SpellingTable& base_table,
                  const std::vector<std::vector<std::int32_t>>& train_docs,
                  const std::vector<std::vector<std::int32_t>>& test_docs,
                  std::ostream* log = nullptr) {
    cfg.validate();
    ModelConfig mc = model_config_in.finalized();
    check(mc.seq_len >= cfg.seq_len, "train: model seq_len below training seq_len");

    SpellingTable table = base_table;
    if (mode == EmbedMode::Shuffled) table = table_variant(base_table, TableVariant::Shuffled, cfg.seed);
    if (mode == EmbedMode::FirstChar) table = table_variant(base_table, TableVariant::FirstChar);

    weights_out = init_weights<Real>(mc, mode, cfg.seed);
    if (mode_uses_spelling(mode)) {
        weights_out.embed.alpha = calibrate_alpha(weights_out.embed, table);
        check(weights_out.embed.alpha > 0, "train: alpha calibration failed");
    }

    auto counts = count_params(mc, mode);
    long long budget = cfg.token_budget > 0
                           ? cfg.token_budget
                           : 20LL * cfg.chinchilla_multiplier * counts.total;
    long long tokens_per_step = static_cast<long long>(cfg.batch_size) * cfg.seq_len;
    long long total_steps = budget / tokens_per_step;  // final partial step dropped
    check(total_steps >= 1, "train: token budget below one step");

    PackedBatchStream stream(&train_docs, static_cast<std::size_t>(cfg.batch_size),
                             static_cast<std::size_t>(cfg.seq_len), vocab.eot_id);

    // Fixed held-out evaluation set, packed once.
    std::vector<PackedBatch> eval_batches;
    {
        PackedBatchStream es(&test_docs, static_cast<std::size_t>(cfg.batch_size),
                             static_cast<std::size_t>(cfg.seq_len), vocab.eot_id);
        PackedBatch b;
        while (static_cast<int>(eval_batches.size()) < cfg.eval_batches && es.next(b))
            eval_batches.push_back(b);
    }

    auto params = weights_out.named_params();
    opt_out = OptimizerState<Real>{};

    TrainResult result;
    result.alpha = weights_out.embed.alpha;
    result.steps = total_steps;
    PackedBatch batch;
    std::vector<std::int32_t> inputs(static_cast<std::size_t>(tokens_per_step));
    std::vector<std::int32_t> targets(static_cast<std::size_t>(tokens_per_step));
    for (long long step = 1; step <= total_steps; ++step) {
        if (!stream.next(batch)) {
            stream.reset();  // wrap: same data, same order
            check(stream.next(batch), "train: corpus too small for a single batch");
        }
        std::size_t bs = batch.batch_size, sl = batch.seq_len;
        for (std::size_t r = 0; r < bs; ++r)
            for (std::size_t i = 0; i < sl; ++i) {
                inputs[r * sl + i] = batch.row(r)[i];
                targets[r * sl + i] = batch.row(r)[i + 1];
            }

        for (auto& [name, p] : params) p.zero_grad();
        auto logits = forward(weights_out, table, inputs, bs, sl);
        auto loss = cross_entropy(logits, targets);
        double train_loss = static_cast<double>(loss.item());
        if (!std::isfinite(train_loss)) {
            result.aborted_non_finite = true;
            if (log) (*log) << "abort: non-finite training loss at step " << step << "\n";
            break;
        }
        loss.backward();

        double lr = lr_at(step, total_steps, cfg);
        adamw_step(params, opt_out, lr, cfg);

        MetricsRow row;
        row.step = step;
        row.tokens = step * tokens_per_step;
        row.flops = flops_estimate(counts.non_embedding, row.tokens);
        row.lr = lr;
        row.train_loss = train_loss;
        row.test_loss = std::numeric_limits<double>::quiet_NaN();
        bool eval_now = !eval_batches.empty() &&
                        (step == total_steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0));
        if (eval_now) {
            row.test_loss = evaluate_loss(weights_out, table, eval_batches);
            result.final_test_loss = row.test_loss;
        }
        result.final_train_loss = train_loss;
        result.tokens = row.tokens;
        result.metrics.push_back(row);
        if (log && (step % 50 == 0 || step == 1 || step == total_steps)) {
            (*log) << "step " << step << "/" << total_steps << " lr " << lr << " loss "
                   << train_loss;
            if (eval_now) (*log) << " test " << row.test_loss;
            (*log) << "\n";
        }
    }
    return result;
}

}  // namespace spellbee
