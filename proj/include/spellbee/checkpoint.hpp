#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spellbee/common.hpp"
#include "spellbee/model.hpp"
#include "spellbee/trainer.hpp"

namespace spellbee {

// Checkpoint file: plain-text manifest followed by raw little-endian float32
// tensor blobs, in the order the manifest lists them. Weights first, then
// optimizer moments (m, v per tensor) when present.

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <class Real>
void write_blob(std::ofstream& out, const std::vector<Real>& data) {
    for (Real x : data) {
        float f = static_cast<float>(x);
        out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

template <class Real>
void read_blob(std::ifstream& in, std::vector<Real>& data, const std::string& path) {
    for (auto& x : data) {
        float f;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        check(in.gcount() == sizeof(float), path + ": truncated tensor blob");
        x = static_cast<Real>(f);
    }
}

}  // namespace detail

struct CheckpointMeta {
    ModelConfig model;
    TrainConfig train;
    EmbedMode mode = EmbedMode::Baseline;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    long long step = 0;
};

template <class Real>
void save_checkpoint(ModelWeights<Real>& weights, const OptimizerState<Real>& state,
                     const CheckpointMeta& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot write checkpoint: " + path);
    const ModelConfig& mc = weights.config;
    const TrainConfig& tc = meta.train;
    out << "spellbee-checkpoint 1\n";
    out << "mode=" << to_string(meta.mode) << "\n";
    out << "alpha=" << detail::fmt_double(meta.alpha) << "\n";
    out << "seed=" << meta.seed << "\n";
    out << "step=" << meta.step << "\n";
    out << "n_layers=" << mc.n_layers << "\nn_heads=" << mc.n_heads
        << "\nn_kv_heads=" << mc.n_kv_heads << "\nhead_dim=" << mc.head_dim
        << "\nd_model=" << mc.d_model << "\nffn_hidden=" << mc.ffn_hidden
        << "\nvocab_size=" << mc.vocab_size << "\nseq_len=" << mc.seq_len
        << "\nrope_base=" << detail::fmt_double(mc.rope_base)
        << "\nactivation=" << to_string(mc.activation) << "\n";
    out << "lr_max=" << detail::fmt_double(tc.lr_max) << "\nwarmup_steps=" << tc.warmup_steps
        << "\nfinal_lr_frac=" << detail::fmt_double(tc.final_lr_frac)
        << "\nbeta1=" << detail::fmt_double(tc.beta1) << "\nbeta2=" << detail::fmt_double(tc.beta2)
        << "\neps=" << detail::fmt_double(tc.eps)
        << "\nweight_decay=" << detail::fmt_double(tc.weight_decay)
        << "\nbatch_size=" << tc.batch_size << "\ntrain_seq_len=" << tc.seq_len
        << "\ntoken_budget=" << tc.token_budget
        << "\nchinchilla_multiplier=" << tc.chinchilla_multiplier
        << "\neval_every=" << tc.eval_every << "\neval_batches=" << tc.eval_batches << "\n";

    auto params = weights.named_params();
    out << "tensors=" << params.size() << "\n";
    for (auto& [name, t] : params) {
        out << "tensor " << name;
        for (auto dim : t.shape()) out << " " << dim;
        out << "\n";
    }
    out << "opt_state=" << (state.m.empty() ? 0 : 1) << "\n";
    out << "opt_step=" << state.step << "\n";
    out << "blob f32 little-endian\n";
    for (auto& [name, t] : params) detail::write_blob(out, t.value());
    if (!state.m.empty()) {
        check(state.m.size() == params.size(), "save_checkpoint: optimizer state mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) detail::write_blob(out, state.m[i]);
        for (std::size_t i = 0; i < params.size(); ++i) detail::write_blob(out, state.v[i]);
    }
    check(out.good(), "checkpoint write failed: " + path);
}

template <class Real>
CheckpointMeta load_checkpoint(const std::string& path, ModelWeights<Real>& weights,
                               OptimizerState<Real>& state) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open checkpoint: " + path);
    std::string line;
    std::getline(in, line);
    check(line == "spellbee-checkpoint 1", path + ": not a spellbee checkpoint (bad magic)");

    auto read_kv = [&](const std::string& key) {
        check(static_cast<bool>(std::getline(in, line)), path + ": truncated manifest");
        check(line.rfind(key + "=", 0) == 0,
              path + ": expected '" + key + "=', found '" + line + "'");
        return line.substr(key.size() + 1);
    };

    CheckpointMeta meta;
    meta.mode = embed_mode_from_string(read_kv("mode"));
    meta.alpha = std::stod(read_kv("alpha"));
    meta.seed = std::stoull(read_kv("seed"));
    meta.step = std::stoll(read_kv("step"));
    ModelConfig mc;
    mc.n_layers = std::stoi(read_kv("n_layers"));
    mc.n_heads = std::stoi(read_kv("n_heads"));
    mc.n_kv_heads = std::stoi(read_kv("n_kv_heads"));
    mc.head_dim = std::stoi(read_kv("head_dim"));
    mc.d_model = std::stoi(read_kv("d_model"));
    mc.ffn_hidden = std::stoi(read_kv("ffn_hidden"));
    mc.vocab_size = std::stoi(read_kv("vocab_size"));
    mc.seq_len = std::stoi(read_kv("seq_len"));
    mc.rope_base = std::stod(read_kv("rope_base"));
    mc.activation = activation_from_string(read_kv("activation"));
    meta.model = mc.finalized();
    TrainConfig tc;
    tc.lr_max = std::stod(read_kv("lr_max"));
    tc.warmup_steps = std::stoi(read_kv("warmup_steps"));
    tc.final_lr_frac = std::stod(read_kv("final_lr_frac"));
    tc.beta1 = std::stod(read_kv("beta1"));
    tc.beta2 = std::stod(read_kv("beta2"));
    tc.eps = std::stod(read_kv("eps"));
    tc.weight_decay = std::stod(read_kv("weight_decay"));
    tc.batch_size = std::stoi(read_kv("batch_size"));
    tc.seq_len = std::stoi(read_kv("train_seq_len"));
    tc.token_budget = std::stoll(read_kv("token_budget"));
    tc.chinchilla_multiplier = std::stoi(read_kv("chinchilla_multiplier"));
    tc.eval_every = std::stoi(read_kv("eval_every"));
    tc.eval_batches = std::stoi(read_kv("eval_batches"));
    meta.train = tc;

    weights = ModelWeights<Real>{};
    weights.config = meta.model;
    weights.embed.mode = meta.mode;
    weights.embed.rope_base = meta.model.rope_base;
    weights.embed.alpha = meta.alpha;
    weights.embed.vocab_size = static_cast<std::size_t>(meta.model.vocab_size);
    weights.embed.dim = static_cast<std::size_t>(meta.model.d_model);
    if (mode_uses_token_table(meta.mode))
        weights.embed.token_table = Tensor<Real>::zeros(
            {static_cast<std::size_t>(meta.model.vocab_size),
             static_cast<std::size_t>(meta.model.d_model)},
            true);
    if (mode_uses_spelling(meta.mode))
        weights.embed.byte_table =
            Tensor<Real>::zeros({256, static_cast<std::size_t>(meta.model.d_model)}, true);
    if (meta.mode == EmbedMode::BiasOnly)
        weights.embed.shared_bias =
            Tensor<Real>::zeros({static_cast<std::size_t>(meta.model.d_model)}, true);
    weights.layers.resize(static_cast<std::size_t>(meta.model.n_layers));
    auto dm = static_cast<std::size_t>(meta.model.d_model);
    auto aw = static_cast<std::size_t>(meta.model.attn_width());
    auto kw = static_cast<std::size_t>(meta.model.kv_width());
    auto ffn = static_cast<std::size_t>(meta.model.ffn_hidden);
    for (auto& layer : weights.layers) {
        layer.ln1_w = Tensor<Real>::zeros({dm}, true);
        layer.wq = Tensor<Real>::zeros({dm, aw}, true);
        layer.wk = Tensor<Real>::zeros({dm, kw}, true);
        layer.wv = Tensor<Real>::zeros({dm, kw}, true);
        layer.wo = Tensor<Real>::zeros({aw, dm}, true);
        layer.ln2_w = Tensor<Real>::zeros({dm}, true);
        layer.w_up = Tensor<Real>::zeros({dm, ffn}, true);
        if (meta.model.activation == Activation::Swiglu)
            layer.w_gate = Tensor<Real>::zeros({dm, ffn}, true);
        layer.w_down = Tensor<Real>::zeros({ffn, dm}, true);
    }
    weights.final_ln_w = Tensor<Real>::zeros({dm}, true);
    weights.w_out =
        Tensor<Real>::zeros({dm, static_cast<std::size_t>(meta.model.vocab_size)}, true);

    auto params = weights.named_params();
    std::size_t n_tensors = std::stoul(read_kv("tensors"));
    check(n_tensors == params.size(), path + ": tensor count mismatch");
    for (auto& [name, t] : params) {
        check(static_cast<bool>(std::getline(in, line)), path + ": truncated tensor list");
        std::istringstream ss(line);
        std::string word, tname;
        ss >> word >> tname;
        check(word == "tensor" && tname == name,
              path + ": unexpected tensor entry '" + line + "'");
        std::vector<std::size_t> dims;
        std::size_t d;
        while (ss >> d) dims.push_back(d);
        check(dims == t.shape(), path + ": shape mismatch for tensor " + name);
        t.set_label(name);
    }
    bool has_opt = read_kv("opt_state") == "1";
    long long opt_step = std::stoll(read_kv("opt_step"));
    check(static_cast<bool>(std::getline(in, line)) && line == "blob f32 little-endian",
          path + ": missing blob header");

    for (auto& [name, t] : params) detail::read_blob(in, t.value(), path);
    state = OptimizerState<Real>{};
    state.step = opt_step;
    if (has_opt) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].second.numel(), Real(0));
            detail::read_blob(in, state.m[i], path);
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.v[i].assign(params[i].second.numel(), Real(0));
            detail::read_blob(in, state.v[i], path);
        }
    }
    return meta;
}

}  // namespace spellbee
