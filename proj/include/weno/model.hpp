#pragma once

#include <random>
#include <string>
#include <vector>

#include "weno/params.hpp"
#include "weno/tape.hpp"
#include "weno/tensor.hpp"

namespace weno {

// Multi-layer perceptron encoder: input -> hidden widths -> embedding, with
// ReLU after every layer (the output layer included).
struct EncoderConfig {
    long input_dim = 32;
    std::vector<long> hidden = {64, 64};
    long embed_dim = 64;  // M

    void validate() const;
    std::vector<long> layer_sizes() const;  // [input, hidden..., embed]
};

struct AttentionConfig {
    long embed_dim = 64;  // M, must match the encoder
    long attn_dim = 32;   // L

    void validate() const;
};

// Names the encoder parameter block each branch resolves to. With sharing
// enabled both prefixes are the same storage; otherwise two independent
// blocks exist.
struct SharedEncoderHandle {
    std::string teacher_prefix;
    std::string student_prefix;
    bool shared = true;
};

SharedEncoderHandle make_encoder_handle(bool shared);

struct ModelConfig {
    EncoderConfig encoder;
    AttentionConfig attention;
    bool shared_encoder = true;

    void validate() const;
    SharedEncoderHandle encoder_handle() const { return make_encoder_handle(shared_encoder); }
};

// Registers every parameter block (encoder(s), attention, bag head, instance
// head) with uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] initialization.
template <typename T>
void init_params(const ModelConfig& config, ParameterStore<T>& store, std::mt19937_64& rng) {
    config.validate();
    const SharedEncoderHandle handle = config.encoder_handle();
    const std::vector<long> sizes = config.encoder.layer_sizes();

    const auto add_encoder = [&](const std::string& prefix) {
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const long in = sizes[l];
            const long out = sizes[l + 1];
            const std::string layer = prefix + "." + std::to_string(l);
            store.add_uniform(layer + ".w", {in, out}, in, rng);
            store.add_uniform(layer + ".b", {out}, in, rng);
        }
    };
    add_encoder(handle.teacher_prefix);
    if (!handle.shared) add_encoder(handle.student_prefix);

    const long M = config.attention.embed_dim;
    const long L = config.attention.attn_dim;
    store.add_uniform("attn.V", {L, M}, M, rng);
    store.add_uniform("attn.w", {L}, L, rng);
    store.add_uniform("bag_head.w", {M}, M, rng);
    store.add_uniform("bag_head.b", {1}, M, rng);
    store.add_uniform("inst_head.w", {M}, M, rng);
    store.add_uniform("inst_head.b", {1}, M, rng);
}

// Instances [n, d] -> embeddings [n, M] through the encoder block named by
// `prefix` ("encoder", or "encoder_t"/"encoder_s" when not shared).
template <typename T>
Var encode(Tape<T>& tape, ParameterStore<T>& store, const EncoderConfig& config,
           const std::string& prefix, Var x) {
    const Tensor<T>& in = tape.value(x);
    if (in.rank() != 2 || in.shape[1] != config.input_dim)
        throw std::invalid_argument("encode: input shape " + shape_str(in.shape) +
                                    " does not match encoder input dimension " +
                                    std::to_string(config.input_dim));
    const std::vector<long> sizes = config.layer_sizes();
    Var h = x;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::string layer = prefix + "." + std::to_string(l);
        Var w = tape.param(store, layer + ".w");
        Var b = tape.param(store, layer + ".b");
        h = tape.relu(tape.add(tape.matmul(h, w), b));
    }
    return h;
}

// Embeddings [n, M] -> attention weights [n]: softmax over the bag of
// w^T tanh(V z_j).
template <typename T>
Var attention_scores(Tape<T>& tape, ParameterStore<T>& store, const AttentionConfig& config,
                     Var embeddings) {
    const Tensor<T>& z = tape.value(embeddings);
    if (z.rank() != 2 || z.shape[1] != config.embed_dim)
        throw std::invalid_argument("attention: embeddings shape " + shape_str(z.shape) +
                                    " does not match embedding dimension " +
                                    std::to_string(config.embed_dim));
    Var vt = tape.transpose(tape.param(store, "attn.V"));   // [M, L]
    Var u = tape.tanh(tape.matmul(embeddings, vt));         // [n, L]
    Var logits = tape.matmul(u, tape.param(store, "attn.w"));  // [n]
    return tape.softmax(logits);
}

// Weighted sum of embeddings: weights [n] x embeddings [n, M] -> [1, M].
template <typename T>
Var aggregate(Tape<T>& tape, Var embeddings, Var weights) {
    const Tensor<T>& z = tape.value(embeddings);
    const Tensor<T>& a = tape.value(weights);
    if (a.rank() != 1 || z.rank() != 2 || a.shape[0] != z.shape[0])
        throw std::invalid_argument("aggregate: weights shape " + shape_str(a.shape) +
                                    " does not match embeddings shape " + shape_str(z.shape));
    Var row = tape.reshape(weights, {1, a.shape[0]});
    return tape.matmul(row, embeddings);
}

// Bag feature [1, M] -> bag positive probability [1].
template <typename T>
Var bag_predict(Tape<T>& tape, ParameterStore<T>& store, Var bag_feature) {
    Var logit = tape.matmul(bag_feature, tape.param(store, "bag_head.w"));  // [1]
    return tape.sigmoid(tape.add(logit, tape.param(store, "bag_head.b")));
}

// Embeddings [n, M] -> per-instance positive probabilities [n].
template <typename T>
Var instance_predict(Tape<T>& tape, ParameterStore<T>& store, Var embeddings) {
    Var logits = tape.matmul(embeddings, tape.param(store, "inst_head.w"));  // [n]
    return tape.sigmoid(tape.add(logits, tape.param(store, "inst_head.b")));
}

enum class PoolMode { max, mean };

PoolMode pool_mode_from_string(const std::string& name);

// Attention-free aggregation baselines: coordinatewise max or mean over the
// instances, [n, M] -> [1, M].
template <typename T>
Var pool_baseline(Tape<T>& tape, Var embeddings, PoolMode mode) {
    const Tensor<T>& z = tape.value(embeddings);
    if (z.rank() != 2) throw std::invalid_argument("pool: embeddings must have rank 2");
    switch (mode) {
        case PoolMode::max:
            return tape.reshape(tape.max_rows(tape.transpose(embeddings)), {1, z.shape[1]});
        case PoolMode::mean: {
            Tensor<T> ones({1, z.shape[0]});
            for (auto& v : ones.data) v = T(1) / static_cast<T>(z.shape[0]);
            return tape.matmul(tape.input(std::move(ones)), embeddings);
        }
    }
    throw std::invalid_argument("pool: unknown mode");
}

// Full teacher pass over one bag: encode, attend, aggregate, classify, and
// score against the bag label.
struct TeacherForward {
    Var embeddings;  // [n, M]
    Var attention;   // [n]
    Var bag_prob;    // [1]
    Var loss;        // scalar
};

template <typename T>
TeacherForward teacher_forward(Tape<T>& tape, ParameterStore<T>& store, const ModelConfig& config,
                               Var instances, T bag_label_value) {
    TeacherForward out;
    out.embeddings = encode(tape, store, config.encoder, config.encoder_handle().teacher_prefix,
                            instances);
    out.attention = attention_scores(tape, store, config.attention, out.embeddings);
    Var bag_feature = aggregate(tape, out.embeddings, out.attention);
    out.bag_prob = bag_predict(tape, store, bag_feature);
    out.loss = tape.bce(out.bag_prob, Tensor<T>({1}, {bag_label_value}));
    return out;
}

// Full student pass over a batch of instances against constant soft targets.
struct StudentForward {
    Var probs;  // [b]
    Var loss;   // scalar
};

template <typename T>
StudentForward student_forward(Tape<T>& tape, ParameterStore<T>& store, const ModelConfig& config,
                               Var instances, Tensor<T> targets) {
    StudentForward out;
    Var z = encode(tape, store, config.encoder, config.encoder_handle().student_prefix, instances);
    out.probs = instance_predict(tape, store, z);
    out.loss = tape.bce(out.probs, std::move(targets));
    return out;
}

// Packs a bag's instance features into an [n, d] tensor.
template <typename T, typename BagT>
Tensor<T> bag_features(const BagT& bag) {
    const long n = static_cast<long>(bag.instances.size());
    const long d = static_cast<long>(bag.instances.empty() ? 0 : bag.instances[0].features.size());
    Tensor<T> out({n, d});
    for (long j = 0; j < n; ++j) {
        const auto& f = bag.instances[static_cast<std::size_t>(j)].features;
        for (long c = 0; c < d; ++c)
            out.data[static_cast<std::size_t>(j * d + c)] = static_cast<T>(f[static_cast<std::size_t>(c)]);
    }
    return out;
}

}  // namespace weno
