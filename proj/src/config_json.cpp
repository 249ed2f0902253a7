#include "weno/config_json.hpp"

#include <algorithm>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace weno {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
    if (!j.is_object())
        throw std::invalid_argument("config: " + context + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known)
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + context);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json gen_spec_to_json(const GenSpec& s) {
    json j;
    j["train-bags"] = s.train_bags;
    j["valid-bags"] = s.valid_bags;
    j["test-bags"] = s.test_bags;
    j["instances-per-bag"] = s.instances_per_bag;
    j["dim"] = s.dim;
    j["positive-bag-fraction"] = s.positive_bag_fraction;
    j["positive-ratio"] = s.positive_ratio;
    j["separation"] = s.separation;
    j["near-fraction"] = s.near_fraction;
    j["near-scale"] = s.near_scale;
    j["seed"] = s.seed;
    return j;
}

GenSpec gen_spec_from_json(const json& j, bool strict) {
    if (strict)
        check_keys(j,
                   {"train-bags", "valid-bags", "test-bags", "instances-per-bag", "dim",
                    "positive-bag-fraction", "positive-ratio", "separation", "near-fraction",
                    "near-scale", "seed"},
                   "dataset spec");
    GenSpec s;
    read(j, "train-bags", s.train_bags);
    read(j, "valid-bags", s.valid_bags);
    read(j, "test-bags", s.test_bags);
    read(j, "instances-per-bag", s.instances_per_bag);
    read(j, "dim", s.dim);
    read(j, "positive-bag-fraction", s.positive_bag_fraction);
    read(j, "positive-ratio", s.positive_ratio);
    read(j, "separation", s.separation);
    read(j, "near-fraction", s.near_fraction);
    read(j, "near-scale", s.near_scale);
    read(j, "seed", s.seed);
    return s;
}

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["learning-rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["hpm"] = {{"threshold", c.hpm.threshold},
                {"warmup-epochs", c.hpm.warmup_epochs},
                {"min-surviving", c.hpm.min_surviving}};
    j["batch-size"] = c.batch_size;
    j["batches-per-epoch"] = c.batches_per_epoch;
    j["seed"] = c.seed;
    j["flags"] = {{"distillation", c.flags.distillation},
                  {"shared-encoder", c.flags.shared_encoder},
                  {"hpm", c.flags.hpm}};
    j["precision"] = "f32";
    j["checkpoint-every"] = c.checkpoint_every;
    return j;
}

TrainConfig train_config_from_json(const json& j, bool strict) {
    if (strict)
        check_keys(j,
                   {"learning-rate", "epochs", "hpm", "batch-size", "batches-per-epoch", "seed",
                    "flags", "precision", "checkpoint-every"},
                   "train config");
    TrainConfig c;
    read(j, "learning-rate", c.learning_rate);
    read(j, "epochs", c.epochs);
    if (j.contains("hpm")) {
        const json& h = j.at("hpm");
        if (strict) check_keys(h, {"threshold", "warmup-epochs", "min-surviving"}, "hpm config");
        read(h, "threshold", c.hpm.threshold);
        read(h, "warmup-epochs", c.hpm.warmup_epochs);
        read(h, "min-surviving", c.hpm.min_surviving);
    }
    read(j, "batch-size", c.batch_size);
    read(j, "batches-per-epoch", c.batches_per_epoch);
    read(j, "seed", c.seed);
    if (j.contains("flags")) {
        const json& f = j.at("flags");
        if (strict) check_keys(f, {"distillation", "shared-encoder", "hpm"}, "ablation flags");
        read(f, "distillation", c.flags.distillation);
        read(f, "shared-encoder", c.flags.shared_encoder);
        read(f, "hpm", c.flags.hpm);
    }
    if (j.contains("precision")) {
        const std::string p = j.at("precision").get<std::string>();
        if (p != "f32")
            throw std::invalid_argument("config: unsupported precision '" + p +
                                        "' (training runs in f32)");
    }
    read(j, "checkpoint-every", c.checkpoint_every);
    return c;
}

json model_config_to_json(const ModelConfig& c) {
    json j;
    j["encoder"] = {{"input-dim", c.encoder.input_dim},
                    {"hidden", c.encoder.hidden},
                    {"embed-dim", c.encoder.embed_dim}};
    j["attention"] = {{"embed-dim", c.attention.embed_dim}, {"attn-dim", c.attention.attn_dim}};
    j["shared-encoder"] = c.shared_encoder;
    return j;
}

ModelConfig model_config_from_json(const json& j, bool strict) {
    if (strict) check_keys(j, {"encoder", "attention", "shared-encoder"}, "model config");
    ModelConfig c;
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        if (strict) check_keys(e, {"input-dim", "hidden", "embed-dim"}, "encoder config");
        read(e, "input-dim", c.encoder.input_dim);
        read(e, "hidden", c.encoder.hidden);
        read(e, "embed-dim", c.encoder.embed_dim);
    }
    if (j.contains("attention")) {
        const json& a = j.at("attention");
        if (strict) check_keys(a, {"embed-dim", "attn-dim"}, "attention config");
        read(a, "embed-dim", c.attention.embed_dim);
        read(a, "attn-dim", c.attention.attn_dim);
    }
    read(j, "shared-encoder", c.shared_encoder);
    return c;
}

}  // namespace weno
