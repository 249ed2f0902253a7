#include "weno/model.hpp"

#include <stdexcept>

namespace weno {

void EncoderConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("encoder: input dimension must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("encoder: embedding dimension must be >= 1");
    for (long h : hidden)
        if (h < 1) throw std::invalid_argument("encoder: hidden widths must be >= 1");
}

std::vector<long> EncoderConfig::layer_sizes() const {
    std::vector<long> sizes;
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(embed_dim);
    return sizes;
}

void AttentionConfig::validate() const {
    if (embed_dim < 1) throw std::invalid_argument("attention: embedding dimension must be >= 1");
    if (attn_dim < 1) throw std::invalid_argument("attention: hidden dimension must be >= 1");
}

void ModelConfig::validate() const {
    encoder.validate();
    attention.validate();
    if (encoder.embed_dim != attention.embed_dim)
        throw std::invalid_argument("model: encoder embedding dimension " +
                                    std::to_string(encoder.embed_dim) +
                                    " does not match attention embedding dimension " +
                                    std::to_string(attention.embed_dim));
}

SharedEncoderHandle make_encoder_handle(bool shared) {
    SharedEncoderHandle h;
    h.shared = shared;
    if (shared) {
        h.teacher_prefix = "encoder";
        h.student_prefix = "encoder";
    } else {
        h.teacher_prefix = "encoder_t";
        h.student_prefix = "encoder_s";
    }
    return h;
}

PoolMode pool_mode_from_string(const std::string& name) {
    if (name == "max") return PoolMode::max;
    if (name == "mean") return PoolMode::mean;
    throw std::invalid_argument("unknown pooling mode: " + name + " (expected max or mean)");
}

}  // namespace weno
