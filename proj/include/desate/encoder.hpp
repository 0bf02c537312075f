#pragma once
// Transformer encoder regressing the next normalized capacity from a window.
//
// Inputs are batches of scalar sequences [batch x len]. Each scalar is lifted
// to d_model by a learned 1 -> d_model map, sinusoidal positions are added,
// and the sequence runs through `layers` post-norm blocks of multi-head
// self-attention and a position-wise FFN. A linear head reads the last
// position. Row-vector convention throughout: projections are x * W.

#include <cstddef>
#include <vector>

#include "desate/rng.hpp"
#include "desate/tensor.hpp"

namespace desate {

struct EncoderConfig {
    std::size_t d_model = 16;
    std::size_t heads = 2;
    std::size_t layers = 1;
    std::size_t ffn_hidden = 16;
    double dropout = 0.0;
    std::size_t max_len = 16;
    bool positional_encoding = true;
    // Residual connection + layer norm around both sublayers.
    bool residual_norm = true;

    // Throws ConfigError on inconsistent sizes.
    void validate() const;
};

// [max_len x d_model]; column 2k holds sin(pos / 10000^(2k/d)), 2k+1 the cos.
Tensor positional_encoding(std::size_t max_len, std::size_t d_model);

struct EncoderLayer {
    Tensor Wq, Wk, Wv, Wo;  // [d x d]; head h owns columns [h*d/heads, (h+1)*d/heads)
    Tensor ln1_gain, ln1_bias;
    Tensor W1, b1, W2, b2;  // [d x f], [1 x f], [f x d], [1 x d]
    Tensor ln2_gain, ln2_bias;
};

struct EncoderModel {
    EncoderConfig cfg;
    Tensor embed_w, embed_b;  // [1 x d]
    Tensor pe;                // [max_len x d], constant
    std::vector<EncoderLayer> layers;
    Tensor readout_w;  // [d x 1]
    Tensor readout_b;  // [1 x 1]

    static EncoderModel init(const EncoderConfig& cfg, Rng& rng);

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> weight_matrices() const;
};

// Concat(head_1..head_h) * W^O over blocks of `block_len` rows of x.
Tensor multi_head_core(const Tensor& x, const EncoderLayer& layer, std::size_t heads, std::size_t block_len);
// Attention sublayer, including residual + norm when enabled.
Tensor multi_head(const Tensor& x, const EncoderLayer& layer, const EncoderConfig& cfg, std::size_t block_len,
                  Rng* dropout_rng = nullptr);

// ReLU(x W1 + b1) W2 + b2
Tensor ffn_core(const Tensor& x, const Tensor& W1, const Tensor& b1, const Tensor& W2, const Tensor& b2);
// FFN sublayer, including residual + norm when enabled.
Tensor ffn(const Tensor& x, const EncoderLayer& layer, const EncoderConfig& cfg, Rng* dropout_rng = nullptr);

// Hidden states [batch*len x d] after the last layer.
Tensor encode_sequence(const EncoderModel& model, const Tensor& inputs, Rng* dropout_rng = nullptr);
// One-step-ahead predictions [batch x 1]. Dropout is applied only when a
// generator is supplied.
Tensor forward(const EncoderModel& model, const Tensor& inputs, Rng* dropout_rng = nullptr);

}  // namespace desate
