#include "desate/encoder.hpp"

#include <cmath>
#include <string>

#include "desate/error.hpp"

namespace desate {

void EncoderConfig::validate() const {
    if (d_model == 0 || heads == 0 || layers == 0 || ffn_hidden == 0 || max_len == 0)
        throw ConfigError("encoder: d_model, heads, layers, ffn_hidden and max_len must be positive");
    if (d_model % heads != 0)
        throw ConfigError("encoder: d_model " + std::to_string(d_model) + " is not divisible by " +
                          std::to_string(heads) + " heads");
    if (positional_encoding && d_model % 2 != 0)
        throw ConfigError("encoder: positional encoding needs an even d_model, got " + std::to_string(d_model));
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must lie in [0, 1)");
}

Tensor positional_encoding(std::size_t max_len, std::size_t d_model) {
    if (max_len == 0) throw ConfigError("positional_encoding: max_len must be >= 1");
    if (d_model < 2 || d_model % 2 != 0)
        throw ConfigError("positional_encoding: d_model must be even and >= 2, got " + std::to_string(d_model));
    std::vector<double> table(max_len * d_model);
    for (std::size_t pos = 0; pos < max_len; ++pos) {
        for (std::size_t k = 0; 2 * k < d_model; ++k) {
            const double angle = static_cast<double>(pos) /
                                 std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(d_model));
            table[pos * d_model + 2 * k] = std::sin(angle);
            table[pos * d_model + 2 * k + 1] = std::cos(angle);
        }
    }
    return Tensor::from(max_len, d_model, std::move(table));
}

EncoderModel EncoderModel::init(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.d_model, f = cfg.ffn_hidden;
    EncoderModel m;
    m.cfg = cfg;
    m.embed_w = Tensor::parameter(1, d, 1, rng);
    m.embed_b = Tensor::parameter(1, d, 1, rng);
    if (cfg.positional_encoding) m.pe = positional_encoding(cfg.max_len, d);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        EncoderLayer layer;
        layer.Wq = Tensor::parameter(d, d, d, rng);
        layer.Wk = Tensor::parameter(d, d, d, rng);
        layer.Wv = Tensor::parameter(d, d, d, rng);
        layer.Wo = Tensor::parameter(d, d, d, rng);
        layer.ln1_gain = Tensor::filled(1, d, 1.0, true);
        layer.ln1_bias = Tensor::zeros(1, d, true);
        layer.W1 = Tensor::parameter(d, f, d, rng);
        layer.b1 = Tensor::parameter(1, f, d, rng);
        layer.W2 = Tensor::parameter(f, d, f, rng);
        layer.b2 = Tensor::parameter(1, d, f, rng);
        layer.ln2_gain = Tensor::filled(1, d, 1.0, true);
        layer.ln2_bias = Tensor::zeros(1, d, true);
        m.layers.push_back(std::move(layer));
    }
    m.readout_w = Tensor::parameter(d, 1, d, rng);
    m.readout_b = Tensor::parameter(1, 1, d, rng);
    return m;
}

std::vector<Tensor> EncoderModel::parameters() const {
    std::vector<Tensor> p{embed_w, embed_b};
    for (const auto& l : layers) {
        p.insert(p.end(), {l.Wq, l.Wk, l.Wv, l.Wo, l.W1, l.b1, l.W2, l.b2});
        if (cfg.residual_norm) p.insert(p.end(), {l.ln1_gain, l.ln1_bias, l.ln2_gain, l.ln2_bias});
    }
    p.insert(p.end(), {readout_w, readout_b});
    return p;
}

std::vector<Tensor> EncoderModel::weight_matrices() const {
    std::vector<Tensor> w{embed_w};
    for (const auto& l : layers) w.insert(w.end(), {l.Wq, l.Wk, l.Wv, l.Wo, l.W1, l.W2});
    w.push_back(readout_w);
    return w;
}

Tensor multi_head_core(const Tensor& x, const EncoderLayer& layer, std::size_t heads, std::size_t block_len) {
    Tensor q = matmul(x, layer.Wq);
    Tensor k = matmul(x, layer.Wk);
    Tensor v = matmul(x, layer.Wv);
    return matmul(block_attention(q, k, v, block_len, heads), layer.Wo);
}

Tensor multi_head(const Tensor& x, const EncoderLayer& layer, const EncoderConfig& cfg, std::size_t block_len,
                  Rng* dropout_rng) {
    Tensor out = multi_head_core(x, layer, cfg.heads, block_len);
    if (dropout_rng && cfg.dropout > 0.0) out = dropout(out, cfg.dropout, *dropout_rng);
    if (!cfg.residual_norm) return out;
    return layer_norm_rows(add(x, out), layer.ln1_gain, layer.ln1_bias);
}

Tensor ffn_core(const Tensor& x, const Tensor& W1, const Tensor& b1, const Tensor& W2, const Tensor& b2) {
    if (x.cols() != W1.rows() || b1.cols() != W1.cols() || W2.rows() != W1.cols() || b2.cols() != W2.cols())
        throw ContractError("ffn: shapes do not conform: x " + x.shape().str() + ", W1 " + W1.shape().str() +
                            ", b1 " + b1.shape().str() + ", W2 " + W2.shape().str() + ", b2 " + b2.shape().str());
    return add_row(matmul(relu(add_row(matmul(x, W1), b1)), W2), b2);
}

Tensor ffn(const Tensor& x, const EncoderLayer& layer, const EncoderConfig& cfg, Rng* dropout_rng) {
    Tensor out = ffn_core(x, layer.W1, layer.b1, layer.W2, layer.b2);
    if (dropout_rng && cfg.dropout > 0.0) out = dropout(out, cfg.dropout, *dropout_rng);
    if (!cfg.residual_norm) return out;
    return layer_norm_rows(add(x, out), layer.ln2_gain, layer.ln2_bias);
}

Tensor encode_sequence(const EncoderModel& model, const Tensor& inputs, Rng* dropout_rng) {
    const std::size_t batch = inputs.rows(), len = inputs.cols(), d = model.cfg.d_model;
    if (len == 0 || len > model.cfg.max_len)
        throw ContractError("encoder: sequence length " + std::to_string(len) + " outside 1.." +
                            std::to_string(model.cfg.max_len));
    Tensor h = add_row(matmul(reshape(inputs, batch * len, 1), model.embed_w), model.embed_b);
    if (model.cfg.positional_encoding) {
        Tensor pe = reshape(slice_rows(model.pe, 0, len), 1, len * d);
        h = reshape(add_row(reshape(h, batch, len * d), pe), batch * len, d);
    }
    for (const auto& layer : model.layers) {
        h = multi_head(h, layer, model.cfg, len, dropout_rng);
        h = ffn(h, layer, model.cfg, dropout_rng);
    }
    return h;
}

Tensor forward(const EncoderModel& model, const Tensor& inputs, Rng* dropout_rng) {
    Tensor h = encode_sequence(model, inputs, dropout_rng);
    const std::size_t batch = inputs.rows(), len = inputs.cols();
    std::vector<std::size_t> last(batch);
    for (std::size_t b = 0; b < batch; ++b) last[b] = b * len + len - 1;
    return add_row(matmul(select_rows(h, last), model.readout_w), model.readout_b);
}

}  // namespace desate
