#include "desate/dae.hpp"

#include <cmath>

#include "desate/error.hpp"
#include "desate/optim.hpp"

namespace desate {

DaeModel DaeModel::init(std::size_t m, std::size_t hidden, Rng& rng) {
    if (m == 0 || hidden == 0) throw ConfigError("dae: window length and hidden size must be positive");
    DaeModel d;
    d.m = m;
    d.hidden = hidden;
    d.W = Tensor::parameter(hidden, m, m, rng);
    d.b = Tensor::parameter(1, hidden, m, rng);
    d.W0 = Tensor::parameter(m, hidden, hidden, rng);
    d.b0 = Tensor::parameter(1, m, hidden, rng);
    return d;
}

DaeModel DaeModel::zeros(std::size_t m, std::size_t hidden) {
    DaeModel d;
    d.m = m;
    d.hidden = hidden;
    d.W = Tensor::zeros(hidden, m, true);
    d.b = Tensor::zeros(1, hidden, true);
    d.W0 = Tensor::zeros(m, hidden, true);
    d.b0 = Tensor::zeros(1, m, true);
    return d;
}

void DaeModel::check() const {
    auto expect = [](const Tensor& t, std::size_t r, std::size_t c, const char* name) {
        if (!t.defined() || t.rows() != r || t.cols() != c)
            throw ContractError(std::string("dae: parameter ") + name + " should be [" + std::to_string(r) +
                                " x " + std::to_string(c) + "]" +
                                (t.defined() ? ", got " + t.shape().str() : ", missing"));
    };
    expect(W, hidden, m, "W");
    expect(b, 1, hidden, "b");
    expect(W0, m, hidden, "W0");
    expect(b0, 1, m, "b0");
}

Tensor encode(const DaeModel& model, const Tensor& x_corr) {
    if (x_corr.cols() != model.m)
        throw ContractError("dae encode: window length " + std::to_string(x_corr.cols()) + " != m = " +
                            std::to_string(model.m));
    return relu(add_row(matmul(x_corr, transpose(model.W)), model.b));
}

Tensor decode(const DaeModel& model, const Tensor& z) {
    if (z.cols() != model.hidden)
        throw ContractError("dae decode: latent length " + std::to_string(z.cols()) + " != hidden = " +
                            std::to_string(model.hidden));
    return add_row(matmul(z, transpose(model.W0)), model.b0);
}

Tensor reconstruct(const DaeModel& model, const Tensor& x_corr) { return decode(model, encode(model, x_corr)); }

std::vector<double> encode(const DaeModel& model, std::span<const double> window) {
    Tensor z = encode(model, Tensor::from(1, window.size(), {window.begin(), window.end()}));
    return {z.values().begin(), z.values().end()};
}

std::vector<double> decode(const DaeModel& model, std::span<const double> z) {
    Tensor x = decode(model, Tensor::from(1, z.size(), {z.begin(), z.end()}));
    return {x.values().begin(), x.values().end()};
}

Tensor dae_penalty(const DaeModel& model, double alpha) {
    return scale(add(sum_squares(model.W), sum_squares(model.W0)), alpha);
}

Tensor dae_loss(const DaeModel& model, const Tensor& x_corr, const Tensor& target, double alpha) {
    if (target.rows() != x_corr.rows() || target.cols() != x_corr.cols())
        throw DimensionError("dae_loss: target " + target.shape().str() + " vs input " + x_corr.shape().str());
    Tensor residual = sub(target, reconstruct(model, x_corr));
    return add(mean(square(residual)), dae_penalty(model, alpha));
}

DaeTrainResult train_dae(const Tensor& clean_windows, const NoiseSpec& noise, const DaeTrainConfig& cfg) {
    if (clean_windows.rows() == 0) throw ContractError("train_dae: no windows");
    if (cfg.epochs < 1) throw ConfigError("train_dae: epochs must be >= 1");
    if (!(cfg.lr > 0.0)) throw ConfigError("train_dae: lr must be positive");
    if (!(cfg.alpha >= 0.0)) throw ConfigError("train_dae: alpha must be nonnegative");
    noise.validate();

    Rng init_rng(derive_seed(cfg.seed, 1));
    DaeTrainResult result{DaeModel::init(clean_windows.cols(), cfg.hidden, init_rng), {}};
    Adam opt(result.model.parameters(), AdamConfig{.lr = cfg.lr});
    const Tensor clean = clean_windows.detach();
    const std::uint64_t noise_stream = derive_seed(cfg.seed, noise.seed);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const NoiseSpec draw = noise.with_seed(derive_seed(noise_stream, static_cast<std::uint64_t>(epoch)));
        Tensor x_corr = Tensor::from(clean.rows(), clean.cols(), corrupt(clean.values(), draw));
        opt.zero_grad();
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = dae_loss(result.model, x_corr, cfg.literal_target ? x_corr : clean, cfg.alpha);
        const double value = loss.item();
        if (!std::isfinite(value))
            throw TrainingDiverged("train_dae: non-finite loss at epoch " + std::to_string(epoch), epoch);
        result.loss_curve.push_back(value);
        tape.backward(loss);
        opt.step();
    }
    return result;
}

}  // namespace desate
