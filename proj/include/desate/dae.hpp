#pragma once
// Denoising autoencoder over length-m windows.
//
//   z     = ReLU(x_corr W^T + b)      W  : [hidden x m]
//   x_hat = z W0^T + b0               W0 : [m x hidden]
//
// Batched ops take windows as rows: x is [n x m], z is [n x hidden].

#include <cstdint>
#include <span>
#include <vector>

#include "desate/noise.hpp"
#include "desate/rng.hpp"
#include "desate/tensor.hpp"

namespace desate {

struct DaeModel {
    std::size_t m = 0;
    std::size_t hidden = 0;
    Tensor W, b, W0, b0;  // b is [1 x hidden], b0 is [1 x m]

    static DaeModel init(std::size_t m, std::size_t hidden, Rng& rng);
    static DaeModel zeros(std::size_t m, std::size_t hidden);

    std::vector<Tensor> parameters() const { return {W, b, W0, b0}; }
    std::vector<Tensor> weight_matrices() const { return {W, W0}; }
    // Throws ContractError when tensor shapes disagree with m and hidden.
    void check() const;
};

Tensor encode(const DaeModel& model, const Tensor& x_corr);
Tensor decode(const DaeModel& model, const Tensor& z);
Tensor reconstruct(const DaeModel& model, const Tensor& x_corr);

std::vector<double> encode(const DaeModel& model, std::span<const double> window);
std::vector<double> decode(const DaeModel& model, std::span<const double> z);

// alpha * (||W||_F^2 + ||W0||_F^2)
Tensor dae_penalty(const DaeModel& model, double alpha);

// Mean over all entries of (target - x_hat)^2 plus dae_penalty. `target` is
// the clean window by default; pass x_corr itself for the literal
// autoencoding objective.
Tensor dae_loss(const DaeModel& model, const Tensor& x_corr, const Tensor& target, double alpha);

struct DaeTrainConfig {
    double alpha = 0.0;
    double lr = 1e-3;
    int epochs = 500;
    std::uint64_t seed = 0;
    std::size_t hidden = 16;
    // Reconstruct the corrupted input instead of the clean window.
    bool literal_target = false;
};

struct DaeTrainResult {
    DaeModel model;
    std::vector<double> loss_curve;  // one value per epoch, before its update
};

// Full-batch Adam on clean windows [n x m]. Every epoch draws a fresh
// corruption with a seed derived from (noise.seed, cfg.seed, epoch).
// Throws TrainingDiverged on a non-finite loss.
DaeTrainResult train_dae(const Tensor& clean_windows, const NoiseSpec& noise, const DaeTrainConfig& cfg);

}  // namespace desate
