#pragma once
// JSON forms of configs and trained branches.
//
// Checkpoint layout (format "desate-checkpoint", version 1):
//   {
//     "format": "desate-checkpoint", "version": 1,
//     "branch": { ...BranchConfig... },
//     "tensors": { "<name>": {"shape": [rows, cols], "values": [...]}, ... },
//     "loss_curve": [...]
//   }
// Tensor names: dae.W, dae.b, dae.W0, dae.b0, encoder.embed_w, encoder.embed_b,
// encoder.layer<i>.<Wq|Wk|Wv|Wo|W1|b1|W2|b2|ln1_gain|ln1_bias|ln2_gain|ln2_bias>,
// encoder.readout_w, encoder.readout_b. Doubles are written with round-trip
// precision, so a reload reproduces predictions bit for bit.
//
// Readers reject unknown keys with ConfigError so typos in run configs fail
// loudly instead of silently falling back to defaults.

#include <filesystem>

#include <json.hpp>

#include "desate/pipeline.hpp"

namespace desate {

using Json = nlohmann::json;

Json to_json(const NoiseSpec& s);
Json to_json(const WaveletConfig& c);
Json to_json(const EncoderConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const BranchConfig& b);
Json to_json(const GridSpec& g);

// Each reader starts from `defaults` and overwrites the keys present.
NoiseSpec noise_from_json(const Json& j, const NoiseSpec& defaults = {});
WaveletConfig wavelet_from_json(const Json& j, const WaveletConfig& defaults = {});
EncoderConfig encoder_from_json(const Json& j, const EncoderConfig& defaults = {});
TrainConfig train_from_json(const Json& j, const TrainConfig& defaults = {});
BranchConfig branch_from_json(const Json& j, const BranchConfig& defaults = {});
GridSpec grid_from_json(const Json& j, const GridSpec& defaults = {});

Json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const Json& j, bool requires_grad = true);

Json checkpoint_to_json(const TrainedBranch& b);
TrainedBranch checkpoint_from_json(const Json& j);
void save_checkpoint(const TrainedBranch& b, const std::filesystem::path& path);
// Missing file -> ConfigError naming the path; malformed content -> ConfigError.
TrainedBranch load_checkpoint(const std::filesystem::path& path);

// Throws ConfigError when `j` is not an object or has keys outside `allowed`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where);

}  // namespace desate
