#pragma once

// Checkpoint file: one JSON header line (format version, config, tensor
// names and shapes, training metadata) followed by float64 little-endian
// payload in header order: trainable tensors, running statistics, then the
// optimizer's first and second moments when present.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elite/cips.hpp"

namespace elite::nn {

inline constexpr int kCheckpointVersion = 1;

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<Tensor> m;  ///< aligned with CipsModel::trainable()
    std::vector<Tensor> v;

    bool operator==(const OptimizerState&) const = default;
};

struct Checkpoint {
    CipsModel model;
    std::string feature_mode = "cos_sin";
    std::size_t time_steps = 0;  ///< epochs per sample the model was trained on
    std::optional<OptimizerState> optimizer;

    bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace elite::nn
