#pragma once

// The CIPS segmentation network:
//
//   ConvLSTM(f -> c, sequences) -> layer norm -> relu
//   -> ConvLSTM(c -> c, last state) -> batch norm -> relu
//   -> [conv(c -> c) -> batch norm -> relu] x 2
//   -> dropout (train only) -> dense(c -> 1) per pixel -> sigmoid

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elite/convlstm.hpp"
#include "elite/layers.hpp"
#include "elite/tensor.hpp"

namespace elite::nn {

struct CipsConfig {
    std::size_t features = 2;
    std::size_t kernel = 3;
    std::size_t hidden = 16;
    double dropout = 0.2;

    void validate() const;
    bool operator==(const CipsConfig&) const = default;
};

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    bool initialized = false;  ///< running statistics seen at least one training batch

    explicit BatchNormParams(std::size_t channels = 0);
    bool operator==(const BatchNormParams&) const = default;
};

inline constexpr double kBatchNormMomentum = 0.9;

struct CipsModel {
    CipsConfig config;
    ConvLstmParams lstm1;
    Tensor ln_gamma, ln_beta;
    ConvLstmParams lstm2;
    BatchNormParams bn1;
    Tensor conv1_w, conv1_b;
    BatchNormParams bn2;
    Tensor conv2_w, conv2_b;
    BatchNormParams bn3;
    Tensor dense_w, dense_b;

    CipsModel() = default;
    /// Zero-initialized parameters with the shapes implied by config.
    explicit CipsModel(const CipsConfig& config);

    /// Trainable tensors in a fixed order (the checkpoint and optimizer order).
    std::vector<Tensor*> trainable();
    std::vector<const Tensor*> trainable() const;
    std::vector<std::string> trainable_names() const;
    /// Batch-norm running mean / variance tensors, bn1..bn3.
    std::vector<Tensor*> running();
    std::vector<const Tensor*> running() const;
    std::array<BatchNormParams*, 3> batch_norms() { return {&bn1, &bn2, &bn3}; }
    std::array<const BatchNormParams*, 3> batch_norms() const { return {&bn1, &bn2, &bn3}; }

    void validate() const;
    bool operator==(const CipsModel&) const = default;
};

/// Glorot-uniform kernels, zero biases, forget-gate bias 1, unit norm scales.
/// Tensor i in trainable() order draws from its own stream of `seed`.
CipsModel init_params(const CipsConfig& config, std::uint64_t seed);

struct ParamCount {
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};
std::size_t convlstm_param_count(std::size_t k, std::size_t c_in, std::size_t c_hidden) noexcept;
std::size_t conv_param_count(std::size_t k, std::size_t c_in, std::size_t c_out) noexcept;
ParamCount param_count(const CipsConfig& config);

/// Gradient buffers aligned with CipsModel::trainable().
std::vector<Tensor> zero_gradients(const CipsModel& model);

enum class Mode { train, eval };

/// Borrowed view of (samples, epochs, height, width, features) data.
struct BatchView {
    const double* data = nullptr;
    std::size_t samples = 0;
    std::size_t epochs = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t features = 0;

    std::size_t pixels() const noexcept { return height * width; }
    std::size_t sample_stride() const noexcept { return epochs * pixels() * features; }
};

/// Intermediate values recorded by a train-mode forward pass. A tape can be
/// reused across steps; entries past `samples` are stale capacity.
struct CipsTape {
    bool recorded = false;
    std::size_t samples = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<ConvLstmTape> lstm1;  ///< per sample
    std::vector<NormCache> ln;        ///< per sample
    std::vector<ConvLstmTape> lstm2;  ///< per sample; its input is the relu'd layer-norm output
    std::array<NormCache, 3> bn;
    std::array<std::vector<double>, 3> bn_relu;  ///< post-relu activations, batch-major
    std::array<std::vector<double>, 3> batch_mean;
    std::array<std::vector<double>, 3> batch_var;
    std::vector<double> dropout_mask;
    std::vector<double> dense_in;
    std::vector<double> prob;
};

/// Returns probabilities (samples, height, width, 1). Train mode uses batch
/// statistics and dropout keyed by (seed, sample index) and records into
/// `tape` when given; eval mode throws UsageError if any running statistic
/// is uninitialized.
Tensor cips_forward(const BatchView& batch, const CipsModel& model, Mode mode, std::uint64_t seed,
                    CipsTape* tape = nullptr);

/// Folds the batch statistics from a train-mode tape into the running
/// averages (running = momentum * running + (1 - momentum) * batch).
void update_running_stats(CipsModel& model, const CipsTape& tape);

/// d_prob: dL/dprob, (samples, height, width). Accumulates into grads
/// (aligned with trainable()). Per-sample contributions are summed in sample
/// order so the result does not depend on the worker count.
void cips_backward(const CipsTape& tape, const CipsModel& model, std::span<const double> d_prob,
                   std::vector<Tensor>& grads);

}  // namespace elite::nn
