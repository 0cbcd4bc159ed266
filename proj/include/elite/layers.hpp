#pragma once

// Stateless layer kernels with hand-written reverse passes. Spatial tensors
// are (height, width, channels) row-major; "rows" below means a flattened
// (N, C) matrix with channels innermost.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "elite/tensor.hpp"

namespace elite::nn {

inline constexpr double kNormEpsilon = 1e-3;

// --- convolution --------------------------------------------------------------

/// One channel block of a convolution input. Several blocks act as their
/// channel-wise concatenation, in order, without materializing it.
struct ConvInput {
    const double* data = nullptr;
    std::size_t channels = 0;
};

/// out (h*w x c_out) += same-padded cross-correlation of the concatenated
/// inputs with kernel (k, k, sum(channels), c_out). No bias.
void conv2d_accumulate(std::span<const ConvInput> inputs, std::size_t height, std::size_t width, const double* kernel,
                       std::size_t k, std::size_t c_out, double* out);

/// Reverse pass of conv2d_accumulate. d_inputs[i] (may be null) receives
/// += dL/d(inputs[i]); d_kernel (may be null) receives += dL/dkernel.
void conv2d_backward_accumulate(std::span<const ConvInput> inputs, std::size_t height, std::size_t width,
                                const double* kernel, std::size_t k, std::size_t c_out, const double* d_out,
                                std::span<double* const> d_inputs, double* d_kernel);

/// input (h, w, c_in), kernel (k, k, c_in, c_out) with k odd, bias (c_out).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

struct Conv2dGrads {
    Tensor d_input;
    Tensor d_kernel;
    Tensor d_bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& d_out);

// --- elementwise ------------------------------------------------------------------

double sigmoid(double x) noexcept;
/// Vector forms through the exp kernel; agree with the scalar functions to
/// within a few ulps, not bitwise.
void sigmoid_inplace(std::span<double> x) noexcept;
void tanh_inplace(std::span<double> x) noexcept;
void relu_inplace(std::span<double> x) noexcept;
/// d *= (activation > 0), where activation is the relu output.
void relu_backward_inplace(std::span<const double> activation, std::span<double> d) noexcept;

/// Inverted dropout: keeps element i when uniform(seed, stream, i) >= ratio
/// and scales survivors by 1 / (1 - ratio). Writes the applied scale factor
/// (0 or 1 / (1 - ratio)) per element to `mask`.
void dropout_forward(std::span<double> x, double ratio, std::uint64_t seed, std::uint64_t stream,
                     std::span<double> mask) noexcept;

// --- normalization ----------------------------------------------------------------

/// Per-row statistics cached by the forward pass.
struct NormCache {
    std::vector<double> xhat;     ///< normalized input, same layout as x
    std::vector<double> inv_std;  ///< one entry per normalized group
};

/// Normalizes each row of x (rows x channels) over its channels, then
/// y = gamma * xhat + beta. y may alias x.
void layer_norm_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y, NormCache* cache);
void layer_norm_backward(const NormCache& cache, std::size_t channels, std::span<const double> gamma,
                         std::span<const double> d_y, std::span<double> d_x, std::span<double> d_gamma,
                         std::span<double> d_beta);

/// Normalizes each channel over all rows with batch statistics (biased
/// variance) and returns them through batch_mean / batch_var.
void batch_norm_train_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                              std::span<const double> beta, std::span<double> y, NormCache* cache,
                              std::span<double> batch_mean, std::span<double> batch_var);
void batch_norm_eval_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                             std::span<const double> beta, std::span<const double> running_mean,
                             std::span<const double> running_var, std::span<double> y);
void batch_norm_backward(const NormCache& cache, std::size_t channels, std::span<const double> gamma,
                         std::span<const double> d_y, std::span<double> d_x, std::span<double> d_gamma,
                         std::span<double> d_beta);

// --- dense ------------------------------------------------------------------------

/// y (rows x c_out) = x (rows x c_in) * weight (c_in x c_out) + bias.
void dense_forward(std::span<const double> x, std::size_t c_in, const Tensor& weight, const Tensor& bias,
                   std::span<double> y);
/// Accumulates weight/bias gradients; d_x (may be empty) is overwritten.
void dense_backward(std::span<const double> x, std::size_t c_in, const Tensor& weight, std::span<const double> d_y,
                    std::span<double> d_x, Tensor& d_weight, Tensor& d_bias);

}  // namespace elite::nn
