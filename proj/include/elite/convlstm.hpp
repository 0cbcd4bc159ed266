#pragma once

// Convolutional LSTM layer. The four gate convolutions share one fused
// kernel so a time step is a single convolution pass:
//
//   kernel (k, k, c_hidden + c_in, 4 * c_hidden), input channels ordered
//   [y_{t-1}, x_t], output blocks ordered forget | input | candidate | output.
//
//   fg = sigmoid(z * w_fg + b_fg)      in  = sigmoid(z * w_in + b_in)
//   S~ = tanh(z * w_s + b_s)           out = sigmoid(z * w_out + b_out)
//   S_t = fg . S_{t-1} + in . S~       y_t = out . tanh(S_t)
//
// where "." is the elementwise product.

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "elite/tensor.hpp"

namespace elite::nn {

enum class Gate : std::size_t { forget = 0, input = 1, candidate = 2, output = 3 };
inline constexpr std::array<std::string_view, 4> kGateNames{"fg", "in", "s", "out"};

struct ConvLstmParams {
    std::size_t k = 3;
    std::size_t c_in = 0;
    std::size_t c_hidden = 0;
    Tensor kernel;  ///< (k, k, c_hidden + c_in, 4 * c_hidden)
    Tensor bias;    ///< (4 * c_hidden)

    ConvLstmParams() = default;
    ConvLstmParams(std::size_t k, std::size_t c_in, std::size_t c_hidden);

    void validate() const;

    /// Weight of gate g from input channel `ch` of z = [y, x] to hidden unit o.
    double& weight(Gate g, std::size_t ky, std::size_t kx, std::size_t ch, std::size_t o);
    double& gate_bias(Gate g, std::size_t o);

    bool operator==(const ConvLstmParams&) const = default;
};

struct ConvLstmState {
    Tensor y;  ///< (h, w, c_hidden)
    Tensor S;  ///< (h, w, c_hidden)
};

ConvLstmState zero_state(std::size_t height, std::size_t width, std::size_t c_hidden);

ConvLstmState convlstm_cell_step(const Tensor& x_t, const ConvLstmState& state, const ConvLstmParams& params);

/// Everything the reverse pass needs from one forward call.
struct ConvLstmTape {
    std::size_t epochs = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> input;   ///< (n_t, h, w, c_in)
    std::vector<double> gates;   ///< (n_t, h, w, 4 c_hidden), after activation
    std::vector<double> cell;    ///< (n_t, h, w, c_hidden)
    std::vector<double> hidden;  ///< (n_t, h, w, c_hidden)
};

/// Raw forward over a contiguous (n_t, h, w, c_in) sequence from a zero
/// state. Writes every hidden state to `hidden_all` if non-null and the final
/// one to `hidden_last` if non-null.
void convlstm_forward_raw(const double* sequence, std::size_t epochs, std::size_t height, std::size_t width,
                          const ConvLstmParams& params, ConvLstmTape* tape, double* hidden_all, double* hidden_last);

/// sequence (n_t, h, w, c_in) -> (n_t, h, w, c_hidden) or (h, w, c_hidden).
Tensor convlstm_forward(const Tensor& sequence, const ConvLstmParams& params, bool return_sequences,
                        ConvLstmTape* tape = nullptr);

/// d_hidden: dL/dy_t for every t, (n_t, h, w, c_hidden). Accumulates into
/// d_kernel / d_bias; overwrites d_input (n_t, h, w, c_in) when non-null.
void convlstm_backward(const ConvLstmTape& tape, const ConvLstmParams& params, const double* d_hidden,
                       double* d_input, Tensor& d_kernel, Tensor& d_bias);

}  // namespace elite::nn
