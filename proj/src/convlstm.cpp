#include "elite/convlstm.hpp"

#include <algorithm>
#include <cmath>

#include "elite/errors.hpp"
#include "elite/kernels.hpp"
#include "elite/layers.hpp"

namespace elite::nn {

ConvLstmParams::ConvLstmParams(std::size_t k_, std::size_t c_in_, std::size_t c_hidden_)
    : k(k_),
      c_in(c_in_),
      c_hidden(c_hidden_),
      kernel({k_, k_, c_hidden_ + c_in_, 4 * c_hidden_}),
      bias({4 * c_hidden_}) {
    validate();
}

void ConvLstmParams::validate() const {
    if (k == 0 || k % 2 == 0) throw InvalidArgument("ConvLSTM kernel size must be odd");
    if (c_in == 0 || c_hidden == 0) throw InvalidArgument("ConvLSTM channel counts must be positive");
    require_shape(kernel, {k, k, c_hidden + c_in, 4 * c_hidden}, "ConvLSTM kernel");
    require_shape(bias, {4 * c_hidden}, "ConvLSTM bias");
}

double& ConvLstmParams::weight(Gate g, std::size_t ky, std::size_t kx, std::size_t ch, std::size_t o) {
    return kernel.at({ky, kx, ch, static_cast<std::size_t>(g) * c_hidden + o});
}

double& ConvLstmParams::gate_bias(Gate g, std::size_t o) {
    return bias.at({static_cast<std::size_t>(g) * c_hidden + o});
}

ConvLstmState zero_state(std::size_t height, std::size_t width, std::size_t c_hidden) {
    return {Tensor({height, width, c_hidden}), Tensor({height, width, c_hidden})};
}

namespace {

// Pre-activations for one step: bias + conv([y_prev, x], kernel).
void gate_preactivations(const double* y_prev, const double* x, std::size_t height, std::size_t width,
                         const ConvLstmParams& p, double* pre) {
    const std::size_t g4 = 4 * p.c_hidden;
    for (std::size_t px = 0; px < height * width; ++px) std::copy_n(p.bias.data(), g4, pre + px * g4);
    const ConvInput inputs[2] = {{y_prev, p.c_hidden}, {x, p.c_in}};
    conv2d_accumulate(inputs, height, width, p.kernel.data(), p.k, g4, pre);
}

// Activates gates in place and advances the cell. `scratch` holds one
// hidden plane.
void gate_update(std::size_t pixels, std::size_t ch, double* gates, const double* s_prev, double* s_out,
                 double* y_out, double* scratch) {
    const std::size_t g4 = 4 * ch;
    // One exp pass: sigmoid(x) = 1 / (1 + e^-x), tanh(x) = 2 / (1 + e^-2x) - 1.
    for (std::size_t px = 0; px < pixels; ++px) {
        double* g = gates + px * g4;
        for (std::size_t c = 0; c < 2 * ch; ++c) g[c] = -g[c];
        for (std::size_t c = 2 * ch; c < 3 * ch; ++c) g[c] *= -2.0;
        for (std::size_t c = 3 * ch; c < g4; ++c) g[c] = -g[c];
    }
    kernels::exp_inplace(pixels * g4, gates);
    for (std::size_t px = 0; px < pixels; ++px) {
        double* g = gates + px * g4;
        for (std::size_t c = 0; c < 2 * ch; ++c) g[c] = 1.0 / (1.0 + g[c]);
        for (std::size_t c = 2 * ch; c < 3 * ch; ++c) g[c] = 2.0 / (1.0 + g[c]) - 1.0;
        for (std::size_t c = 3 * ch; c < g4; ++c) g[c] = 1.0 / (1.0 + g[c]);
        const double* sp = s_prev + px * ch;
        double* so = s_out + px * ch;
        for (std::size_t c = 0; c < ch; ++c) so[c] = g[c] * sp[c] + g[ch + c] * g[2 * ch + c];
    }
    std::copy_n(s_out, pixels * ch, scratch);
    tanh_inplace({scratch, pixels * ch});
    for (std::size_t px = 0; px < pixels; ++px) {
        const double* g = gates + px * g4;
        for (std::size_t c = 0; c < ch; ++c) y_out[px * ch + c] = g[3 * ch + c] * scratch[px * ch + c];
    }
}

}  // namespace

ConvLstmState convlstm_cell_step(const Tensor& x_t, const ConvLstmState& state, const ConvLstmParams& params) {
    params.validate();
    if (x_t.rank() != 3 || x_t.extent(2) != params.c_in) throw ShapeError("ConvLSTM input must be (h, w, c_in)");
    const std::size_t h = x_t.extent(0), w = x_t.extent(1), ch = params.c_hidden;
    require_shape(state.y, {h, w, ch}, "ConvLSTM hidden state");
    require_shape(state.S, {h, w, ch}, "ConvLSTM cell state");
    std::vector<double> gates(h * w * 4 * ch);
    gate_preactivations(state.y.data(), x_t.data(), h, w, params, gates.data());
    ConvLstmState next = zero_state(h, w, ch);
    std::vector<double> scratch(h * w * ch);
    gate_update(h * w, ch, gates.data(), state.S.data(), next.S.data(), next.y.data(), scratch.data());
    return next;
}

void convlstm_forward_raw(const double* sequence, std::size_t epochs, std::size_t height, std::size_t width,
                          const ConvLstmParams& params, ConvLstmTape* tape, double* hidden_all, double* hidden_last) {
    if (epochs == 0) throw InvalidArgument("ConvLSTM needs at least one time step");
    const std::size_t pixels = height * width;
    const std::size_t ch = params.c_hidden;
    const std::size_t plane_in = pixels * params.c_in;
    const std::size_t plane_h = pixels * ch;
    const std::size_t plane_g = pixels * 4 * ch;

    if (tape) {
        tape->epochs = epochs;
        tape->height = height;
        tape->width = width;
        tape->input.assign(sequence, sequence + epochs * plane_in);
        tape->gates.resize(epochs * plane_g);
        tape->cell.resize(epochs * plane_h);
        tape->hidden.resize(epochs * plane_h);
    }
    std::vector<double> scratch_g(tape ? 0 : plane_g);
    std::vector<double> ring_s(tape ? 0 : 2 * plane_h, 0.0);
    std::vector<double> ring_y(tape ? 0 : 2 * plane_h, 0.0);
    const std::vector<double> zeros(plane_h, 0.0);
    std::vector<double> scratch(plane_h);

    const double* y_prev = zeros.data();
    const double* s_prev = zeros.data();
    for (std::size_t t = 0; t < epochs; ++t) {
        double* g = tape ? tape->gates.data() + t * plane_g : scratch_g.data();
        double* s = tape ? tape->cell.data() + t * plane_h : ring_s.data() + (t % 2) * plane_h;
        double* y = tape ? tape->hidden.data() + t * plane_h : ring_y.data() + (t % 2) * plane_h;
        gate_preactivations(y_prev, sequence + t * plane_in, height, width, params, g);
        gate_update(pixels, ch, g, s_prev, s, y, scratch.data());
        if (hidden_all) std::copy_n(y, plane_h, hidden_all + t * plane_h);
        y_prev = y;
        s_prev = s;
    }
    if (hidden_last) std::copy_n(y_prev, plane_h, hidden_last);
}

Tensor convlstm_forward(const Tensor& sequence, const ConvLstmParams& params, bool return_sequences,
                        ConvLstmTape* tape) {
    params.validate();
    if (sequence.rank() != 4 || sequence.extent(3) != params.c_in) {
        throw ShapeError("ConvLSTM sequence must be (n_t, h, w, c_in)");
    }
    const std::size_t n_t = sequence.extent(0), h = sequence.extent(1), w = sequence.extent(2);
    if (return_sequences) {
        Tensor out({n_t, h, w, params.c_hidden});
        convlstm_forward_raw(sequence.data(), n_t, h, w, params, tape, out.data(), nullptr);
        return out;
    }
    Tensor out({h, w, params.c_hidden});
    convlstm_forward_raw(sequence.data(), n_t, h, w, params, tape, nullptr, out.data());
    return out;
}

void convlstm_backward(const ConvLstmTape& tape, const ConvLstmParams& params, const double* d_hidden,
                       double* d_input, Tensor& d_kernel, Tensor& d_bias) {
    if (tape.epochs == 0 || tape.gates.empty()) throw UsageError("ConvLSTM backward without a recorded forward pass");
    require_shape(d_kernel, params.kernel.shape(), "ConvLSTM kernel gradient");
    require_shape(d_bias, params.bias.shape(), "ConvLSTM bias gradient");
    const std::size_t h = tape.height, w = tape.width, pixels = h * w;
    const std::size_t ch = params.c_hidden, g4 = 4 * ch;
    const std::size_t plane_in = pixels * params.c_in;
    const std::size_t plane_h = pixels * ch;
    const std::size_t plane_g = pixels * g4;

    const std::vector<double> zeros(plane_h, 0.0);
    std::vector<double> dy_rec(plane_h, 0.0);    // dL/dy_t arriving through step t+1
    std::vector<double> dy_next(plane_h, 0.0);
    std::vector<double> ds_carry(plane_h, 0.0);  // dL/dS_t arriving through step t+1
    std::vector<double> d_pre(plane_g);
    std::vector<double> tanh_s(plane_h);
    if (d_input) std::fill_n(d_input, tape.epochs * plane_in, 0.0);

    for (std::size_t t = tape.epochs; t-- > 0;) {
        const double* g = tape.gates.data() + t * plane_g;
        const double* s = tape.cell.data() + t * plane_h;
        const double* s_prev = t ? tape.cell.data() + (t - 1) * plane_h : zeros.data();
        const double* dh = d_hidden + t * plane_h;
        std::copy_n(s, plane_h, tanh_s.data());
        tanh_inplace(tanh_s);
        for (std::size_t px = 0; px < pixels; ++px) {
            const double* gp = g + px * g4;
            double* dp = d_pre.data() + px * g4;
            for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t i = px * ch + c;
                const double fg = gp[c], in = gp[ch + c], cand = gp[2 * ch + c], out = gp[3 * ch + c];
                const double dy = dh[i] + dy_rec[i];
                const double ts = tanh_s[i];
                const double ds = ds_carry[i] + dy * out * (1.0 - ts * ts);
                dp[3 * ch + c] = dy * ts * out * (1.0 - out);
                dp[c] = ds * s_prev[i] * fg * (1.0 - fg);
                dp[ch + c] = ds * cand * in * (1.0 - in);
                dp[2 * ch + c] = ds * in * (1.0 - cand * cand);
                ds_carry[i] = ds * fg;
            }
        }
        for (std::size_t px = 0; px < pixels; ++px) {
            for (std::size_t o = 0; o < g4; ++o) d_bias[o] += d_pre[px * g4 + o];
        }
        const double* y_prev = t ? tape.hidden.data() + (t - 1) * plane_h : zeros.data();
        const ConvInput inputs[2] = {{y_prev, ch}, {tape.input.data() + t * plane_in, params.c_in}};
        std::fill(dy_next.begin(), dy_next.end(), 0.0);
        double* const d_inputs[2] = {t ? dy_next.data() : nullptr, d_input ? d_input + t * plane_in : nullptr};
        conv2d_backward_accumulate(inputs, h, w, params.kernel.data(), params.k, g4, d_pre.data(), d_inputs,
                                   d_kernel.data());
        std::swap(dy_rec, dy_next);
    }
}

}  // namespace elite::nn
