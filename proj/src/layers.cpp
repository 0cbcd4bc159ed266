#include "elite/layers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "elite/errors.hpp"
#include "elite/kernels.hpp"
#include "elite/rng.hpp"

namespace elite::nn {

namespace {

std::size_t total_channels(std::span<const ConvInput> inputs) {
    std::size_t c = 0;
    for (const auto& in : inputs) c += in.channels;
    return c;
}

// Row r of the im2col matrix: cols[c][(dy*k + dx)*c_total + ch], zero outside
// the image. Every entry is written exactly once.
void im2col_row(std::span<const ConvInput> inputs, std::size_t c_total, std::size_t height, std::size_t width,
                std::size_t k, std::size_t r, double* cols) {
    const std::size_t pad = k / 2;
    const std::size_t row_len = k * k * c_total;
    for (std::size_t c = 0; c < width; ++c) {
        double* dst = cols + c * row_len;
        for (std::size_t dy = 0; dy < k; ++dy) {
            const auto src_r = static_cast<std::ptrdiff_t>(r + dy) - static_cast<std::ptrdiff_t>(pad);
            const bool row_in = src_r >= 0 && src_r < static_cast<std::ptrdiff_t>(height);
            for (std::size_t dx = 0; dx < k; ++dx) {
                double* tap = dst + (dy * k + dx) * c_total;
                const auto src_c = static_cast<std::ptrdiff_t>(c + dx) - static_cast<std::ptrdiff_t>(pad);
                if (!row_in || src_c < 0 || src_c >= static_cast<std::ptrdiff_t>(width)) {
                    std::fill_n(tap, c_total, 0.0);
                    continue;
                }
                const std::size_t src_px = static_cast<std::size_t>(src_r) * width + static_cast<std::size_t>(src_c);
                for (const auto& in : inputs) {
                    std::copy_n(in.data + src_px * in.channels, in.channels, tap);
                    tap += in.channels;
                }
            }
        }
    }
}

void col2im_row_add(std::span<double* const> d_inputs, std::span<const ConvInput> inputs, std::size_t c_total,
                    std::size_t height, std::size_t width, std::size_t k, std::size_t r, const double* cols) {
    const std::size_t pad = k / 2;
    const std::size_t row_len = k * k * c_total;
    for (std::size_t dy = 0; dy < k; ++dy) {
        const auto src_r = static_cast<std::ptrdiff_t>(r + dy) - static_cast<std::ptrdiff_t>(pad);
        if (src_r < 0 || src_r >= static_cast<std::ptrdiff_t>(height)) continue;
        for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t tap = (dy * k + dx) * c_total;
            const std::size_t c_lo = dx < pad ? pad - dx : 0;
            const std::size_t c_hi = std::min(width, width + pad - dx);
            std::size_t ch_off = 0;
            for (std::size_t part = 0; part < inputs.size(); ++part) {
                const std::size_t ch = inputs[part].channels;
                if (double* dst_base = d_inputs[part]) {
                    for (std::size_t c = c_lo; c < c_hi; ++c) {
                        double* dst = dst_base + (static_cast<std::size_t>(src_r) * width + c + dx - pad) * ch;
                        const double* src = cols + c * row_len + tap + ch_off;
                        for (std::size_t i = 0; i < ch; ++i) dst[i] += src[i];
                    }
                }
                ch_off += ch;
            }
        }
    }
}

void require_conv_shapes(const Tensor& input, const Tensor& kernel) {
    if (input.rank() != 3) throw ShapeError("conv2d input must be (h, w, c_in)");
    if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be (k, k, c_in, c_out)");
    if (kernel.extent(0) != kernel.extent(1) || kernel.extent(0) % 2 == 0) {
        throw ShapeError("conv2d kernel must be square with odd size");
    }
    if (kernel.extent(2) != input.extent(2)) throw ShapeError("conv2d kernel c_in differs from input channels");
}

}  // namespace

void conv2d_accumulate(std::span<const ConvInput> inputs, std::size_t height, std::size_t width, const double* kernel,
                       std::size_t k, std::size_t c_out, double* out) {
    const std::size_t c_total = total_channels(inputs);
    const std::size_t row_len = k * k * c_total;
    std::vector<double> cols(width * row_len);
    const auto& kt = kernels::active();
    for (std::size_t r = 0; r < height; ++r) {
        im2col_row(inputs, c_total, height, width, k, r, cols.data());
        kt.gemm(width, c_out, row_len, cols.data(), static_cast<std::ptrdiff_t>(row_len), 1, kernel,
                static_cast<std::ptrdiff_t>(c_out), out + r * width * c_out, static_cast<std::ptrdiff_t>(c_out));
    }
}

void conv2d_backward_accumulate(std::span<const ConvInput> inputs, std::size_t height, std::size_t width,
                                const double* kernel, std::size_t k, std::size_t c_out, const double* d_out,
                                std::span<double* const> d_inputs, double* d_kernel) {
    if (d_inputs.size() != inputs.size()) throw ShapeError("conv2d backward needs one gradient slot per input");
    const std::size_t c_total = total_channels(inputs);
    const std::size_t row_len = k * k * c_total;
    const bool want_input = std::any_of(d_inputs.begin(), d_inputs.end(), [](double* p) { return p != nullptr; });
    const auto& kt = kernels::active();

    std::vector<double> kernel_t;
    if (want_input) {
        kernel_t.resize(row_len * c_out);
        for (std::size_t i = 0; i < row_len; ++i) {
            for (std::size_t o = 0; o < c_out; ++o) kernel_t[o * row_len + i] = kernel[i * c_out + o];
        }
    }
    std::vector<double> cols(width * row_len);
    std::vector<double> d_cols(want_input ? width * row_len : 0);
    for (std::size_t r = 0; r < height; ++r) {
        const double* d_row = d_out + r * width * c_out;
        if (d_kernel) {
            im2col_row(inputs, c_total, height, width, k, r, cols.data());
            kt.gemm(row_len, c_out, width, cols.data(), 1, static_cast<std::ptrdiff_t>(row_len), d_row,
                    static_cast<std::ptrdiff_t>(c_out), d_kernel, static_cast<std::ptrdiff_t>(c_out));
        }
        if (want_input) {
            std::fill(d_cols.begin(), d_cols.end(), 0.0);
            kt.gemm(width, row_len, c_out, d_row, static_cast<std::ptrdiff_t>(c_out), 1, kernel_t.data(),
                    static_cast<std::ptrdiff_t>(row_len), d_cols.data(), static_cast<std::ptrdiff_t>(row_len));
            col2im_row_add(d_inputs, inputs, c_total, height, width, k, r, d_cols.data());
        }
    }
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require_conv_shapes(input, kernel);
    const std::size_t h = input.extent(0), w = input.extent(1), k = kernel.extent(0), c_out = kernel.extent(3);
    require_shape(bias, {c_out}, "conv2d bias");
    Tensor out({h, w, c_out});
    for (std::size_t p = 0; p < h * w; ++p) std::copy_n(bias.data(), c_out, out.data() + p * c_out);
    const ConvInput in{input.data(), input.extent(2)};
    conv2d_accumulate({&in, 1}, h, w, kernel.data(), k, c_out, out.data());
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& d_out) {
    require_conv_shapes(input, kernel);
    const std::size_t h = input.extent(0), w = input.extent(1), k = kernel.extent(0), c_out = kernel.extent(3);
    require_shape(d_out, {h, w, c_out}, "conv2d output gradient");
    Conv2dGrads g{Tensor(input.shape()), Tensor(kernel.shape()), Tensor({c_out})};
    const ConvInput in{input.data(), input.extent(2)};
    double* d_in = g.d_input.data();
    conv2d_backward_accumulate({&in, 1}, h, w, kernel.data(), k, c_out, d_out.data(), {&d_in, 1}, g.d_kernel.data());
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t o = 0; o < c_out; ++o) g.d_bias[o] += d_out[p * c_out + o];
    }
    return g;
}

// --- elementwise ------------------------------------------------------------------

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void sigmoid_inplace(std::span<double> x) noexcept {
    for (auto& v : x) v = -v;
    kernels::exp_inplace(x.size(), x.data());
    for (auto& v : x) v = 1.0 / (1.0 + v);
}

void tanh_inplace(std::span<double> x) noexcept {
    for (auto& v : x) v = -2.0 * v;
    kernels::exp_inplace(x.size(), x.data());
    for (auto& v : x) v = 2.0 / (1.0 + v) - 1.0;
}

void relu_inplace(std::span<double> x) noexcept {
    for (auto& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<const double> activation, std::span<double> d) noexcept {
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(activation[i] > 0.0)) d[i] = 0.0;
    }
}

void dropout_forward(std::span<double> x, double ratio, std::uint64_t seed, std::uint64_t stream,
                     std::span<double> mask) noexcept {
    const CounterRng rng(seed, stream);
    const double scale = 1.0 / (1.0 - ratio);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = static_cast<double>(rng.at(i) >> 11) * 0x1.0p-53;
        mask[i] = u >= ratio ? scale : 0.0;
        x[i] *= mask[i];
    }
}

// --- normalization ----------------------------------------------------------------

void layer_norm_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> y, NormCache* cache) {
    const std::size_t rows = x.size() / channels;
    if (cache) {
        cache->xhat.resize(x.size());
        cache->inv_std.resize(rows);
    }
    const auto c = static_cast<double>(channels);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * channels;
        double mean = 0.0;
        for (std::size_t i = 0; i < channels; ++i) mean += xr[i];
        mean /= c;
        double var = 0.0;
        for (std::size_t i = 0; i < channels; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= c;
        const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
        double* yr = y.data() + r * channels;
        for (std::size_t i = 0; i < channels; ++i) {
            const double xh = (xr[i] - mean) * inv;
            if (cache) cache->xhat[r * channels + i] = xh;
            yr[i] = gamma[i] * xh + beta[i];
        }
        if (cache) cache->inv_std[r] = inv;
    }
}

void layer_norm_backward(const NormCache& cache, std::size_t channels, std::span<const double> gamma,
                         std::span<const double> d_y, std::span<double> d_x, std::span<double> d_gamma,
                         std::span<double> d_beta) {
    const std::size_t rows = cache.inv_std.size();
    const auto c = static_cast<double>(channels);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xh = cache.xhat.data() + r * channels;
        const double* dy = d_y.data() + r * channels;
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t i = 0; i < channels; ++i) {
            d_gamma[i] += dy[i] * xh[i];
            d_beta[i] += dy[i];
            const double dxh = dy[i] * gamma[i];
            sum_d += dxh;
            sum_dx += dxh * xh[i];
        }
        const double inv = cache.inv_std[r];
        double* dx = d_x.data() + r * channels;
        for (std::size_t i = 0; i < channels; ++i) {
            const double dxh = dy[i] * gamma[i];
            dx[i] = inv / c * (c * dxh - sum_d - xh[i] * sum_dx);
        }
    }
}

void batch_norm_train_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                              std::span<const double> beta, std::span<double> y, NormCache* cache,
                              std::span<double> batch_mean, std::span<double> batch_var) {
    const std::size_t rows = x.size() / channels;
    if (rows == 0) throw ShapeError("batch norm over an empty batch");
    const auto n = static_cast<double>(rows);
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) mean[i] += x[r * channels + i];
    }
    for (auto& m : mean) m /= n;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) {
            const double d = x[r * channels + i] - mean[i];
            var[i] += d * d;
        }
    }
    for (auto& v : var) v /= n;
    std::vector<double> inv(channels);
    for (std::size_t i = 0; i < channels; ++i) inv[i] = 1.0 / std::sqrt(var[i] + kNormEpsilon);
    if (cache) {
        cache->xhat.resize(x.size());
        cache->inv_std = inv;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) {
            const std::size_t idx = r * channels + i;
            const double xh = (x[idx] - mean[i]) * inv[i];
            if (cache) cache->xhat[idx] = xh;
            y[idx] = gamma[i] * xh + beta[i];
        }
    }
    std::copy(mean.begin(), mean.end(), batch_mean.begin());
    std::copy(var.begin(), var.end(), batch_var.begin());
}

void batch_norm_eval_forward(std::span<const double> x, std::size_t channels, std::span<const double> gamma,
                             std::span<const double> beta, std::span<const double> running_mean,
                             std::span<const double> running_var, std::span<double> y) {
    std::vector<double> scale(channels), shift(channels);
    for (std::size_t i = 0; i < channels; ++i) {
        const double inv = 1.0 / std::sqrt(running_var[i] + kNormEpsilon);
        scale[i] = gamma[i] * inv;
        shift[i] = beta[i] - running_mean[i] * scale[i];
    }
    const std::size_t rows = x.size() / channels;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) y[r * channels + i] = x[r * channels + i] * scale[i] + shift[i];
    }
}

void batch_norm_backward(const NormCache& cache, std::size_t channels, std::span<const double> gamma,
                         std::span<const double> d_y, std::span<double> d_x, std::span<double> d_gamma,
                         std::span<double> d_beta) {
    const std::size_t rows = cache.xhat.size() / channels;
    const auto n = static_cast<double>(rows);
    std::vector<double> sum_d(channels, 0.0), sum_dx(channels, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) {
            const std::size_t idx = r * channels + i;
            d_gamma[i] += d_y[idx] * cache.xhat[idx];
            d_beta[i] += d_y[idx];
            const double dxh = d_y[idx] * gamma[i];
            sum_d[i] += dxh;
            sum_dx[i] += dxh * cache.xhat[idx];
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < channels; ++i) {
            const std::size_t idx = r * channels + i;
            const double dxh = d_y[idx] * gamma[i];
            d_x[idx] = cache.inv_std[i] / n * (n * dxh - sum_d[i] - cache.xhat[idx] * sum_dx[i]);
        }
    }
}

// --- dense ------------------------------------------------------------------------

void dense_forward(std::span<const double> x, std::size_t c_in, const Tensor& weight, const Tensor& bias,
                   std::span<double> y) {
    const std::size_t c_out = weight.extent(1);
    if (weight.extent(0) != c_in || bias.size() != c_out) throw ShapeError("dense parameter shapes do not match input");
    const std::size_t rows = x.size() / c_in;
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias.data(), c_out, y.data() + r * c_out);
    kernels::gemm(rows, c_out, c_in, x.data(), static_cast<std::ptrdiff_t>(c_in), 1, weight.data(),
                  static_cast<std::ptrdiff_t>(c_out), y.data(), static_cast<std::ptrdiff_t>(c_out));
}

void dense_backward(std::span<const double> x, std::size_t c_in, const Tensor& weight, std::span<const double> d_y,
                    std::span<double> d_x, Tensor& d_weight, Tensor& d_bias) {
    const std::size_t c_out = weight.extent(1);
    const std::size_t rows = x.size() / c_in;
    // d_weight (c_in x c_out) += x^T d_y
    kernels::gemm(c_in, c_out, rows, x.data(), 1, static_cast<std::ptrdiff_t>(c_in), d_y.data(),
                  static_cast<std::ptrdiff_t>(c_out), d_weight.data(), static_cast<std::ptrdiff_t>(c_out));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < c_out; ++o) d_bias[o] += d_y[r * c_out + o];
    }
    if (!d_x.empty()) {
        std::vector<double> w_t(c_out * c_in);
        for (std::size_t i = 0; i < c_in; ++i) {
            for (std::size_t o = 0; o < c_out; ++o) w_t[o * c_in + i] = weight[i * c_out + o];
        }
        std::fill(d_x.begin(), d_x.end(), 0.0);
        kernels::gemm(rows, c_in, c_out, d_y.data(), static_cast<std::ptrdiff_t>(c_out), 1, w_t.data(),
                      static_cast<std::ptrdiff_t>(c_in), d_x.data(), static_cast<std::ptrdiff_t>(c_in));
    }
}

}  // namespace elite::nn
