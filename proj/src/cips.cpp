#include "elite/cips.hpp"

#include <cmath>

#include "elite/errors.hpp"
#include "elite/parallel.hpp"
#include "elite/rng.hpp"

namespace elite::nn {

void CipsConfig::validate() const {
    if (features == 0) throw InvalidArgument("feature count must be positive");
    if (kernel == 0 || kernel % 2 == 0) throw InvalidArgument("kernel size must be odd");
    if (hidden == 0) throw InvalidArgument("hidden channel count must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout ratio must be in [0, 1)");
}

BatchNormParams::BatchNormParams(std::size_t channels)
    : gamma({channels}, 1.0), beta({channels}), running_mean({channels}), running_var({channels}, 1.0) {}

CipsModel::CipsModel(const CipsConfig& cfg) : config(cfg) {
    config.validate();
    const std::size_t k = cfg.kernel, c = cfg.hidden;
    lstm1 = ConvLstmParams(k, cfg.features, c);
    ln_gamma = Tensor({c}, 1.0);
    ln_beta = Tensor({c});
    lstm2 = ConvLstmParams(k, c, c);
    bn1 = BatchNormParams(c);
    conv1_w = Tensor({k, k, c, c});
    conv1_b = Tensor({c});
    bn2 = BatchNormParams(c);
    conv2_w = Tensor({k, k, c, c});
    conv2_b = Tensor({c});
    bn3 = BatchNormParams(c);
    dense_w = Tensor({c, 1});
    dense_b = Tensor({1});
}

std::vector<Tensor*> CipsModel::trainable() {
    return {&lstm1.kernel, &lstm1.bias, &ln_gamma, &ln_beta, &lstm2.kernel, &lstm2.bias,
            &bn1.gamma,    &bn1.beta,   &conv1_w,  &conv1_b, &bn2.gamma,    &bn2.beta,
            &conv2_w,      &conv2_b,    &bn3.gamma, &bn3.beta, &dense_w,    &dense_b};
}

std::vector<const Tensor*> CipsModel::trainable() const {
    auto mut = const_cast<CipsModel*>(this)->trainable();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> CipsModel::trainable_names() const {
    return {"convlstm1.kernel", "convlstm1.bias", "layernorm.gamma", "layernorm.beta", "convlstm2.kernel",
            "convlstm2.bias",   "batchnorm1.gamma", "batchnorm1.beta", "conv1.kernel",  "conv1.bias",
            "batchnorm2.gamma", "batchnorm2.beta", "conv2.kernel",    "conv2.bias",     "batchnorm3.gamma",
            "batchnorm3.beta",  "dense.kernel",    "dense.bias"};
}

std::vector<Tensor*> CipsModel::running() {
    return {&bn1.running_mean, &bn1.running_var, &bn2.running_mean,
            &bn2.running_var,  &bn3.running_mean, &bn3.running_var};
}

std::vector<const Tensor*> CipsModel::running() const {
    auto mut = const_cast<CipsModel*>(this)->running();
    return {mut.begin(), mut.end()};
}

void CipsModel::validate() const {
    config.validate();
    const CipsModel shape_ref(config);
    const auto mine = trainable();
    const auto ref = shape_ref.trainable();
    const auto names = trainable_names();
    for (std::size_t i = 0; i < mine.size(); ++i) require_shape(*mine[i], ref[i]->shape(), names[i].c_str());
    const auto run = running();
    for (const auto* t : run) require_shape(*t, {config.hidden}, "batch-norm running statistic");
}

namespace {

void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::uint64_t stream) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    CounterRng rng(seed, stream);
    for (auto& v : t.values()) v = (2.0 * rng.next_uniform() - 1.0) * bound;
}

}  // namespace

CipsModel init_params(const CipsConfig& config, std::uint64_t seed) {
    CipsModel m(config);
    const std::size_t k2 = config.kernel * config.kernel, c = config.hidden;
    // Streams follow trainable() order so adding a tensor never reshuffles the others.
    glorot_fill(m.lstm1.kernel, k2 * (config.features + c), k2 * c, seed, 0);
    glorot_fill(m.lstm2.kernel, k2 * (c + c), k2 * c, seed, 4);
    glorot_fill(m.conv1_w, k2 * c, k2 * c, seed, 8);
    glorot_fill(m.conv2_w, k2 * c, k2 * c, seed, 12);
    glorot_fill(m.dense_w, c, 1, seed, 16);
    for (std::size_t o = 0; o < c; ++o) {
        m.lstm1.gate_bias(Gate::forget, o) = 1.0;
        m.lstm2.gate_bias(Gate::forget, o) = 1.0;
    }
    return m;
}

std::size_t convlstm_param_count(std::size_t k, std::size_t c_in, std::size_t c_hidden) noexcept {
    return 4 * (k * k * (c_in + c_hidden) * c_hidden + c_hidden);
}

std::size_t conv_param_count(std::size_t k, std::size_t c_in, std::size_t c_out) noexcept {
    return k * k * c_in * c_out + c_out;
}

ParamCount param_count(const CipsConfig& config) {
    config.validate();
    const std::size_t k = config.kernel, c = config.hidden;
    ParamCount n;
    n.trainable = convlstm_param_count(k, config.features, c) + 2 * c  // layer norm
                  + convlstm_param_count(k, c, c) + 2 * c              // batch norm 1
                  + conv_param_count(k, c, c) + 2 * c                  // conv 1 + batch norm 2
                  + conv_param_count(k, c, c) + 2 * c                  // conv 2 + batch norm 3
                  + c + 1;                                             // dense head
    n.non_trainable = 3 * 2 * c;
    return n;
}

std::vector<Tensor> zero_gradients(const CipsModel& model) {
    std::vector<Tensor> g;
    for (const auto* t : model.trainable()) g.emplace_back(t->shape());
    return g;
}

namespace {

void conv_layer_forward(const std::vector<double>& in, std::size_t samples, std::size_t h, std::size_t w,
                        std::size_t c, const Tensor& kernel, const Tensor& bias, std::vector<double>& out) {
    const std::size_t k = kernel.extent(0), c_out = kernel.extent(3);
    const std::size_t plane_in = h * w * c, plane_out = h * w * c_out;
    out.resize(samples * plane_out);
    parallel_for(samples, [&](std::size_t s) {
        double* o = out.data() + s * plane_out;
        for (std::size_t p = 0; p < h * w; ++p) std::copy_n(bias.data(), c_out, o + p * c_out);
        const ConvInput input{in.data() + s * plane_in, c};
        conv2d_accumulate({&input, 1}, h, w, kernel.data(), k, c_out, o);
    });
}

}  // namespace

Tensor cips_forward(const BatchView& batch, const CipsModel& model, Mode mode, std::uint64_t seed, CipsTape* tape) {
    const CipsConfig& cfg = model.config;
    if (batch.features != cfg.features) {
        throw ShapeError("batch has " + std::to_string(batch.features) + " features, model expects " +
                         std::to_string(cfg.features));
    }
    if (batch.samples == 0 || batch.epochs == 0 || batch.height == 0 || batch.width == 0) {
        throw ShapeError("empty batch");
    }
    if (mode == Mode::eval) {
        for (const auto* bn : model.batch_norms()) {
            if (!bn->initialized) throw UsageError("eval-mode forward with uninitialized batch-norm statistics");
        }
        tape = nullptr;
    }
    const std::size_t S = batch.samples, T = batch.epochs, h = batch.height, w = batch.width;
    const std::size_t P = h * w, c = cfg.hidden, plane = P * c;

    if (tape) {
        // Buffers from an earlier step are reused; the per-sample vectors only grow.
        tape->recorded = false;
        tape->samples = S;
        tape->height = h;
        tape->width = w;
        if (tape->lstm1.size() < S) {
            tape->lstm1.resize(S);
            tape->ln.resize(S);
            tape->lstm2.resize(S);
        }
    }

    std::vector<double> x(S * plane);
    parallel_for(S, [&](std::size_t s) {
        std::vector<double> seq(T * plane);
        convlstm_forward_raw(batch.data + s * batch.sample_stride(), T, h, w, model.lstm1,
                             tape ? &tape->lstm1[s] : nullptr, seq.data(), nullptr);
        layer_norm_forward(seq, c, model.ln_gamma.values(), model.ln_beta.values(), seq, tape ? &tape->ln[s] : nullptr);
        relu_inplace(seq);
        convlstm_forward_raw(seq.data(), T, h, w, model.lstm2, tape ? &tape->lstm2[s] : nullptr, nullptr,
                             x.data() + s * plane);
    });

    const auto norms = model.batch_norms();
    auto norm_relu = [&](std::size_t i, std::vector<double>& v) {
        const BatchNormParams& bn = *norms[i];
        if (mode == Mode::train) {
            std::vector<double> mean(c), var(c);
            batch_norm_train_forward(v, c, bn.gamma.values(), bn.beta.values(), v, tape ? &tape->bn[i] : nullptr,
                                     mean, var);
            if (tape) {
                tape->batch_mean[i] = std::move(mean);
                tape->batch_var[i] = std::move(var);
            }
        } else {
            batch_norm_eval_forward(v, c, bn.gamma.values(), bn.beta.values(), bn.running_mean.values(),
                                    bn.running_var.values(), v);
        }
        relu_inplace(v);
        if (tape) tape->bn_relu[i] = v;
    };

    norm_relu(0, x);
    std::vector<double> y;
    conv_layer_forward(x, S, h, w, c, model.conv1_w, model.conv1_b, y);
    norm_relu(1, y);
    conv_layer_forward(y, S, h, w, c, model.conv2_w, model.conv2_b, x);
    norm_relu(2, x);

    if (mode == Mode::train) {
        std::vector<double> mask(x.size());
        for (std::size_t s = 0; s < S; ++s) {
            dropout_forward(std::span(x).subspan(s * plane, plane), cfg.dropout, seed, s,
                            std::span(mask).subspan(s * plane, plane));
        }
        if (tape) {
            tape->dropout_mask = std::move(mask);
            tape->dense_in = x;
        }
    }

    Tensor prob({S, h, w, 1});
    dense_forward(x, c, model.dense_w, model.dense_b, prob.values());
    for (auto& v : prob.values()) v = sigmoid(v);
    if (tape) {
        tape->prob.assign(prob.values().begin(), prob.values().end());
        tape->recorded = true;
    }
    return prob;
}

void update_running_stats(CipsModel& model, const CipsTape& tape) {
    if (!tape.recorded) throw UsageError("running-statistics update without a recorded training pass");
    auto norms = model.batch_norms();
    for (std::size_t i = 0; i < norms.size(); ++i) {
        BatchNormParams& bn = *norms[i];
        for (std::size_t ch = 0; ch < bn.running_mean.size(); ++ch) {
            bn.running_mean[ch] =
                kBatchNormMomentum * bn.running_mean[ch] + (1.0 - kBatchNormMomentum) * tape.batch_mean[i][ch];
            bn.running_var[ch] =
                kBatchNormMomentum * bn.running_var[ch] + (1.0 - kBatchNormMomentum) * tape.batch_var[i][ch];
        }
        bn.initialized = true;
    }
}

namespace {

// Reverse of conv_layer_forward; overwrites d_in.
void conv_layer_backward(const std::vector<double>& in, std::size_t samples, std::size_t h, std::size_t w,
                         std::size_t c, const Tensor& kernel, const std::vector<double>& d_out,
                         std::vector<double>& d_in, Tensor& d_kernel, Tensor& d_bias) {
    const std::size_t k = kernel.extent(0), c_out = kernel.extent(3);
    const std::size_t plane_in = h * w * c, plane_out = h * w * c_out;
    d_in.assign(samples * plane_in, 0.0);
    for (std::size_t s = 0; s < samples; ++s) {
        const ConvInput input{in.data() + s * plane_in, c};
        double* d_ptr = d_in.data() + s * plane_in;
        conv2d_backward_accumulate({&input, 1}, h, w, kernel.data(), k, c_out, d_out.data() + s * plane_out,
                                   {&d_ptr, 1}, d_kernel.data());
        for (std::size_t p = 0; p < h * w; ++p) {
            for (std::size_t o = 0; o < c_out; ++o) d_bias[o] += d_out[s * plane_out + p * c_out + o];
        }
    }
}

}  // namespace

void cips_backward(const CipsTape& tape, const CipsModel& model, std::span<const double> d_prob,
                   std::vector<Tensor>& grads) {
    if (!tape.recorded) throw UsageError("backward without a recorded train-mode forward pass");
    const auto params = model.trainable();
    if (grads.size() != params.size()) throw ShapeError("gradient set does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) require_shape(grads[i], params[i]->shape(), "gradient");
    const std::size_t S = tape.samples, h = tape.height, w = tape.width, P = h * w, c = model.config.hidden;
    const std::size_t plane = P * c;
    if (d_prob.size() != S * P) throw ShapeError("probability gradient has the wrong size");

    std::vector<double> d_logit(S * P);
    for (std::size_t i = 0; i < d_logit.size(); ++i) d_logit[i] = d_prob[i] * tape.prob[i] * (1.0 - tape.prob[i]);

    std::vector<double> d_x(S * plane), d_y(S * plane);
    dense_backward(tape.dense_in, c, model.dense_w, d_logit, d_x, grads[16], grads[17]);
    for (std::size_t i = 0; i < d_x.size(); ++i) d_x[i] *= tape.dropout_mask[i];

    relu_backward_inplace(tape.bn_relu[2], d_x);
    batch_norm_backward(tape.bn[2], c, model.bn3.gamma.values(), d_x, d_y, grads[14].values(), grads[15].values());
    conv_layer_backward(tape.bn_relu[1], S, h, w, c, model.conv2_w, d_y, d_x, grads[12], grads[13]);

    relu_backward_inplace(tape.bn_relu[1], d_x);
    batch_norm_backward(tape.bn[1], c, model.bn2.gamma.values(), d_x, d_y, grads[10].values(), grads[11].values());
    conv_layer_backward(tape.bn_relu[0], S, h, w, c, model.conv1_w, d_y, d_x, grads[8], grads[9]);

    relu_backward_inplace(tape.bn_relu[0], d_x);
    batch_norm_backward(tape.bn[0], c, model.bn1.gamma.values(), d_x, d_y, grads[6].values(), grads[7].values());

    // Recurrent part: independent per sample, reduced in sample order.
    std::vector<std::array<Tensor, 6>> partial(S);
    parallel_for(S, [&](std::size_t s) {
        auto& g = partial[s];
        for (std::size_t i = 0; i < 6; ++i) g[i] = Tensor(params[i]->shape());
        const std::size_t T = tape.lstm2[s].epochs;
        std::vector<double> d_hidden(T * plane, 0.0);
        std::copy_n(d_y.data() + s * plane, plane, d_hidden.data() + (T - 1) * plane);
        std::vector<double> d_seq(T * plane);
        convlstm_backward(tape.lstm2[s], model.lstm2, d_hidden.data(), d_seq.data(), g[4], g[5]);
        relu_backward_inplace(tape.lstm2[s].input, d_seq);
        layer_norm_backward(tape.ln[s], c, model.ln_gamma.values(), d_seq, d_hidden, g[2].values(), g[3].values());
        convlstm_backward(tape.lstm1[s], model.lstm1, d_hidden.data(), nullptr, g[0], g[1]);
    });
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t i = 0; i < 6; ++i) {
            auto dst = grads[i].values();
            const auto src = partial[s][i].values();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
}

}  // namespace elite::nn
