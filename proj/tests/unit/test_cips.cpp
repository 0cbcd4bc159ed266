#include <doctest.h>

#include <vector>

#include "elite/cips.hpp"
#include "elite/errors.hpp"
#include "elite/parallel.hpp"
#include "elite/train.hpp"
#include "support/oracles.hpp"

using namespace elite::nn;

namespace {

struct Toy {
    Tensor data;  // (samples, n_t, h, w, f)
    BatchView view;
    std::vector<std::uint8_t> target, valid;
};

Toy make_toy(std::size_t samples, std::size_t n_t, std::size_t h, std::size_t w, std::size_t f, std::uint64_t seed) {
    Toy t;
    t.data = oracle::random_tensor({samples, n_t, h, w, f}, seed);
    t.view = {t.data.data(), samples, n_t, h, w, f};
    elite::CounterRng rng(seed, 3);
    for (std::size_t i = 0; i < samples * h * w; ++i) {
        t.target.push_back(rng.next_below(2) != 0);
        t.valid.push_back(rng.next_below(8) != 0);
    }
    return t;
}

}  // namespace

TEST_CASE("parameter counts for the default configuration") {
    CHECK(convlstm_param_count(3, 2, 16) == 4 * (9 * 18 * 16 + 16));
    CHECK(conv_param_count(3, 16, 16) == 9 * 16 * 16 + 16);
    const auto pc = param_count(CipsConfig{});
    CHECK(pc.trainable == 33713);
    CHECK(pc.non_trainable == 96);
    // A single batch norm over 16 channels carries 32 non-trainable values.
    const BatchNormParams one(16);
    CHECK(one.running_mean.size() + one.running_var.size() == 32);

    const auto model = init_params(CipsConfig{}, 0);
    std::size_t total = 0;
    for (const auto* t : model.trainable()) total += t->size();
    CHECK(total == 33713);
    CHECK(model.trainable_names().size() == 18);
}

TEST_CASE("initialization is seeded and follows the documented scheme") {
    const auto a = init_params(CipsConfig{}, 3);
    const auto b = init_params(CipsConfig{}, 3);
    const auto c = init_params(CipsConfig{}, 4);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (std::size_t o = 0; o < 16; ++o) {
        CHECK(a.lstm1.bias[o] == 1.0);       // forget block
        CHECK(a.lstm1.bias[16 + o] == 0.0);  // input block
        CHECK(a.bn1.gamma[o] == 1.0);
        CHECK(a.ln_gamma[o] == 1.0);
    }
    const double limit = std::sqrt(6.0 / (9.0 * 18.0 + 9.0 * 16.0));  // fans of one gate kernel
    for (const double v : a.lstm1.kernel.values()) CHECK(std::fabs(v) <= limit);
}

TEST_CASE("eval mode refuses uninitialized running statistics") {
    const auto model = init_params(CipsConfig{2, 3, 4, 0.2}, 1);
    auto toy = make_toy(1, 2, 3, 3, 2, 5);
    CHECK_THROWS_AS(cips_forward(toy.view, model, Mode::eval, 0), elite::UsageError);
}

TEST_CASE("running statistics fold in batch statistics with momentum 0.9") {
    auto model = init_params(CipsConfig{2, 3, 4, 0.2}, 1);
    auto toy = make_toy(2, 2, 3, 3, 2, 6);
    CipsTape tape;
    cips_forward(toy.view, model, Mode::train, 9, &tape);
    update_running_stats(model, tape);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto* bn = model.batch_norms()[i];
        CHECK(bn->initialized);
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(bn->running_mean[c] == doctest::Approx(0.1 * tape.batch_mean[i][c]));
            CHECK(bn->running_var[c] == doctest::Approx(0.9 + 0.1 * tape.batch_var[i][c]));
        }
    }
    const auto p = cips_forward(toy.view, model, Mode::eval, 0);
    CHECK(p.shape() == Shape{2, 3, 3, 1});
    for (const double v : p.values()) CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("full CIPS stack gradients match finite differences") {
    // 4x4 patches, f=2, n_t=3, two samples so batch norm mixes samples.
    auto model = init_params(CipsConfig{2, 3, 4, 0.25}, 11);
    // Non-trivial norm parameters so their gradients are exercised.
    oracle::fill_uniform(model.ln_gamma.values(), 1, 0.5, 1.5);
    oracle::fill_uniform(model.bn2.beta.values(), 2, -0.3, 0.3);
    auto toy = make_toy(2, 3, 4, 4, 2, 12);
    const std::uint64_t seed = 77;

    const auto loss = [&] {
        const auto p = cips_forward(toy.view, model, Mode::train, seed);
        return elite::train::soft_f1_loss(p.values(), toy.target, toy.valid).loss;
    };
    CipsTape tape;
    const auto p = cips_forward(toy.view, model, Mode::train, seed, &tape);
    std::vector<double> dprob(p.size());
    elite::train::soft_f1_loss(p.values(), toy.target, toy.valid, dprob);
    auto grads = zero_gradients(model);
    cips_backward(tape, model, dprob, grads);

    const auto names = model.trainable_names();
    auto params = model.trainable();
    for (std::size_t i = 0; i < params.size(); ++i) {
        CAPTURE(names[i]);
        CHECK(oracle::max_fd_error(params[i]->values(), grads[i].values(), loss) <= 1e-4);
    }
}

TEST_CASE("forward and backward do not depend on the worker count") {
    const auto model = init_params(CipsConfig{2, 3, 4, 0.2}, 21);
    auto toy = make_toy(5, 3, 6, 5, 2, 22);
    const auto run = [&](std::size_t threads) {
        elite::set_thread_count(threads);
        CipsTape tape;
        const auto p = cips_forward(toy.view, model, Mode::train, 3, &tape);
        std::vector<double> d(p.size(), 0.0);
        elite::train::soft_f1_loss(p.values(), toy.target, toy.valid, d);
        auto grads = zero_gradients(model);
        cips_backward(tape, model, d, grads);
        return std::make_pair(p, grads);
    };
    const auto one = run(1);
    const auto three = run(3);
    elite::set_thread_count(1);
    CHECK(one.first == three.first);
    CHECK(one.second == three.second);
}

TEST_CASE("configuration validation") {
    CHECK_THROWS_AS((CipsConfig{0, 3, 16, 0.2}.validate()), elite::InvalidArgument);
    CHECK_THROWS_AS((CipsConfig{2, 2, 16, 0.2}.validate()), elite::InvalidArgument);
    CHECK_THROWS_AS((CipsConfig{2, 3, 16, 1.0}.validate()), elite::InvalidArgument);
}
