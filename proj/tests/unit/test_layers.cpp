#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "elite/errors.hpp"
#include "elite/layers.hpp"
#include "support/oracles.hpp"

using namespace elite::nn;

namespace {

double weighted_sum(std::span<const double> y, std::span<const double> w) {
    return std::inner_product(y.begin(), y.end(), w.begin(), 0.0);
}

}  // namespace

TEST_CASE("conv2d equals direct summation") {
    struct Case {
        std::size_t h, w, cin, cout, k;
    };
    const Case cases[] = {{1, 1, 1, 1, 1}, {5, 4, 2, 3, 3}, {7, 9, 18, 64, 3}, {6, 6, 3, 2, 5}, {3, 8, 16, 16, 1},
                          {2, 2, 4, 5, 3}};
    std::uint64_t seed = 10;
    for (const auto& c : cases) {
        CAPTURE(c.h);
        CAPTURE(c.cin);
        CAPTURE(c.k);
        const auto in = oracle::random_tensor({c.h, c.w, c.cin}, seed++);
        const auto ker = oracle::random_tensor({c.k, c.k, c.cin, c.cout}, seed++);
        const auto bias = oracle::random_tensor({c.cout}, seed++);
        const auto out = conv2d(in, ker, bias);
        REQUIRE(out.shape() == Shape{c.h, c.w, c.cout});
        const auto ref = oracle::conv2d({in.values().begin(), in.values().end()}, c.h, c.w, c.cin,
                                        {ker.values().begin(), ker.values().end()}, c.k, c.cout,
                                        {bias.values().begin(), bias.values().end()});
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::fabs(out[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("conv2d input blocks act as their concatenation") {
    const std::size_t h = 6, w = 5, c1 = 3, c2 = 2, cout = 4, k = 3;
    const auto a = oracle::random_tensor({h, w, c1}, 1);
    const auto b = oracle::random_tensor({h, w, c2}, 2);
    const auto ker = oracle::random_tensor({k, k, c1 + c2, cout}, 3);
    Tensor cat({h, w, c1 + c2});
    for (std::size_t p = 0; p < h * w; ++p) {
        for (std::size_t i = 0; i < c1; ++i) cat[p * (c1 + c2) + i] = a[p * c1 + i];
        for (std::size_t i = 0; i < c2; ++i) cat[p * (c1 + c2) + c1 + i] = b[p * c2 + i];
    }
    const auto whole = conv2d(cat, ker, Tensor({cout}));
    std::vector<double> split(h * w * cout, 0.0);
    const ConvInput blocks[] = {{a.data(), c1}, {b.data(), c2}};
    conv2d_accumulate(blocks, h, w, ker.data(), k, cout, split.data());
    for (std::size_t i = 0; i < split.size(); ++i) CHECK(split[i] == doctest::Approx(whole[i]).epsilon(1e-13));
}

TEST_CASE("conv2d rejects even kernels and mismatched channels") {
    CHECK_THROWS_AS(conv2d(Tensor({3, 3, 2}), Tensor({2, 2, 2, 1}), Tensor({1})), elite::ShapeError);
    CHECK_THROWS_AS(conv2d(Tensor({3, 3, 2}), Tensor({3, 3, 3, 1}), Tensor({1})), elite::ShapeError);
}

TEST_CASE("conv2d gradients match finite differences") {
    const std::size_t h = 4, w = 5, cin = 3, cout = 2, k = 3;
    auto in = oracle::random_tensor({h, w, cin}, 21);
    auto ker = oracle::random_tensor({k, k, cin, cout}, 22);
    auto bias = oracle::random_tensor({cout}, 23);
    const auto wts = oracle::random_tensor({h, w, cout}, 24);
    const auto loss = [&] { return weighted_sum(conv2d(in, ker, bias).values(), wts.values()); };
    const auto g = conv2d_backward(in, ker, wts);
    CHECK(oracle::max_fd_error(in.values(), g.d_input.values(), loss) <= 1e-4);
    CHECK(oracle::max_fd_error(ker.values(), g.d_kernel.values(), loss) <= 1e-4);
    CHECK(oracle::max_fd_error(bias.values(), g.d_bias.values(), loss) <= 1e-4);
}

TEST_CASE("sigmoid head derivative matches finite differences") {
    std::vector<double> x(41);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = -10.0 + 0.5 * static_cast<double>(i);
    std::vector<double> analytic(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid(x[i]);
        analytic[i] = s * (1.0 - s);
    }
    std::vector<double> probe(1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[0] = x[i];
        const auto loss = [&] { return sigmoid(probe[0]); };
        CHECK(oracle::max_fd_error(probe, std::span<const double>(&analytic[i], 1), loss) <= 1e-4);
    }
}

TEST_CASE("vector activations agree with the scalar definitions") {
    std::vector<double> x(257);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = -40.0 + 80.0 * static_cast<double>(i) / 256.0;
    auto s = x, t = x, r = x;
    sigmoid_inplace(s);
    tanh_inplace(t);
    relu_inplace(r);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(s[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x[i]))).epsilon(1e-14));
        CHECK(std::fabs(t[i] - std::tanh(x[i])) <= 1e-14);
        CHECK(r[i] == std::max(0.0, x[i]));
    }
    std::vector<double> d(x.size(), 1.0);
    relu_backward_inplace(r, d);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(d[i] == (x[i] > 0.0 ? 1.0 : 0.0));
}

TEST_CASE("dropout is seeded, scaled and reproducible") {
    std::vector<double> x(10000, 1.0), mask(x.size());
    dropout_forward(x, 0.2, 5, 1, mask);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK((x[i] == 0.0 || x[i] == doctest::Approx(1.25)));
        CHECK(x[i] == mask[i]);
        kept += x[i] != 0.0;
    }
    CHECK(kept > 7800);
    CHECK(kept < 8200);
    std::vector<double> y(x.size(), 1.0), mask2(x.size());
    dropout_forward(y, 0.2, 5, 1, mask2);
    CHECK(mask == mask2);
    dropout_forward(y, 0.2, 5, 2, mask2);
    CHECK(mask != mask2);
}

TEST_CASE("layer norm gradients match finite differences") {
    const std::size_t rows = 6, ch = 5;
    std::vector<double> x(rows * ch), gamma(ch), beta(ch), wts(rows * ch);
    oracle::fill_uniform(x, 31, -2.0, 2.0);
    oracle::fill_uniform(gamma, 32, 0.5, 1.5);
    oracle::fill_uniform(beta, 33);
    oracle::fill_uniform(wts, 34);
    std::vector<double> y(x.size());
    const auto loss = [&] {
        layer_norm_forward(x, ch, gamma, beta, y, nullptr);
        return weighted_sum(y, wts);
    };
    NormCache cache;
    layer_norm_forward(x, ch, gamma, beta, y, &cache);
    for (std::size_t r = 0; r < rows; ++r) {
        double m = 0.0, v = 0.0;
        for (std::size_t c = 0; c < ch; ++c) m += cache.xhat[r * ch + c];
        for (std::size_t c = 0; c < ch; ++c) v += cache.xhat[r * ch + c] * cache.xhat[r * ch + c];
        CHECK(std::fabs(m) < 1e-12);
        CHECK(v / ch < 1.0);  // epsilon keeps the normalized variance just under 1
    }
    std::vector<double> dx(x.size()), dg(ch, 0.0), db(ch, 0.0);
    layer_norm_backward(cache, ch, gamma, wts, dx, dg, db);
    CHECK(oracle::max_fd_error(x, dx, loss) <= 1e-4);
    CHECK(oracle::max_fd_error(gamma, dg, loss) <= 1e-4);
    CHECK(oracle::max_fd_error(beta, db, loss) <= 1e-4);
}

TEST_CASE("batch norm gradients match finite differences") {
    const std::size_t rows = 12, ch = 3;
    std::vector<double> x(rows * ch), gamma(ch), beta(ch), wts(rows * ch), mean(ch), var(ch);
    oracle::fill_uniform(x, 41, -2.0, 2.0);
    oracle::fill_uniform(gamma, 42, 0.5, 1.5);
    oracle::fill_uniform(beta, 43);
    oracle::fill_uniform(wts, 44);
    std::vector<double> y(x.size());
    const auto loss = [&] {
        batch_norm_train_forward(x, ch, gamma, beta, y, nullptr, mean, var);
        return weighted_sum(y, wts);
    };
    NormCache cache;
    batch_norm_train_forward(x, ch, gamma, beta, y, &cache, mean, var);
    for (std::size_t c = 0; c < ch; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t r = 0; r < rows; ++r) m += x[r * ch + c];
        m /= rows;
        for (std::size_t r = 0; r < rows; ++r) v += (x[r * ch + c] - m) * (x[r * ch + c] - m);
        v /= rows;
        CHECK(mean[c] == doctest::Approx(m).epsilon(1e-14));
        CHECK(var[c] == doctest::Approx(v).epsilon(1e-14));
    }
    std::vector<double> dx(x.size()), dg(ch, 0.0), db(ch, 0.0);
    batch_norm_backward(cache, ch, gamma, wts, dx, dg, db);
    CHECK(oracle::max_fd_error(x, dx, loss) <= 1e-4);
    CHECK(oracle::max_fd_error(gamma, dg, loss) <= 1e-4);
    CHECK(oracle::max_fd_error(beta, db, loss) <= 1e-4);
}

TEST_CASE("batch norm eval uses running statistics") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0}, gamma{2.0, 1.0}, beta{0.5, -0.5}, rm{1.0, 2.0}, rv{4.0, 1.0};
    std::vector<double> y(4);
    batch_norm_eval_forward(x, 2, gamma, beta, rm, rv, y);
    CHECK(y[0] == doctest::Approx(2.0 * 0.0 / std::sqrt(4.0 + kNormEpsilon) + 0.5));
    CHECK(y[1] == doctest::Approx(0.0 / std::sqrt(1.0 + kNormEpsilon) - 0.5));
    CHECK(y[2] == doctest::Approx(2.0 * 2.0 / std::sqrt(4.0 + kNormEpsilon) + 0.5));
    CHECK(y[3] == doctest::Approx(2.0 / std::sqrt(1.0 + kNormEpsilon) - 0.5));
}

TEST_CASE("dense gradients match finite differences") {
    const std::size_t rows = 7, cin = 4, cout = 3;
    std::vector<double> x(rows * cin), wts(rows * cout);
    oracle::fill_uniform(x, 51);
    oracle::fill_uniform(wts, 52);
    auto weight = oracle::random_tensor({cin, cout}, 53);
    auto bias = oracle::random_tensor({cout}, 54);
    std::vector<double> y(rows * cout);
    const auto loss = [&] {
        dense_forward(x, cin, weight, bias, y);
        return weighted_sum(y, wts);
    };
    std::vector<double> dx(x.size());
    Tensor dw({cin, cout}), dbias({cout});
    dense_backward(x, cin, weight, wts, dx, dw, dbias);
    CHECK(oracle::max_fd_error(x, dx, loss) <= 1e-4);
    CHECK(oracle::max_fd_error(weight.values(), dw.values(), loss) <= 1e-4);
    CHECK(oracle::max_fd_error(bias.values(), dbias.values(), loss) <= 1e-4);
}
