#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "elite/errors.hpp"
#include "elite/rng.hpp"
#include "elite/stack_io.hpp"
#include "support/oracles.hpp"

using namespace elite;
using namespace elite::io;

namespace {

InterferogramStack random_stack(std::size_t n_t, std::size_t h, std::size_t w, std::uint64_t seed) {
    InterferogramStack s(n_t, h, w);
    CounterRng rng(seed);
    for (std::size_t i = 0; i < s.amplitude.size(); ++i) {
        s.amplitude[i] = static_cast<float>(5.0 * rng.next_uniform());
        s.phase[i] = wrap_phase_f32(10.0 * rng.next_uniform() - 5.0);
        s.coherence[i] = static_cast<float>(rng.next_uniform());
    }
    return s;
}

FormatErrc decode_error(const std::string& bytes) {
    try {
        decode_stack(bytes);
    } catch (const FormatError& e) {
        return e.code();
    }
    FAIL("decode succeeded");
    return FormatErrc::io_failure;
}

}  // namespace

TEST_CASE("stack files round-trip bitwise") {
    auto s = random_stack(3, 7, 5, 1);
    s.generator = "test";
    s.seed = 42;
    const auto bytes = encode_stack(s);
    const auto back = decode_stack(bytes);
    CHECK(back == s);
    CHECK(encode_stack(back) == bytes);

    const auto path = std::filesystem::temp_directory_path() / "elite_roundtrip.tsstack";
    write_stack(s, path);
    CHECK(read_stack(path) == s);
    std::filesystem::remove(path);

    const auto header = bytes.substr(0, bytes.find('\n'));
    CHECK(header.find("\"bands\":[\"amplitude\",\"phase\",\"coherence\"]") != std::string::npos);
    CHECK(header.find("\"dtype\":\"f32\"") != std::string::npos);
    CHECK(bytes.size() == header.size() + 1 + 3 * 3 * 7 * 5 * 4);
}

TEST_CASE("stack decoding distinguishes failure classes") {
    const auto bytes = encode_stack(random_stack(2, 3, 3, 2));
    const auto nl = bytes.find('\n');
    CHECK(decode_error("garbage") == FormatErrc::malformed_header);
    CHECK(decode_error("{\"version\":1}\n") == FormatErrc::malformed_header);
    CHECK(decode_error(bytes.substr(0, bytes.size() - 1)) == FormatErrc::truncated_payload);
    CHECK(decode_error(bytes + "\x01") == FormatErrc::trailing_data);
    auto bumped = bytes;
    bumped.replace(bumped.find("\"version\":1"), 11, "\"version\":9");
    CHECK(decode_error(bumped) == FormatErrc::version_mismatch);
    CHECK(nl != std::string::npos);
    CHECK_THROWS_AS(read_stack("/nonexistent/dir/x.tsstack"), FormatError);
}

TEST_CASE("mask files round-trip and reject elite-but-invalid pixels") {
    EliteMask m(4, 6);
    m.elite[3] = 1;
    m.valid[5] = 0;
    const auto bytes = encode_mask(m);
    CHECK(decode_mask(bytes) == m);
    CHECK(bytes.find("\"bands\":[\"elite\",\"valid\"]") != std::string::npos);
    m.elite[5] = 1;
    CHECK_THROWS(m.validate());
}

TEST_CASE("stack validation") {
    auto s = random_stack(2, 2, 2, 3);
    s.coherence[0] = 1.5f;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s = random_stack(2, 2, 2, 3);
    s.amplitude[1] = -1.0f;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("phase wrapping stays inside [-pi, pi)") {
    for (double v : {0.0, std::numbers::pi, -std::numbers::pi, 3.0 * std::numbers::pi, 7.5, -7.5, 1e6}) {
        const float w = wrap_phase_f32(v);
        CHECK(static_cast<double>(w) >= -std::numbers::pi - 1e-6);
        CHECK(static_cast<double>(w) < std::numbers::pi);
        CHECK(std::fabs(std::remainder(static_cast<double>(w) - v, 2.0 * std::numbers::pi)) < 1e-4);
    }
}

TEST_CASE("temporal sampling keeps evenly spaced epochs") {
    CHECK(temporal_indices(30, 25).front() == 0);
    CHECK(temporal_indices(30, 25).back() == 29);
    // round(k * 29 / 24) with halves away from zero
    const std::vector<std::size_t> expect{0, 1, 2, 4, 5, 6, 7, 8, 10, 11, 12, 13, 15, 16, 17, 18, 19, 21, 22, 23,
                                          24, 25, 27, 28, 29};
    CHECK(temporal_indices(30, 25) == expect);
    CHECK(temporal_indices(5, 3) == std::vector<std::size_t>{0, 2, 4});
    CHECK(temporal_indices(4, 3) == std::vector<std::size_t>{0, 2, 3});  // 1.5 rounds up
    CHECK(temporal_indices(7, 7) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(temporal_indices(3, 5), InvalidArgument);

    const auto s = random_stack(6, 2, 3, 4);
    const auto t = temporal_sample(s, 3);
    CHECK(t.epochs == 3);
    for (std::size_t p = 0; p < 6; ++p) CHECK(t.phase[2 * 6 + p] == s.phase[5 * 6 + p]);
}

TEST_CASE("feature encodings") {
    InterferogramStack s(2, 1, 2);
    s.phase = {0.0f, 1.0f, -2.0f, 3.0f};
    s.amplitude = {2.0f, 1.0f, 6.0f, 3.0f};
    const auto f = phase_to_features(s, FeatureMode::cos_sin);
    CHECK(f.features == 2);
    CHECK(f.data[f.index(1, 0, 0, 0)] == doctest::Approx(std::cos(-2.0)));
    CHECK(f.data[f.index(1, 0, 0, 1)] == doctest::Approx(std::sin(-2.0)));
    const auto g = phase_to_features(s, FeatureMode::cos_sin_amplitude);
    CHECK(g.features == 3);
    CHECK(g.data[g.index(0, 0, 0, 2)] == doctest::Approx(0.5));  // 2 / mean(2, 6)
    CHECK(feature_mode_from_string("raw_bands") == FeatureMode::raw_bands);
    CHECK_THROWS(feature_mode_from_string("polar"));
}

TEST_CASE("extract then reassemble is exact for random shapes") {
    CounterRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 1 + rng.next_below(260), w = 1 + rng.next_below(260), n_t = 2 + rng.next_below(2);
        CAPTURE(h);
        CAPTURE(w);
        const auto s = random_stack(n_t, h, w, 100 + trial);
        const auto planes = phase_to_features(s, FeatureMode::cos_sin);
        const auto batch = extract_patches(planes);
        const std::size_t rows = (h + 99) / 100, cols = (w + 99) / 100;
        REQUIRE(batch.samples == rows * cols);
        CHECK(reassemble_patches(batch, h, w) == planes);
        std::size_t valid = 0;
        for (auto v : batch.valid) valid += v;
        CHECK(valid == h * w);
    }
}

TEST_CASE("patch layout, padding and label tiles") {
    const auto s = random_stack(2, 150, 120, 7);
    const auto b = extract_patches(s);
    REQUIRE(b.samples == 4);
    CHECK(b.origin[1] == TileOrigin{0, 100});
    CHECK(b.origin[2] == TileOrigin{100, 0});
    // Padding past the scene edge is zero and invalid.
    const std::size_t padded_pixel = 60 * 100 + 5;  // row 160 of tile 2
    CHECK(b.valid[2 * 10000 + padded_pixel] == 0);
    CHECK(b.data[2 * b.sample_stride() + padded_pixel * 2] == 0.0);

    EliteMask m(150, 120);
    m.elite[149 * 120 + 119] = 1;
    const auto l = extract_label_patches(m);
    CHECK(l.samples == 4);
    CHECK(l.elite[3 * 10000 + 49 * 100 + 19] == 1);
    CHECK(l.valid[3 * 10000 + 49 * 100 + 20] == 0);

    auto broken = b;
    broken.origin[3] = broken.origin[0];
    CHECK_THROWS_AS(reassemble_patches(broken, 150, 120), StructuralError);
}
