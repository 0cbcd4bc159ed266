#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "elite/errors.hpp"
#include "elite/selector.hpp"
#include "elite/synth.hpp"

using namespace elite;
using namespace elite::synth;

namespace {

SceneSpec uniform_spec(std::size_t h, std::size_t w, std::size_t n_t, ScatterClass cls, std::uint64_t seed) {
    SceneSpec s;
    s.height = h;
    s.width = w;
    s.epochs = n_t;
    s.seed = seed;
    s.region.assign(h * w, cls);
    return s;
}

}  // namespace

TEST_CASE("defaults match the committed fixture") {
    std::ifstream in(ELITE_TEST_FIXTURES "/default_class_params.json");
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto j = nlohmann::json::parse(ss.str());
    const auto d = default_class_params();
    for (const auto& [name, p] : j.items()) {
        const auto& cp = d[static_cast<std::size_t>(scatter_class_from_string(name))];
        CAPTURE(name);
        CHECK(cp.amplitude_mean == p.at("amplitude_mean").get<double>());
        CHECK(cp.amplitude_jitter == p.at("amplitude_jitter").get<double>());
        CHECK(cp.coherence_mean == p.at("coherence_mean").get<double>());
        CHECK(cp.coherence_jitter == p.at("coherence_jitter").get<double>());
        CHECK(cp.phase_noise == p.at("phase_noise").get<double>());
    }
}

TEST_CASE("generation is deterministic in the seed") {
    auto spec = uniform_spec(12, 9, 5, ScatterClass::ds, 3);
    spec.region[4] = ScatterClass::water;
    const auto a = generate_scene(spec);
    const auto b = generate_scene(spec);
    CHECK(io::encode_stack(a.stack) == io::encode_stack(b.stack));
    CHECK(a.truth == b.truth);
    CHECK(a.truth.elite[4] == 0);
    CHECK(a.truth.elite[5] == 1);
    CHECK(a.stack.seed == 3);
    spec.seed = 4;
    CHECK_FALSE(generate_scene(spec).stack == a.stack);
}

TEST_CASE("zero-jitter PS scene has zero amplitude dispersion") {
    auto spec = uniform_spec(6, 7, 8, ScatterClass::ps, 1);
    spec.params[0].amplitude_jitter = 0.0;
    spec.params[0].phase_noise = 0.0;
    const auto scene = generate_scene(spec);
    const auto d = selector::amplitude_dispersion(scene.stack);
    for (std::size_t p = 0; p < 42; ++p) {
        CHECK(d.valid[p]);
        CHECK(d.ratio[p] == 0.0);
    }
}

TEST_CASE("default classes separate at the 0.25 amplitude-dispersion threshold") {
    // Swept over 20 seeds; fractions are pooled per class.
    std::size_t ps_below = 0, ps_total = 0, dec_above = 0, dec_total = 0, ds_below = 0, ds_total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SceneSpec spec;
        spec.height = 30;
        spec.width = 30;
        spec.epochs = 30;
        spec.seed = seed;
        spec.region = blob_layout(30, 30, 12, {0.3, 0.3, 0.3, 0.1}, seed);
        const auto scene = generate_scene(spec);
        const auto d = selector::amplitude_dispersion(scene.stack);
        for (std::size_t p = 0; p < spec.region.size(); ++p) {
            const bool below = d.valid[p] && d.ratio[p] < 0.25;
            switch (spec.region[p]) {
            case ScatterClass::ps: ps_below += below, ++ps_total; break;
            case ScatterClass::decorrelated: dec_above += !below, ++dec_total; break;
            case ScatterClass::ds: ds_below += below, ++ds_total; break;
            default: break;
            }
        }
    }
    REQUIRE(ps_total > 0);
    REQUIRE(dec_total > 0);
    CHECK(static_cast<double>(ps_below) >= 0.95 * static_cast<double>(ps_total));
    CHECK(static_cast<double>(dec_above) >= 0.95 * static_cast<double>(dec_total));
    // DS pixels should almost never pose as PS seeds.
    CHECK(static_cast<double>(ds_below) <= 0.01 * static_cast<double>(ds_total));
}

TEST_CASE("scene spec parsing") {
    const auto spec = parse_scene_spec(R"({"height": 2, "width": 3, "epochs": 4, "seed": 5,
        "region_map": ["PDX", "WWP"], "classes": {"DS": {"phase_noise": 0.2}}})");
    CHECK(spec.region[1] == ScatterClass::ds);
    CHECK(spec.region[3] == ScatterClass::water);
    CHECK(spec.params[1].phase_noise == 0.2);
    CHECK(spec.params[1].amplitude_mean == default_class_params()[1].amplitude_mean);

    const auto blobs = parse_scene_spec(R"({"height": 20, "width": 10, "epochs": 3, "layout": {"cells": 4}})");
    CHECK(blobs.region.size() == 200);

    CHECK_THROWS_AS(parse_scene_spec("{"), InvalidArgument);
    CHECK_THROWS_AS(parse_scene_spec(R"({"height": 1, "width": 2, "epochs": 3, "region_map": ["PQ"]})"),
                    InvalidArgument);
    CHECK_THROWS_AS(parse_scene_spec(R"({"height": 1, "width": 2, "epochs": 1, "region_map": ["PP"]})"),
                    InvalidArgument);
    CHECK_THROWS_AS(parse_scene_spec(R"({"height": 1, "width": 2, "epochs": 3})"), InvalidArgument);
}

TEST_CASE("class histogram") {
    const std::vector<ScatterClass> r{ScatterClass::ps, ScatterClass::ps, ScatterClass::water};
    const auto h = class_histogram(r);
    CHECK(h[0] == 2);
    CHECK(h[1] == 0);
    CHECK(h[3] == 1);
}
