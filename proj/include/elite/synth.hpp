#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "elite/stack_io.hpp"

namespace elite::synth {

enum class ScatterClass : std::uint8_t { ps = 0, ds = 1, decorrelated = 2, water = 3 };
inline constexpr std::size_t kClassCount = 4;

std::string to_string(ScatterClass c);
ScatterClass scatter_class_from_string(std::string_view name);

struct ClassParams {
    double amplitude_mean = 1.0;
    double amplitude_jitter = 0.0;  ///< relative std of the amplitude series
    double coherence_mean = 0.5;
    double coherence_jitter = 0.0;  ///< absolute std before clamping to [0, 1]
    double phase_noise = 0.0;       ///< radians; ignored for classes with uniform phase

    bool operator==(const ClassParams&) const = default;
};

/// Shipped defaults, chosen so amplitude dispersion separates PS from
/// decorrelated pixels at the 0.25 threshold. Mirrored in
/// tests/fixtures/default_class_params.json.
std::array<ClassParams, kClassCount> default_class_params();

struct SceneSpec {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t epochs = 0;
    std::vector<ScatterClass> region;  ///< row-major, one class per pixel
    std::uint64_t seed = 0;
    std::array<ClassParams, kClassCount> params = default_class_params();
    double deformation_rate = 0.0;  ///< radians per epoch, shared by every class

    void validate() const;
};

/// Seeded Voronoi-blob region map: `cells` random sites, each labelled by a
/// class drawn with the given weights; every pixel takes its nearest site's
/// class.
std::vector<ScatterClass> blob_layout(std::size_t height, std::size_t width, std::size_t cells,
                                      const std::array<double, kClassCount>& weights, std::uint64_t seed);

/// Parses the JSON scene description used by the CLI. The region comes
/// either from "region_map" (one string per row, characters P/D/X/W) or from
/// a "layout" block {"cells": n, "weights": {"PS": .., ...}}.
SceneSpec parse_scene_spec(std::string_view json_text);

struct Scene {
    io::InterferogramStack stack;
    io::EliteMask truth;  ///< PS and DS pixels marked elite
};

/// Deterministic in spec.seed; pixel (r, c) draws only from its own stream,
/// so generation order does not matter.
Scene generate_scene(const SceneSpec& spec);

std::array<std::size_t, kClassCount> class_histogram(const std::vector<ScatterClass>& region);

}  // namespace elite::synth
