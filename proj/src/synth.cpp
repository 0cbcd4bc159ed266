#include "elite/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "elite/errors.hpp"
#include "elite/parallel.hpp"
#include "elite/rng.hpp"

namespace elite::synth {

namespace {

// Stream domains keep layout draws and pixel draws disjoint.
constexpr std::uint64_t kPixelDomain = 1ULL << 40;
constexpr std::uint64_t kLayoutDomain = 2ULL << 40;

ClassParams parse_class_params(const nlohmann::json& j, ClassParams base) {
    base.amplitude_mean = j.value("amplitude_mean", base.amplitude_mean);
    base.amplitude_jitter = j.value("amplitude_jitter", base.amplitude_jitter);
    base.coherence_mean = j.value("coherence_mean", base.coherence_mean);
    base.coherence_jitter = j.value("coherence_jitter", base.coherence_jitter);
    base.phase_noise = j.value("phase_noise", base.phase_noise);
    return base;
}

ScatterClass class_from_char(char c) {
    switch (c) {
    case 'P': return ScatterClass::ps;
    case 'D': return ScatterClass::ds;
    case 'X': return ScatterClass::decorrelated;
    case 'W': return ScatterClass::water;
    default: throw InvalidArgument(std::string("unknown region_map character '") + c + "'");
    }
}

}  // namespace

std::string to_string(ScatterClass c) {
    switch (c) {
    case ScatterClass::ps: return "PS";
    case ScatterClass::ds: return "DS";
    case ScatterClass::decorrelated: return "DECORRELATED";
    case ScatterClass::water: return "WATER";
    }
    return "UNKNOWN";
}

ScatterClass scatter_class_from_string(std::string_view name) {
    if (name == "PS") return ScatterClass::ps;
    if (name == "DS") return ScatterClass::ds;
    if (name == "DECORRELATED") return ScatterClass::decorrelated;
    if (name == "WATER") return ScatterClass::water;
    throw InvalidArgument("unknown scatterer class '" + std::string(name) + "'");
}

std::array<ClassParams, kClassCount> default_class_params() {
    return {{
        {10.0, 0.05, 0.85, 0.05, 0.10},          // PS
        {4.0, 0.50, 0.60, 0.08, 0.40},           // DS
        {3.0, 0.90, 0.15, 0.25, std::numbers::pi},  // DECORRELATED
        {0.1, 0.60, 0.05, 0.05, std::numbers::pi},  // WATER
    }};
}

void SceneSpec::validate() const {
    if (epochs < 2) throw InvalidArgument("scene needs at least 2 epochs");
    if (height < 1 || width < 1) throw InvalidArgument("scene needs positive height and width");
    if (region.size() != height * width) throw InvalidArgument("region map does not cover h*w pixels");
    for (const auto c : region) {
        if (static_cast<std::size_t>(c) >= kClassCount) throw InvalidArgument("region map holds an unknown class");
    }
    for (const auto& p : params) {
        if (!(p.amplitude_mean >= 0.0)) throw InvalidArgument("amplitude mean must be >= 0");
        if (!(p.amplitude_jitter >= 0.0) || !(p.coherence_jitter >= 0.0) || !(p.phase_noise >= 0.0)) {
            throw InvalidArgument("jitter and noise parameters must be >= 0");
        }
        if (!(p.coherence_mean >= 0.0 && p.coherence_mean <= 1.0)) throw InvalidArgument("coherence mean outside [0,1]");
    }
    if (!std::isfinite(deformation_rate)) throw InvalidArgument("deformation rate must be finite");
}

std::vector<ScatterClass> blob_layout(std::size_t height, std::size_t width, std::size_t cells,
                                      const std::array<double, kClassCount>& weights, std::uint64_t seed) {
    if (cells == 0) throw InvalidArgument("layout needs at least one cell");
    double total = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0)) throw InvalidArgument("class weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("class weights sum to zero");

    CounterRng rng(seed, kLayoutDomain);
    struct Site {
        std::int64_t row, col;
        ScatterClass cls;
    };
    std::vector<Site> sites(cells);
    for (auto& s : sites) {
        s.row = static_cast<std::int64_t>(rng.next_below(height));
        s.col = static_cast<std::int64_t>(rng.next_below(width));
        const double u = rng.next_uniform() * total;
        std::size_t chosen = kClassCount;
        double acc = 0.0;
        for (std::size_t k = 0; k < kClassCount; ++k) {
            if (weights[k] == 0.0) continue;
            acc += weights[k];
            chosen = k;
            if (u < acc) break;
        }
        s.cls = static_cast<ScatterClass>(chosen);
    }

    std::vector<ScatterClass> region(height * width);
    parallel_for(height, [&](std::size_t r) {
        for (std::size_t c = 0; c < width; ++c) {
            std::int64_t best = std::numeric_limits<std::int64_t>::max();
            ScatterClass cls = sites.front().cls;
            for (const auto& s : sites) {
                const std::int64_t dr = s.row - static_cast<std::int64_t>(r);
                const std::int64_t dc = s.col - static_cast<std::int64_t>(c);
                const std::int64_t d2 = dr * dr + dc * dc;
                if (d2 < best) {
                    best = d2;
                    cls = s.cls;
                }
            }
            region[r * width + c] = cls;
        }
    });
    return region;
}

SceneSpec parse_scene_spec(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("scene spec is not valid JSON: ") + e.what());
    }
    try {
        SceneSpec spec;
        spec.height = j.at("height").get<std::size_t>();
        spec.width = j.at("width").get<std::size_t>();
        spec.epochs = j.at("epochs").get<std::size_t>();
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.deformation_rate = j.value("deformation_rate", 0.0);
        if (const auto it = j.find("classes"); it != j.end()) {
            for (const auto& [name, params] : it->items()) {
                const auto cls = scatter_class_from_string(name);
                auto& slot = spec.params[static_cast<std::size_t>(cls)];
                slot = parse_class_params(params, slot);
            }
        }
        if (const auto it = j.find("region_map"); it != j.end()) {
            const auto rows = it->get<std::vector<std::string>>();
            if (rows.size() != spec.height) throw InvalidArgument("region_map row count differs from height");
            for (const auto& row : rows) {
                if (row.size() != spec.width) throw InvalidArgument("region_map row length differs from width");
                for (const char c : row) spec.region.push_back(class_from_char(c));
            }
        } else if (const auto lt = j.find("layout"); lt != j.end()) {
            std::array<double, kClassCount> weights{0.25, 0.25, 0.25, 0.25};
            if (const auto wt = lt->find("weights"); wt != lt->end()) {
                weights.fill(0.0);
                for (const auto& [name, w] : wt->items()) {
                    weights[static_cast<std::size_t>(scatter_class_from_string(name))] = w.get<double>();
                }
            }
            spec.region = blob_layout(spec.height, spec.width, lt->value("cells", std::size_t{32}), weights, spec.seed);
        } else {
            throw InvalidArgument("scene spec needs \"region_map\" or \"layout\"");
        }
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("scene spec: ") + e.what());
    }
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Scene scene{io::InterferogramStack(spec.epochs, spec.height, spec.width), io::EliteMask(spec.height, spec.width)};
    auto& stack = scene.stack;
    stack.generator = CounterRng::kAlgorithm;
    stack.seed = spec.seed;

    const std::size_t plane = spec.height * spec.width;
    parallel_for(spec.height, [&](std::size_t r) {
        for (std::size_t c = 0; c < spec.width; ++c) {
            const std::size_t p = r * spec.width + c;
            const auto cls = spec.region[p];
            const auto& cp = spec.params[static_cast<std::size_t>(cls)];
            const bool coherent_phase = cls == ScatterClass::ps || cls == ScatterClass::ds;
            scene.truth.elite[p] = coherent_phase ? 1 : 0;

            CounterRng rng(spec.seed, kPixelDomain + p);
            // Pixel-to-pixel brightness variation; cancels in every dispersion ratio.
            const double brightness = std::exp(0.25 * rng.next_normal());
            const double base = cp.amplitude_mean * brightness;
            for (std::size_t t = 0; t < spec.epochs; ++t) {
                const std::size_t i = t * plane + p;
                const double amp = base * (1.0 + cp.amplitude_jitter * rng.next_normal());
                stack.amplitude[i] = static_cast<float>(std::max(0.0, amp));
                const double coh = cp.coherence_mean + cp.coherence_jitter * rng.next_normal();
                stack.coherence[i] = static_cast<float>(std::clamp(coh, 0.0, 1.0));
                double phi;
                if (coherent_phase) {
                    phi = spec.deformation_rate * static_cast<double>(t) + cp.phase_noise * rng.next_normal();
                } else {
                    phi = -std::numbers::pi + 2.0 * std::numbers::pi * rng.next_uniform();
                }
                stack.phase[i] = io::wrap_phase_f32(phi);
            }
        }
    });
    return scene;
}

std::array<std::size_t, kClassCount> class_histogram(const std::vector<ScatterClass>& region) {
    std::array<std::size_t, kClassCount> h{};
    for (const auto c : region) ++h[static_cast<std::size_t>(c)];
    return h;
}

}  // namespace elite::synth
