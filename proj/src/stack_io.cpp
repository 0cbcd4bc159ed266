#include "elite/stack_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "elite/errors.hpp"
#include "elite/parallel.hpp"

namespace elite::io {

using nlohmann::ordered_json;

namespace {

constexpr const char* kBands[] = {"amplitude", "phase", "coherence"};
constexpr const char* kMaskBands[] = {"elite", "valid"};

std::size_t require_dim(const ordered_json& header, const char* key, std::size_t minimum) {
    const auto it = header.find(key);
    if (it == header.end() || !it->is_number_integer()) {
        throw FormatError(FormatErrc::malformed_header, std::string("missing integer \"") + key + "\"");
    }
    const auto value = it->get<long long>();
    if (value < static_cast<long long>(minimum)) {
        throw FormatError(FormatErrc::malformed_header,
                          std::string("\"") + key + "\" = " + std::to_string(value) + " is below " + std::to_string(minimum));
    }
    return static_cast<std::size_t>(value);
}

void require_string(const ordered_json& header, const char* key, const char* expected) {
    const auto it = header.find(key);
    if (it == header.end() || !it->is_string() || it->get<std::string>() != expected) {
        throw FormatError(FormatErrc::malformed_header, std::string("\"") + key + "\" must be \"" + expected + "\"");
    }
}

template <std::size_t N>
void require_bands(const ordered_json& header, const char* const (&expected)[N]) {
    const auto it = header.find("bands");
    bool ok = it != header.end() && it->is_array() && it->size() == N;
    for (std::size_t i = 0; ok && i < N; ++i) {
        ok = (*it)[i].is_string() && (*it)[i].get<std::string>() == expected[i];
    }
    if (!ok) throw FormatError(FormatErrc::malformed_header, "unexpected \"bands\" list");
}

void check_payload(std::size_t available, std::size_t expected) {
    if (available < expected) {
        throw FormatError(FormatErrc::truncated_payload,
                          "payload has " + std::to_string(available) + " bytes, header implies " + std::to_string(expected));
    }
    if (available > expected) {
        throw FormatError(FormatErrc::trailing_data,
                          std::to_string(available - expected) + " bytes beyond the declared payload");
    }
}

std::size_t tiles_along(std::size_t extent) { return (extent + kPatchSize - 1) / kPatchSize; }

}  // namespace

// --- types -------------------------------------------------------------------

InterferogramStack::InterferogramStack(std::size_t n_t, std::size_t h, std::size_t w)
    : epochs(n_t), height(h), width(w), amplitude(n_t * h * w), phase(n_t * h * w), coherence(n_t * h * w) {}

void InterferogramStack::validate() const {
    if (epochs < 2) throw InvalidArgument("stack needs at least 2 epochs");
    if (height < 1 || width < 1) throw InvalidArgument("stack needs positive height and width");
    const std::size_t n = epochs * height * width;
    if (amplitude.size() != n || phase.size() != n || coherence.size() != n) {
        throw InvalidArgument("stack band length does not match n_t*h*w");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(amplitude[i] >= 0.0f)) throw InvalidArgument("negative or NaN amplitude at element " + std::to_string(i));
        if (!(coherence[i] >= 0.0f && coherence[i] <= 1.0f)) {
            throw InvalidArgument("coherence outside [0,1] at element " + std::to_string(i));
        }
        const double p = phase[i];
        if (!(p >= -std::numbers::pi && p < std::numbers::pi)) {
            throw InvalidArgument("phase outside [-pi, pi) at element " + std::to_string(i));
        }
    }
}

EliteMask::EliteMask(std::size_t h, std::size_t w, bool all_valid)
    : height(h), width(w), elite(h * w, 0), valid(h * w, all_valid ? 1 : 0) {}

std::size_t EliteMask::elite_count() const noexcept {
    return static_cast<std::size_t>(std::count(elite.begin(), elite.end(), std::uint8_t{1}));
}

std::size_t EliteMask::valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

void EliteMask::validate() const {
    if (elite.size() != size() || valid.size() != size()) throw InvalidArgument("mask plane length does not match h*w");
    for (std::size_t i = 0; i < size(); ++i) {
        if (elite[i] > 1 || valid[i] > 1) throw InvalidArgument("mask values must be 0 or 1");
        if (elite[i] && !valid[i]) throw InvalidArgument("elite pixel outside the valid region");
    }
}

std::size_t feature_count(FeatureMode mode) noexcept {
    switch (mode) {
    case FeatureMode::cos_sin: return 2;
    case FeatureMode::cos_sin_amplitude: return 3;
    case FeatureMode::raw_bands: return 3;
    }
    return 0;
}

std::string to_string(FeatureMode mode) {
    switch (mode) {
    case FeatureMode::cos_sin: return "cos_sin";
    case FeatureMode::cos_sin_amplitude: return "cos_sin_amplitude";
    case FeatureMode::raw_bands: return "raw_bands";
    }
    return "unknown";
}

FeatureMode feature_mode_from_string(const std::string& name) {
    if (name == "cos_sin") return FeatureMode::cos_sin;
    if (name == "cos_sin_amplitude") return FeatureMode::cos_sin_amplitude;
    if (name == "raw_bands") return FeatureMode::raw_bands;
    throw InvalidArgument("unknown feature mode '" + name + "'");
}

PatchBatch PatchBatch::select(std::span<const std::size_t> indices) const {
    PatchBatch out;
    out.samples = indices.size();
    out.epochs = epochs;
    out.features = features;
    out.data.reserve(indices.size() * sample_stride());
    out.valid.reserve(indices.size() * pixels);
    for (const auto s : indices) {
        if (s >= samples) throw InvalidArgument("sample index out of range");
        const auto src = sample(s);
        out.data.insert(out.data.end(), src.begin(), src.end());
        const auto v = sample_valid(s);
        out.valid.insert(out.valid.end(), v.begin(), v.end());
        out.origin.push_back(origin[s]);
    }
    return out;
}

PatchLabels PatchLabels::select(std::span<const std::size_t> indices) const {
    PatchLabels out;
    out.samples = indices.size();
    constexpr auto px = PatchBatch::pixels;
    for (const auto s : indices) {
        if (s >= samples) throw InvalidArgument("sample index out of range");
        out.elite.insert(out.elite.end(), elite.begin() + s * px, elite.begin() + (s + 1) * px);
        out.valid.insert(out.valid.end(), valid.begin() + s * px, valid.begin() + (s + 1) * px);
    }
    return out;
}

// --- stack file ----------------------------------------------------------------

std::string encode_stack(const InterferogramStack& stack) {
    stack.validate();
    ordered_json header;
    header["version"] = kFormatVersion;
    header["n_t"] = stack.epochs;
    header["h"] = stack.height;
    header["w"] = stack.width;
    header["bands"] = {kBands[0], kBands[1], kBands[2]};
    header["endian"] = "little";
    header["dtype"] = "f32";
    if (!stack.generator.empty()) header["generator"] = stack.generator;
    if (stack.seed) header["seed"] = *stack.seed;

    std::string bytes = header.dump();
    bytes.push_back('\n');
    bytes.reserve(bytes.size() + 3 * stack.amplitude.size() * sizeof(float));
    detail::append_le<float>(bytes, stack.amplitude);
    detail::append_le<float>(bytes, stack.phase);
    detail::append_le<float>(bytes, stack.coherence);
    return bytes;
}

InterferogramStack decode_stack(const std::string& bytes) {
    const auto split = detail::split_header(bytes);
    const auto& header = split.header;
    detail::require_version(header, kFormatVersion);
    const auto n_t = require_dim(header, "n_t", 2);
    const auto h = require_dim(header, "h", 1);
    const auto w = require_dim(header, "w", 1);
    require_bands(header, kBands);
    require_string(header, "endian", "little");
    require_string(header, "dtype", "f32");

    InterferogramStack stack(n_t, h, w);
    const std::size_t n = n_t * h * w;
    check_payload(bytes.size() - split.payload_offset, 3 * n * sizeof(float));
    std::size_t offset = split.payload_offset;
    detail::read_le<float>(bytes, offset, stack.amplitude);
    offset += n * sizeof(float);
    detail::read_le<float>(bytes, offset, stack.phase);
    offset += n * sizeof(float);
    detail::read_le<float>(bytes, offset, stack.coherence);

    if (const auto it = header.find("generator"); it != header.end() && it->is_string()) {
        stack.generator = it->get<std::string>();
    }
    if (const auto it = header.find("seed"); it != header.end() && it->is_number_unsigned()) {
        stack.seed = it->get<std::uint64_t>();
    }
    return stack;
}

void write_stack(const InterferogramStack& stack, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_stack(stack));
}

InterferogramStack read_stack(const std::filesystem::path& path) {
    return decode_stack(detail::read_file_bytes(path));
}

// --- mask file -----------------------------------------------------------------

std::string encode_mask(const EliteMask& mask) {
    mask.validate();
    ordered_json header;
    header["version"] = kFormatVersion;
    header["h"] = mask.height;
    header["w"] = mask.width;
    header["bands"] = {kMaskBands[0], kMaskBands[1]};
    header["endian"] = "little";
    header["dtype"] = "u8";
    std::string bytes = header.dump();
    bytes.push_back('\n');
    bytes.append(reinterpret_cast<const char*>(mask.elite.data()), mask.elite.size());
    bytes.append(reinterpret_cast<const char*>(mask.valid.data()), mask.valid.size());
    return bytes;
}

EliteMask decode_mask(const std::string& bytes) {
    const auto split = detail::split_header(bytes);
    const auto& header = split.header;
    detail::require_version(header, kFormatVersion);
    const auto h = require_dim(header, "h", 1);
    const auto w = require_dim(header, "w", 1);
    require_bands(header, kMaskBands);
    require_string(header, "endian", "little");
    require_string(header, "dtype", "u8");

    EliteMask mask(h, w);
    check_payload(bytes.size() - split.payload_offset, 2 * h * w);
    const char* payload = bytes.data() + split.payload_offset;
    std::copy_n(payload, h * w, reinterpret_cast<char*>(mask.elite.data()));
    std::copy_n(payload + h * w, h * w, reinterpret_cast<char*>(mask.valid.data()));
    try {
        mask.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrc::malformed_header, std::string("mask payload: ") + e.what());
    }
    return mask;
}

void write_mask(const EliteMask& mask, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_mask(mask));
}

EliteMask read_mask(const std::filesystem::path& path) {
    return decode_mask(detail::read_file_bytes(path));
}

float wrap_phase_f32(double radians) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(radians + std::numbers::pi, two_pi);
    if (w < 0.0) w += two_pi;
    w -= std::numbers::pi;
    const float lowest = std::nextafter(static_cast<float>(-std::numbers::pi), 0.0f);
    const float f = static_cast<float>(w);
    if (static_cast<double>(f) >= std::numbers::pi || static_cast<double>(f) < -std::numbers::pi) return lowest;
    return f;
}

// --- temporal sampling -------------------------------------------------------------

std::vector<std::size_t> temporal_indices(std::size_t n_t, std::size_t m) {
    if (m < 2 || m > n_t) {
        throw InvalidArgument("temporal sample size " + std::to_string(m) + " outside [2, " + std::to_string(n_t) + "]");
    }
    // Exact integer form of round-half-away-from-zero on k (n_t - 1) / (m - 1).
    const std::size_t den = m - 1;
    std::vector<std::size_t> idx(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t num = k * (n_t - 1);
        std::size_t q = num / den;
        if (2 * (num % den) >= den) ++q;
        idx[k] = q;
    }
    return idx;
}

InterferogramStack temporal_sample(const InterferogramStack& stack, std::size_t m) {
    const auto idx = temporal_indices(stack.epochs, m);
    InterferogramStack out(idx.size(), stack.height, stack.width);
    out.generator = stack.generator;
    out.seed = stack.seed;
    const std::size_t plane = stack.plane_size();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto src = static_cast<std::ptrdiff_t>(idx[k] * plane);
        const auto dst = static_cast<std::ptrdiff_t>(k * plane);
        const auto len = static_cast<std::ptrdiff_t>(plane);
        std::copy(stack.amplitude.begin() + src, stack.amplitude.begin() + src + len, out.amplitude.begin() + dst);
        std::copy(stack.phase.begin() + src, stack.phase.begin() + src + len, out.phase.begin() + dst);
        std::copy(stack.coherence.begin() + src, stack.coherence.begin() + src + len, out.coherence.begin() + dst);
    }
    return out;
}

// --- features ------------------------------------------------------------------

FeaturePlanes phase_to_features(const InterferogramStack& stack, FeatureMode mode) {
    stack.validate();
    FeaturePlanes planes;
    planes.epochs = stack.epochs;
    planes.height = stack.height;
    planes.width = stack.width;
    planes.features = feature_count(mode);
    planes.data.assign(planes.epochs * planes.height * planes.width * planes.features, 0.0);

    const std::size_t plane = stack.plane_size();
    std::vector<double> mean_amplitude;
    if (mode == FeatureMode::cos_sin_amplitude) {
        mean_amplitude.assign(plane, 0.0);
        for (std::size_t t = 0; t < stack.epochs; ++t) {
            for (std::size_t p = 0; p < plane; ++p) mean_amplitude[p] += stack.amplitude[t * plane + p];
        }
        for (auto& m : mean_amplitude) m /= static_cast<double>(stack.epochs);
    }

    const std::size_t f = planes.features;
    for (std::size_t t = 0; t < stack.epochs; ++t) {
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t src = t * plane + p;
            double* dst = planes.data.data() + src * f;
            switch (mode) {
            case FeatureMode::raw_bands:
                dst[0] = stack.amplitude[src];
                dst[1] = stack.phase[src];
                dst[2] = stack.coherence[src];
                break;
            case FeatureMode::cos_sin_amplitude:
                dst[2] = mean_amplitude[p] > 0.0 ? stack.amplitude[src] / mean_amplitude[p] : 0.0;
                [[fallthrough]];
            case FeatureMode::cos_sin: {
                const double phi = stack.phase[src];
                dst[0] = std::cos(phi);
                dst[1] = std::sin(phi);
                break;
            }
            }
        }
    }
    return planes;
}

// --- patching ------------------------------------------------------------------

PatchBatch extract_patches(const FeaturePlanes& planes) {
    if (planes.height < 1 || planes.width < 1 || planes.epochs < 1 || planes.features < 1) {
        throw InvalidArgument("feature planes must be non-empty");
    }
    const std::size_t tiles_r = tiles_along(planes.height);
    const std::size_t tiles_c = tiles_along(planes.width);
    const std::size_t f = planes.features;

    PatchBatch batch;
    batch.samples = tiles_r * tiles_c;
    batch.epochs = planes.epochs;
    batch.features = f;
    batch.data.assign(batch.samples * batch.sample_stride(), 0.0);
    batch.valid.assign(batch.samples * PatchBatch::pixels, 0);
    batch.origin.resize(batch.samples);

    parallel_for(batch.samples, [&](std::size_t s) {
        const TileOrigin o{(s / tiles_c) * kPatchSize, (s % tiles_c) * kPatchSize};
        batch.origin[s] = o;
        const std::size_t rows = std::min(kPatchSize, planes.height - o.row);
        const std::size_t cols = std::min(kPatchSize, planes.width - o.col);
        auto* valid = batch.valid.data() + s * PatchBatch::pixels;
        for (std::size_t r = 0; r < rows; ++r) {
            std::fill_n(valid + r * kPatchSize, cols, std::uint8_t{1});
        }
        double* dst = batch.data.data() + s * batch.sample_stride();
        for (std::size_t t = 0; t < planes.epochs; ++t) {
            for (std::size_t r = 0; r < rows; ++r) {
                const double* src = planes.data.data() + planes.index(t, o.row + r, o.col, 0);
                std::copy_n(src, cols * f, dst + ((t * kPatchSize + r) * kPatchSize) * f);
            }
        }
    });
    return batch;
}

PatchBatch extract_patches(const InterferogramStack& stack, FeatureMode mode) {
    return extract_patches(phase_to_features(stack, mode));
}

PatchLabels extract_label_patches(const EliteMask& mask) {
    mask.validate();
    const std::size_t tiles_r = tiles_along(mask.height);
    const std::size_t tiles_c = tiles_along(mask.width);
    PatchLabels labels;
    labels.samples = tiles_r * tiles_c;
    labels.elite.assign(labels.samples * PatchBatch::pixels, 0);
    labels.valid.assign(labels.samples * PatchBatch::pixels, 0);
    for (std::size_t s = 0; s < labels.samples; ++s) {
        const std::size_t r0 = (s / tiles_c) * kPatchSize;
        const std::size_t c0 = (s % tiles_c) * kPatchSize;
        const std::size_t rows = std::min(kPatchSize, mask.height - r0);
        const std::size_t cols = std::min(kPatchSize, mask.width - c0);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t src = (r0 + r) * mask.width + c0;
            const std::size_t dst = s * PatchBatch::pixels + r * kPatchSize;
            std::copy_n(mask.elite.begin() + static_cast<std::ptrdiff_t>(src), cols, labels.elite.begin() + static_cast<std::ptrdiff_t>(dst));
            std::copy_n(mask.valid.begin() + static_cast<std::ptrdiff_t>(src), cols, labels.valid.begin() + static_cast<std::ptrdiff_t>(dst));
        }
    }
    return labels;
}

FeaturePlanes reassemble_patches(const PatchBatch& batch, std::size_t target_h, std::size_t target_w) {
    if (target_h < 1 || target_w < 1) throw InvalidArgument("target dimensions must be positive");
    if (batch.origin.size() != batch.samples || batch.data.size() != batch.samples * batch.sample_stride()) {
        throw StructuralError("patch batch arrays are inconsistent with its sample count");
    }
    const std::size_t tiles_r = tiles_along(target_h);
    const std::size_t tiles_c = tiles_along(target_w);
    std::vector<std::size_t> owner(tiles_r * tiles_c, batch.samples);
    for (std::size_t s = 0; s < batch.samples; ++s) {
        const auto o = batch.origin[s];
        if (o.row % kPatchSize != 0 || o.col % kPatchSize != 0 || o.row >= target_h || o.col >= target_w) {
            throw StructuralError("tile origin (" + std::to_string(o.row) + ", " + std::to_string(o.col) +
                                  ") is not on the target tile grid");
        }
        auto& slot = owner[(o.row / kPatchSize) * tiles_c + o.col / kPatchSize];
        if (slot != batch.samples) {
            throw StructuralError("tile origin (" + std::to_string(o.row) + ", " + std::to_string(o.col) + ") appears twice");
        }
        slot = s;
    }
    for (std::size_t g = 0; g < owner.size(); ++g) {
        if (owner[g] == batch.samples) {
            throw StructuralError("missing tile at (" + std::to_string((g / tiles_c) * kPatchSize) + ", " +
                                  std::to_string((g % tiles_c) * kPatchSize) + ")");
        }
    }

    FeaturePlanes planes;
    planes.epochs = batch.epochs;
    planes.height = target_h;
    planes.width = target_w;
    planes.features = batch.features;
    planes.data.assign(batch.epochs * target_h * target_w * batch.features, 0.0);
    const std::size_t f = batch.features;
    parallel_for(owner.size(), [&](std::size_t g) {
        const std::size_t s = owner[g];
        const auto o = batch.origin[s];
        const std::size_t rows = std::min(kPatchSize, target_h - o.row);
        const std::size_t cols = std::min(kPatchSize, target_w - o.col);
        const double* src = batch.data.data() + s * batch.sample_stride();
        for (std::size_t t = 0; t < batch.epochs; ++t) {
            for (std::size_t r = 0; r < rows; ++r) {
                std::copy_n(src + ((t * kPatchSize + r) * kPatchSize) * f, cols * f,
                            planes.data.data() + planes.index(t, o.row + r, o.col, 0));
            }
        }
    });
    return planes;
}

}  // namespace elite::io
