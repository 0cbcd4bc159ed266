#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elite::io {

inline constexpr int kFormatVersion = 1;
inline constexpr std::size_t kPatchSize = 100;

/// Per-epoch, per-pixel amplitude / phase / coherence. Bands are stored as
/// 32-bit floats in (epoch, row, col) row-major order, exactly as on disk.
struct InterferogramStack {
    std::size_t epochs = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> amplitude;
    std::vector<float> phase;
    std::vector<float> coherence;
    /// Optional provenance written to the header (generator id, seed).
    std::string generator;
    std::optional<std::uint64_t> seed;

    InterferogramStack() = default;
    InterferogramStack(std::size_t n_t, std::size_t h, std::size_t w);

    std::size_t plane_size() const noexcept { return height * width; }
    std::size_t index(std::size_t t, std::size_t r, std::size_t c) const noexcept {
        return (t * height + r) * width + c;
    }

    /// Throws InvalidArgument when any invariant (dims, band ranges) fails.
    void validate() const;

    bool operator==(const InterferogramStack&) const = default;
};

/// Per-pixel binary selection plus validity. elite implies valid.
struct EliteMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> elite;
    std::vector<std::uint8_t> valid;

    EliteMask() = default;
    EliteMask(std::size_t h, std::size_t w, bool all_valid = true);

    std::size_t size() const noexcept { return height * width; }
    std::size_t elite_count() const noexcept;
    std::size_t valid_count() const noexcept;
    void validate() const;

    bool operator==(const EliteMask&) const = default;
};

enum class FeatureMode {
    cos_sin,            ///< (cos phi, sin phi)
    cos_sin_amplitude,  ///< adds amplitude / per-pixel temporal mean
    raw_bands,          ///< (amplitude, phase, coherence), untransformed
};

std::size_t feature_count(FeatureMode mode) noexcept;
std::string to_string(FeatureMode mode);
FeatureMode feature_mode_from_string(const std::string& name);

/// Dense (epoch, row, col, feature) planes for a whole scene.
struct FeaturePlanes {
    std::size_t epochs = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t features = 0;
    std::vector<double> data;

    std::size_t index(std::size_t t, std::size_t r, std::size_t c, std::size_t f) const noexcept {
        return ((t * height + r) * width + c) * features + f;
    }
    bool operator==(const FeaturePlanes&) const = default;
};

struct TileOrigin {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const TileOrigin&) const = default;
};

/// Fixed 100x100 tiles: data is [sample][epoch][row][col][feature].
struct PatchBatch {
    std::size_t samples = 0;
    std::size_t epochs = 0;
    std::size_t features = 0;
    std::vector<double> data;
    std::vector<TileOrigin> origin;
    /// [sample][row][col]; false where the tile overhangs the scene.
    std::vector<std::uint8_t> valid;

    static constexpr std::size_t side = kPatchSize;
    static constexpr std::size_t pixels = kPatchSize * kPatchSize;

    std::size_t sample_stride() const noexcept { return epochs * pixels * features; }
    std::span<double> sample(std::size_t s) noexcept {
        return {data.data() + s * sample_stride(), sample_stride()};
    }
    std::span<const double> sample(std::size_t s) const noexcept {
        return {data.data() + s * sample_stride(), sample_stride()};
    }
    std::span<const std::uint8_t> sample_valid(std::size_t s) const noexcept {
        return {valid.data() + s * pixels, pixels};
    }

    /// Copies the listed samples, in order, into a new batch.
    PatchBatch select(std::span<const std::size_t> indices) const;
};

/// Per-tile labels that travel with a PatchBatch: [sample][row][col].
struct PatchLabels {
    std::size_t samples = 0;
    std::vector<std::uint8_t> elite;
    std::vector<std::uint8_t> valid;

    PatchLabels select(std::span<const std::size_t> indices) const;
};

// --- file formats ---------------------------------------------------------

void write_stack(const InterferogramStack& stack, const std::filesystem::path& path);
InterferogramStack read_stack(const std::filesystem::path& path);

void write_mask(const EliteMask& mask, const std::filesystem::path& path);
EliteMask read_mask(const std::filesystem::path& path);

/// Byte-level encoders used by the file writers; exposed for round-trip tests.
std::string encode_stack(const InterferogramStack& stack);
InterferogramStack decode_stack(const std::string& bytes);
std::string encode_mask(const EliteMask& mask);
EliteMask decode_mask(const std::string& bytes);

/// Wraps to [-pi, pi) and rounds to float, keeping the float inside the
/// interval (float(pi) > pi, so values that round up are folded to the
/// smallest float >= -pi).
float wrap_phase_f32(double radians) noexcept;

// --- transforms -----------------------------------------------------------

/// Keeps epochs round(k (n_t - 1) / (m - 1)), k = 0..m-1, half away from zero.
std::vector<std::size_t> temporal_indices(std::size_t n_t, std::size_t m);
InterferogramStack temporal_sample(const InterferogramStack& stack, std::size_t m);

FeaturePlanes phase_to_features(const InterferogramStack& stack, FeatureMode mode = FeatureMode::cos_sin);

/// Non-overlapping stride-100 tiling from (0, 0), row-major over the tile
/// grid, zero padding past the scene edge.
PatchBatch extract_patches(const FeaturePlanes& planes);
PatchBatch extract_patches(const InterferogramStack& stack, FeatureMode mode = FeatureMode::cos_sin);
PatchLabels extract_label_patches(const EliteMask& mask);

/// Inverse of extract_patches. Throws StructuralError unless the origins are
/// exactly the tile grid of a target_h x target_w scene, each once.
FeaturePlanes reassemble_patches(const PatchBatch& batch, std::size_t target_h, std::size_t target_w);

}  // namespace elite::io
