#pragma once

// Internal helpers shared by the stack, mask, and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "elite/errors.hpp"

namespace elite::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

struct HeaderSplit {
    nlohmann::ordered_json header;
    std::size_t payload_offset = 0;
};

/// Parses the leading UTF-8 JSON line. Throws FormatError(malformed_header).
HeaderSplit split_header(const std::string& bytes);

/// Checks "version" against `expected`; throws version_mismatch / malformed_header.
void require_version(const nlohmann::ordered_json& header, int expected);

template <typename T>
T byteswap_value(T value) noexcept {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    std::memcpy(&value, raw, sizeof(T));
    return value;
}

/// Appends values as little-endian bytes.
template <typename T>
void append_le(std::string& out, std::span<const T> values) {
    const std::size_t start = out.size();
    out.resize(start + values.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data() + start, values.data(), values.size_bytes());
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const T swapped = byteswap_value(values[i]);
            std::memcpy(out.data() + start + i * sizeof(T), &swapped, sizeof(T));
        }
    }
}

/// Reads values.size() little-endian values starting at `offset`.
template <typename T>
void read_le(const std::string& bytes, std::size_t offset, std::span<T> values) {
    std::memcpy(values.data(), bytes.data() + offset, values.size_bytes());
    if constexpr (std::endian::native != std::endian::little) {
        for (auto& v : values) v = byteswap_value(v);
    }
}

}  // namespace elite::detail
