#include "binary_io.hpp"

#include <fstream>
#include <iterator>

namespace elite::detail {

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw FormatError(FormatErrc::io_failure, "read failed for " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrc::io_failure, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatErrc::io_failure, "write failed for " + path.string());
}

HeaderSplit split_header(const std::string& bytes) {
    const auto newline = bytes.find('\n');
    if (newline == std::string::npos) {
        throw FormatError(FormatErrc::malformed_header, "no newline-terminated header line");
    }
    HeaderSplit split;
    try {
        split.header = nlohmann::ordered_json::parse(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(newline));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(FormatErrc::malformed_header, e.what());
    }
    if (!split.header.is_object()) throw FormatError(FormatErrc::malformed_header, "header is not a JSON object");
    split.payload_offset = newline + 1;
    return split;
}

void require_version(const nlohmann::ordered_json& header, int expected) {
    const auto it = header.find("version");
    if (it == header.end() || !it->is_number_integer()) {
        throw FormatError(FormatErrc::malformed_header, "missing integer \"version\"");
    }
    const auto version = it->get<long long>();
    if (version != expected) {
        throw FormatError(FormatErrc::version_mismatch,
                          "file version " + std::to_string(version) + ", reader supports " + std::to_string(expected));
    }
}

}  // namespace elite::detail
