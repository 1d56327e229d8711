#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace medregion {

using Json = nlohmann::ordered_json;

// Throws IoError when the file cannot be opened or read.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

// gzip helpers (zlib); used for ".nii.gz".
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> bytes);

// Parses a JSON document; throws SchemaViolation with the path in the message.
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);

// Little-endian float32 blobs.
void append_f32_le(std::vector<std::uint8_t>& out, std::span<const float> values);
std::vector<float> decode_f32_le(std::span<const std::uint8_t> bytes);

// Path with `suffix` replacing the extension (".json" -> ".bin").
std::filesystem::path sibling_with_extension(const std::filesystem::path& path,
                                             std::string_view suffix);

// Resolves `p` against `base_dir` unless it is absolute.
std::filesystem::path resolve_relative(const std::filesystem::path& base_dir,
                                       const std::filesystem::path& p);

}  // namespace medregion
