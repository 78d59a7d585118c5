#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Little-endian float32 vector files shared by the embedding cache, the
// index and the adapter. Layout: "RKV1" | dim (u32 LE) | float32 LE values.

namespace riskrank::binio {

inline constexpr char kVectorMagic[4] = {'R', 'K', 'V', '1'};

void append_u32_le(std::string& out, std::uint32_t v);
void append_f32_le(std::string& out, float v);
std::uint32_t read_u32_le(const unsigned char* p);
float read_f32_le(const unsigned char* p);

/// Encodes `rows` consecutive vectors of length `dim` (values.size() must be a
/// multiple of dim).
std::string encode_vectors(std::uint32_t dim, std::span<const float> values);

struct DecodedVectors {
  std::uint32_t dim = 0;
  std::vector<float> values;
};

/// Throws CorruptFile naming `origin` on bad magic, zero dim or a payload
/// that is not a whole number of rows. When `expected_rows` is set the row
/// count must match exactly.
DecodedVectors decode_vectors(const std::string& bytes, const std::string& origin,
                              std::optional<std::size_t> expected_rows = std::nullopt);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace riskrank::binio
