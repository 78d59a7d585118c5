#include "riskrank/binio.hpp"

#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "riskrank/errors.hpp"

namespace riskrank::binio {

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void append_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  append_u32_le(out, bits);
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = read_u32_le(p);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string encode_vectors(std::uint32_t dim, std::span<const float> values) {
  if (dim == 0 || values.size() % dim != 0) {
    throw InvalidArgument("encode_vectors: value count is not a multiple of dim");
  }
  std::string out;
  out.reserve(8 + 4 * values.size());
  out.append(kVectorMagic, 4);
  append_u32_le(out, dim);
  for (float v : values) append_f32_le(out, v);
  return out;
}

DecodedVectors decode_vectors(const std::string& bytes, const std::string& origin,
                              std::optional<std::size_t> expected_rows) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kVectorMagic, 4) != 0) {
    throw CorruptFile(origin + ": bad magic or truncated header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  DecodedVectors out;
  out.dim = read_u32_le(p + 4);
  if (out.dim == 0) throw CorruptFile(origin + ": dim is zero");
  const std::size_t payload = bytes.size() - 8;
  const std::size_t row_bytes = 4ull * out.dim;
  if (payload % row_bytes != 0) {
    throw CorruptFile(origin + ": payload length " + std::to_string(payload) +
                      " is not a multiple of dim " + std::to_string(out.dim));
  }
  const std::size_t rows = payload / row_bytes;
  if (expected_rows && rows != *expected_rows) {
    throw CorruptFile(origin + ": expected " + std::to_string(*expected_rows) + " rows, found " +
                      std::to_string(rows));
  }
  out.values.resize(rows * out.dim);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = read_f32_le(p + 8 + 4 * i);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move file into place: " + path.string());
  }
}

}  // namespace riskrank::binio
