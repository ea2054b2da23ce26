#include "rsdkit/common/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rsdkit/common/error.hpp"

namespace rsdkit {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return static_cast<std::uint16_t>(u[0] | (u[1] << 8));
}

std::uint32_t get_u32(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return static_cast<std::uint32_t>(u[0]) | (static_cast<std::uint32_t>(u[1]) << 8) |
         (static_cast<std::uint32_t>(u[2]) << 16) | (static_cast<std::uint32_t>(u[3]) << 24);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ContainerWriter::ContainerWriter(std::string_view magic, std::uint16_t version)
    : magic_(magic), version_(version) {
  if (magic_.size() != 4) throw FormatError("container magic must be 4 bytes");
}

std::uint64_t ContainerWriter::append_f32(std::span<const float> values) {
  const std::uint64_t offset = payload_.size();
  payload_.resize(payload_.size() + values.size_bytes());
  if (!values.empty()) std::memcpy(payload_.data() + offset, values.data(), values.size_bytes());
  return offset;
}

std::string ContainerWriter::serialize(const Json& header) const {
  const std::string text = header.dump();
  std::string out;
  out.reserve(10 + text.size() + payload_.size());
  out.append(magic_);
  put_u16(out, version_);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  out.append(payload_.data(), payload_.size());
  return out;
}

void ContainerWriter::write(const std::filesystem::path& path, const Json& header) const {
  write_file_atomic(path, serialize(header));
}

ContainerReader::ContainerReader(const std::filesystem::path& path, std::string_view expected_magic) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 10) throw FormatError(path.string() + ": truncated container");
  header_.magic = bytes.substr(0, 4);
  if (header_.magic != expected_magic) {
    throw FormatError(path.string() + ": expected magic " + std::string(expected_magic) + ", found " +
                      header_.magic);
  }
  header_.version = get_u16(bytes.data() + 4);
  const std::uint32_t len = get_u32(bytes.data() + 6);
  if (bytes.size() < 10ULL + len) throw FormatError(path.string() + ": truncated header");
  try {
    header_.header = Json::parse(bytes.begin() + 10, bytes.begin() + 10 + len);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": bad header JSON: " + e.what());
  }
  payload_.assign(bytes.begin() + 10 + len, bytes.end());
}

std::vector<float> ContainerReader::read_f32(std::uint64_t offset, std::uint64_t count) const {
  const std::uint64_t nbytes = count * sizeof(float);
  if (offset + nbytes > payload_.size()) {
    throw FormatError("payload range [" + std::to_string(offset) + ", " + std::to_string(offset + nbytes) +
                      ") exceeds payload of " + std::to_string(payload_.size()) + " bytes");
  }
  std::vector<float> out(count);
  if (count) std::memcpy(out.data(), payload_.data() + offset, nbytes);
  return out;
}

}  // namespace rsdkit
