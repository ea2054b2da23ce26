#pragma once

// Binary container shared by dataset (RSDS), feature (RSDF) and checkpoint
// (RSDC) files:
//
//   magic[4] | version u16 LE | header_len u32 LE | header JSON | payload
//
// Payload offsets recorded in the header are relative to the payload start.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rsdkit {

using Json = nlohmann::json;

struct ContainerHeader {
  std::string magic;
  std::uint16_t version = 0;
  Json header;
};

class ContainerWriter {
 public:
  ContainerWriter(std::string_view magic, std::uint16_t version);

  // Appends raw little-endian f32 values to the payload, returning the
  // payload offset at which they start.
  std::uint64_t append_f32(std::span<const float> values);
  std::uint64_t payload_size() const noexcept { return payload_.size(); }

  // Writes atomically (temp file + rename).
  void write(const std::filesystem::path& path, const Json& header) const;
  std::string serialize(const Json& header) const;

 private:
  std::string magic_;
  std::uint16_t version_;
  std::vector<char> payload_;
};

class ContainerReader {
 public:
  ContainerReader(const std::filesystem::path& path, std::string_view expected_magic);

  const ContainerHeader& header() const noexcept { return header_; }
  std::vector<float> read_f32(std::uint64_t offset, std::uint64_t count) const;
  std::uint64_t payload_size() const noexcept { return payload_.size(); }

 private:
  ContainerHeader header_;
  std::vector<char> payload_;
};

// Little-endian helpers, exposed for tests.
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
std::uint16_t get_u16(const char* p);
std::uint32_t get_u32(const char* p);

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace rsdkit
