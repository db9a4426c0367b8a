#pragma once

// Shared layout of the binary containers: 8-byte magic, uint64 little-endian
// header length, UTF-8 JSON header, then little-endian float64 payload.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace triq::detail {

class ContainerWriter {
 public:
  ContainerWriter(const std::filesystem::path& path, std::string_view magic, const std::string& header_json);
  void write_doubles(std::span<const double> values);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class ContainerReader {
 public:
  ContainerReader(const std::filesystem::path& path, std::string_view magic);
  const std::string& header() const { return header_; }
  std::vector<double> read_doubles(std::size_t count);
  /// Throws FormatError if trailing bytes remain.
  void expect_end();

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string header_;
};

}  // namespace triq::detail
