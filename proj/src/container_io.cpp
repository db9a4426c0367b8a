#include "container_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "triq/error.hpp"

namespace triq::detail {
namespace {

template <class T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

constexpr std::uint64_t kMaxHeaderBytes = 1u << 24;

}  // namespace

ContainerWriter::ContainerWriter(const std::filesystem::path& path, std::string_view magic,
                                 const std::string& header_json)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  out_.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  const std::uint64_t len = to_little<std::uint64_t>(header_json.size());
  out_.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out_.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
}

void ContainerWriter::write_doubles(std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      const double le = to_little(v);
      out_.write(reinterpret_cast<const char*>(&le), sizeof(le));
    }
  }
}

void ContainerWriter::close() {
  out_.close();
  if (!out_) throw IoError("failed writing " + path_.string());
}

ContainerReader::ContainerReader(const std::filesystem::path& path, std::string_view magic)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path.string());
  std::string got(magic.size(), '\0');
  in_.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in_ || got != magic) throw FormatError(path.string() + ": bad magic, expected " + std::string(magic));
  std::uint64_t len = 0;
  in_.read(reinterpret_cast<char*>(&len), sizeof(len));
  len = to_little(len);
  if (!in_ || len > kMaxHeaderBytes) throw FormatError(path.string() + ": bad header length");
  header_.resize(static_cast<std::size_t>(len));
  in_.read(header_.data(), static_cast<std::streamsize>(len));
  if (!in_) throw FormatError(path.string() + ": truncated header");
}

std::vector<double> ContainerReader::read_doubles(std::size_t count) {
  std::vector<double> values(count);
  in_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in_) throw FormatError(path_.string() + ": truncated payload");
  for (double& v : values) v = to_little(v);
  return values;
}

void ContainerReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path_.string() + ": unexpected trailing bytes");
  }
}

}  // namespace triq::detail
