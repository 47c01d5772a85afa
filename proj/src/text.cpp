#include "gnnqec/text.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gnnqec/errors.hpp"

namespace gnnqec::text {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw DomainError("cannot format floating-point value");
  }
  return std::string(buf.data(), ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MalformedFileError("cannot open '" + path + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DomainError("cannot open '" + path + "' for writing");
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    throw DomainError("short write to '" + path + "'");
  }
}

}  // namespace gnnqec::text
