#pragma once

#include <string>
#include <string_view>

namespace gnnqec::text {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace gnnqec::text
