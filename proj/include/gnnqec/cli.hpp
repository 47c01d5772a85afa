#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gnnqec::cli {

// Exit codes: 0 success, 1 domain or file error, 2 usage error. Diagnostics go
// to `err` as one JSON object per line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace gnnqec::cli
