#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace gnnqec::cli {

struct Context {
  std::ostream& out;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // first entry is the primary artifact
  std::optional<std::uint64_t> seed;

  void input(const std::string& path) { inputs.push_back(path); }
  void output(const std::string& path) { outputs.push_back(path); }
};

struct Command {
  CLI::App* app = nullptr;
  std::function<void(Context&)> handler;
};

void register_commands(CLI::App& app, std::vector<Command>& commands);

}  // namespace gnnqec::cli
