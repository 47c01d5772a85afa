#include "gnnqec/cli.hpp"

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "commands.hpp"
#include "gnnqec/errors.hpp"
#include "gnnqec/hwsim.hpp"
#include "gnnqec/text.hpp"
#include "manifest.hpp"

namespace gnnqec::cli {

namespace {

void diagnostic(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

// Every option of the chosen subcommand, given or defaulted, as --name value.
RunManifest canonical(const CLI::App& sub) {
  RunManifest m;
  m.command = sub.get_name();
  m.argv.push_back(m.command);
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help") continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (!opt->get_default_str().empty()) {
      values = {opt->get_default_str()};
    } else {
      continue;
    }
    m.argv.push_back("--" + name);
    m.argv.insert(m.argv.end(), values.begin(), values.end());
    m.parameters.emplace_back(name, std::move(values));
  }
  return m;
}

int rerun(const std::string& manifest_path, const std::string& out_override, std::ostream& out,
          std::ostream& err) {
  const auto m = RunManifest::from_json(text::read_file(manifest_path));
  if (m.calibration_sha256 != calibration_digest()) {
    throw DomainError("calibration differs from the one recorded in " + manifest_path);
  }
  auto args = m.argv;
  if (!out_override.empty()) {
    if (m.outputs.empty()) throw DomainError("manifest records no output to redirect");
    const auto& old_out = m.outputs.front().path;
    for (auto& a : args) {
      if (a.compare(0, old_out.size(), old_out) == 0) a = out_override + a.substr(old_out.size());
    }
  }
  return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Syndrome-graph GNN decoder toolkit", "gnnqec"};
  app.set_version_flag("--version", std::string("gnnqec ") + GNNQEC_VERSION);
  app.require_subcommand(1, 1);
  std::vector<Command> commands;
  register_commands(app, commands);

  std::string manifest_path;
  std::string rerun_out;
  auto* again = app.add_subcommand("rerun", "Re-execute a run manifest");
  again->add_option("--manifest", manifest_path, "Manifest written next to an output")->required();
  again->add_option("--out", rerun_out, "Write the primary output here instead");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "gnnqec " << GNNQEC_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    diagnostic(err, "usage_error", e.what());
    return 2;
  }

  try {
    if (again->parsed()) return rerun(manifest_path, rerun_out, out, err);
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      if (c.app->get_help_ptr() && c.app->get_help_ptr()->count() > 0) {
        out << c.app->help();
        return 0;
      }
      Context ctx{out, {}, {}, std::nullopt};
      c.handler(ctx);
      if (!ctx.outputs.empty()) {
        auto manifest = canonical(*c.app);
        manifest.tool_version = GNNQEC_VERSION;
        manifest.seed = ctx.seed;
        for (const auto& p : ctx.inputs) manifest.inputs.push_back({p, sha256_file(p)});
        for (const auto& p : ctx.outputs) manifest.outputs.push_back({p, sha256_file(p)});
        manifest.calibration_path = hwsim::calibration_path();
        manifest.calibration_sha256 = calibration_digest();
        text::write_file(ctx.outputs.front() + ".manifest.json", manifest.to_json());
      }
      return 0;
    }
    diagnostic(err, "usage_error", "no subcommand given");
    return 2;
  } catch (const Error& e) {
    diagnostic(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    diagnostic(err, "internal_error", e.what());
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace gnnqec::cli
