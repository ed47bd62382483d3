#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsplit/config.hpp"
#include "qsplit/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transmission/reflection decomposition of 1D scattering"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  unsigned workers = 0;
  for (const auto& [name, fn] : qsplit::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--workers", workers, "Worker threads (overrides workers)")
        ->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qsplit::kExitSchema;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  qsplit::RunConfig config;
  try {
    config = qsplit::parse_config(config_path);
  } catch (const qsplit::Error& e) {
    std::cerr << e.what() << '\n';
    // Without a valid config the error record goes to --out when given.
    if (!out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(out_dir, ec);
      try {
        qsplit::write_json(std::filesystem::path(out_dir) / "error.json",
                           {{"subcommand", subcommand},
                            {"kind", std::string(qsplit::to_string(e.kind()))},
                            {"operation", e.operation()},
                            {"detail", e.detail()},
                            {"exit_code", qsplit::exit_code(e.kind())}});
      } catch (...) {
      }
    }
    return qsplit::exit_code(e.kind());
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers > 0) config.workers = workers;

  const int code = qsplit::run(subcommand, config);
  if (code != qsplit::kExitOk)
    std::cerr << subcommand << " failed (exit " << code << "), see "
              << (std::filesystem::path(config.output_dir) / "error.json").string() << '\n';
  return code;
}
