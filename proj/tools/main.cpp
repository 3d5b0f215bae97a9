#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ratchet/parallel.hpp"

namespace {

using Command = int (*)(const ratchet::cli::Context&, ratchet::cli::RunManifest&);

const std::map<std::string, std::pair<Command, std::string>>& commands() {
  using namespace ratchet::cli;
  static const std::map<std::string, std::pair<Command, std::string>> table{
      {"floquet-spectrum", {cmd_floquet_spectrum, "Linear quasienergy bands, classes and t0-averaged currents versus theta"}},
      {"continue", {cmd_continue, "Continue a Floquet state in g with perturbative and two-state estimates"}},
      {"current-scan", {cmd_current_scan, "Direct-simulation currents along a theta, g or t0 grid"}},
      {"dimer", {cmd_dimer, "Nonlinear Floquet branches of the driven two-site model"}},
      {"husimi", {cmd_husimi, "Husimi distribution of a saved state"}},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace ratchet;

  CLI::App app{"Nonlinear Floquet states and currents of a driven BEC ratchet"};
  app.set_version_flag("--version", cli::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, seed_state;
  int workers = default_workers();
  bool resume = false;
  for (const auto& [name, entry] : commands()) {
    CLI::App* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed-state,--state", seed_state, "State file (binary, or .txt for text)");
    if (name == "current-scan") sub->add_flag("--resume", resume, "Keep rows already in the output table");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  cli::Context ctx;
  try {
    ctx.config = load_config(config_path);
  } catch (const ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << config_path << ": " << p << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return 1;
  }
  ctx.out_dir = out_dir;
  ctx.workers = workers;
  ctx.seed_state = seed_state;
  ctx.resume = resume;
  const auto problems = cli::command_problems(command, ctx);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << command << ": " << p << '\n';
    return 1;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << out_dir << ": " << ec.message() << '\n';
    return 1;
  }

  cli::RunManifest manifest;
  manifest.command = command;
  manifest.resolved_config = resolved_config_json(ctx.config);
  manifest.config_hash = cli::sha256_hex(manifest.resolved_config);
  if (!seed_state.empty()) manifest.notes.push_back("state file: " + seed_state);

  const auto start = std::chrono::steady_clock::now();
  int code = 1;
  try {
    code = commands().at(command).first(ctx, manifest);
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << '\n';
    manifest.notes.push_back(std::string("error: ") + e.what());
    code = 1;
  }
  manifest.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest.exit_code = code;
  try {
    manifest.write(out_dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return code;
}
