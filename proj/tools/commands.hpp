#pragma once

#include <string>
#include <vector>

#include "manifest.hpp"
#include "ratchet/config.hpp"

namespace ratchet::cli {

struct Context {
  RunConfig config;
  std::string out_dir;
  int workers = 1;
  std::string seed_state;  // optional state file
  bool resume = false;
};

// Problems that make the command impossible to run, found before any compute.
std::vector<std::string> command_problems(const std::string& command, const Context& ctx);

// Each returns the exit code: 0 success, 2 partial, 1 fatal.
int cmd_floquet_spectrum(const Context& ctx, RunManifest& manifest);
int cmd_continue(const Context& ctx, RunManifest& manifest);
int cmd_current_scan(const Context& ctx, RunManifest& manifest);
int cmd_dimer(const Context& ctx, RunManifest& manifest);
int cmd_husimi(const Context& ctx, RunManifest& manifest);

}  // namespace ratchet::cli
