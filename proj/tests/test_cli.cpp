#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "ratchet/table.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ratchet_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

// Exit status of `ratchet <args>`, with stdout and stderr sent to dir/log.txt.
int run(const fs::path& dir, const std::string& args) {
  const std::string cmd = std::string(RATCHET_CLI) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json manifest(const fs::path& out) { return nlohmann::json::parse(slurp(out / "manifest.json")); }

const char* kSpectrumConfig = R"({
  "model": {"n_max": 8},
  "field": {"e1": 3.26, "e2": 1.2, "omega": 3.0},
  "floquet_spectrum": {"theta_grid": [-1.0], "dump_states": true}
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("invalid config lists every problem and exits 1") {
    const fs::path dir = fresh_dir("bad");
    const fs::path cfg = write_config(dir, R"({"model": {"mu": 0, "n_max": -2}, "dimer": {"omega": -1}})");
    CHECK(run(dir, "dimer --config " + cfg.string() + " --out " + (dir / "out").string()) == 1);
    const std::string log = slurp(dir / "log.txt");
    for (const char* key : {"model.mu", "model.n_max", "dimer.omega"}) CHECK_MESSAGE(log.find(key) != std::string::npos, key);
    CHECK_FALSE(fs::exists(dir / "out" / "dimer.csv"));
  }

  TEST_CASE("missing subcommand or config is a usage error") {
    const fs::path dir = fresh_dir("usage");
    CHECK(run(dir, "") != 0);
    CHECK(run(dir, "dimer --out " + dir.string()) != 0);
    CHECK(run(dir, "--version") == 0);
  }

  TEST_CASE("dimer with g_max = 0 gives one start orbit per mode") {
    const fs::path dir = fresh_dir("dimer");
    const fs::path cfg = write_config(dir, R"({"dimer": {"g_max": 0, "theta": 0}})");
    REQUIRE(run(dir, "dimer --config " + cfg.string() + " --out " + (dir / "out").string()) == 0);
    const ratchet::CsvData d = ratchet::read_csv((dir / "out" / "dimer.csv").string());
    std::vector<std::string> main_modes;
    for (const auto& r : d.records)
      if (r[1] == "main") main_modes.push_back(r[0]);
    CHECK(main_modes == std::vector<std::string>{"0", "1"});
    const auto m = manifest(dir / "out");
    CHECK(m["exit_code"] == 0);
    CHECK(m["command"] == "dimer");
  }

  TEST_CASE("spectrum run is deterministic and feeds the Husimi command") {
    const fs::path dir = fresh_dir("spectrum");
    const fs::path cfg = write_config(dir, kSpectrumConfig);
    REQUIRE(run(dir, "floquet-spectrum --config " + cfg.string() + " --out " + (dir / "a").string()) == 0);
    REQUIRE(run(dir, "floquet-spectrum --workers 1 --config " + cfg.string() + " --out " + (dir / "b").string()) == 0);

    const ratchet::CsvData bands = ratchet::read_csv((dir / "a" / "bands.csv").string());
    CHECK(bands.records.size() == 17);
    CHECK(ratchet::read_csv((dir / "a" / "currents.csv").string()).records.size() == 1);
    CHECK(slurp(dir / "a" / "bands.csv") == slurp(dir / "b" / "bands.csv"));
    CHECK(slurp(dir / "a" / "currents.csv") == slurp(dir / "b" / "currents.csv"));
    const auto ma = manifest(dir / "a");
    CHECK(ma["config_hash"] == manifest(dir / "b")["config_hash"]);
    CHECK(ma["config_hash"].get<std::string>().size() == 64);

    const fs::path state = dir / "a" / "states" / "theta0_band3.bin";
    REQUIRE(fs::exists(state));
    REQUIRE(run(dir, "husimi --config " + cfg.string() + " --out " + (dir / "h").string() + " --state " + state.string()) ==
            0);
    CHECK(ratchet::read_csv((dir / "h" / "husimi.csv").string()).records.size() == 64 * 64);
    const auto meta = nlohmann::json::parse(slurp(dir / "h" / "husimi.json"));
    CHECK(meta["normalization"].get<double>() > 0.5);

    // The state file carries its own cutoff and mu; a missing one is refused.
    CHECK(run(dir, "husimi --config " + cfg.string() + " --out " + (dir / "h2").string() + " --state " +
                       (dir / "nope.bin").string()) == 1);
    CHECK(run(dir, "husimi --config " + cfg.string() + " --out " + (dir / "h3").string()) == 1);
  }

  TEST_CASE("current scan resumes without recomputing finished rows") {
    const fs::path dir = fresh_dir("scan");
    const fs::path cfg = write_config(dir, R"({
      "model": {"n_max": 6},
      "field": {"e1": 3.26, "e2": 1.2, "omega": 3.0, "theta": -1.0},
      "current_scan": {"axis": "g", "grid": [0.0, 0.01], "n_periods": 64}
    })");
    const std::string out = (dir / "out").string();
    REQUIRE(run(dir, "current-scan --config " + cfg.string() + " --out " + out) == 0);
    const std::string full = slurp(dir / "out" / "current_scan.csv");
    CHECK(ratchet::read_csv(out + "/current_scan.csv").records.size() == 2);

    // Drop the last row and resume: the table is rebuilt byte for byte.
    std::ofstream(dir / "out" / "current_scan.csv") << full.substr(0, full.rfind('\n', full.size() - 2) + 1);
    REQUIRE(run(dir, "current-scan --resume --config " + cfg.string() + " --out " + out) == 0);
    CHECK(slurp(dir / "out" / "current_scan.csv") == full);
  }
}
