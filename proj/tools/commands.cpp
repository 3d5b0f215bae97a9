#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "ratchet/dimer.hpp"
#include "ratchet/floquet_linear.hpp"
#include "ratchet/floquet_nonlinear.hpp"
#include "ratchet/husimi.hpp"
#include "ratchet/parallel.hpp"
#include "ratchet/table.hpp"
#include "ratchet/transport.hpp"

namespace ratchet::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string out_path(const Context& ctx, const std::string& name) { return (fs::path(ctx.out_dir) / name).string(); }

std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

std::size_t select(const FloquetSpectrum& spectrum, const StateSelector& selector) {
  if (selector.band) {
    if (static_cast<std::size_t>(*selector.band) >= spectrum.size()) {
      throw std::out_of_range("band index " + std::to_string(*selector.band) + " exceeds the spectrum size");
    }
    return static_cast<std::size_t>(*selector.band);
  }
  const StateKind kind = selector.kind == "transporting" ? StateKind::transporting : StateKind::chaotic_layer;
  return select_resonant_state(spectrum, kind, selector.near_quasienergy, selector.window);
}

// Quasienergy of a state under the linear one-period map: <psi|U psi> = exp(-i eps).
double linear_quasienergy(const WaveFunction& psi, const ModelParams& params, const DrivingField& field, double t0) {
  ModelParams p = params;
  p.g = 0.0;
  return wrap_phase(-std::arg(psi.overlap(period_map(psi, p, field, t0))));
}

WaveFunction load_seed(const Context& ctx) {
  const StateRecord record = load_state(ctx.seed_state);
  if (record.state.n_max() != ctx.config.model.n_max) {
    throw std::invalid_argument(ctx.seed_state + ": state cutoff " + std::to_string(record.state.n_max()) +
                                " differs from model.n_max " + std::to_string(ctx.config.model.n_max));
  }
  return record.state.normalized();
}

}  // namespace

std::vector<std::string> command_problems(const std::string& command, const Context& ctx) {
  std::vector<std::string> problems;
  const RunConfig& c = ctx.config;
  if (command == "floquet-spectrum") {
    if (c.floquet_spectrum.theta_grid.resolve(c.field.period()).empty()) {
      problems.push_back("floquet_spectrum.theta_grid: required");
    }
  } else if (command == "continue") {
    if (ctx.seed_state.empty() && !c.continuation.seed.band && c.continuation.seed.kind.empty()) {
      problems.push_back("continue.seed: required unless --seed-state is given");
    }
  } else if (command == "current-scan") {
    if (c.current_scan.grid.resolve(c.field.period()).empty()) problems.push_back("current_scan.grid: required");
    if (ctx.seed_state.empty() && std::abs(c.current_scan.initial_n) > c.model.n_max) {
      problems.push_back("current_scan.initial_n: outside the plane-wave basis");
    }
  } else if (command == "dimer") {
    try {
      c.dimer.params.validate();
    } catch (const std::exception& e) {
      problems.push_back(std::string("dimer: ") + e.what());
    }
  } else if (command == "husimi") {
    if (ctx.seed_state.empty()) problems.push_back("--seed-state: the husimi command needs a state file");
  }
  if (!ctx.seed_state.empty() && !fs::exists(ctx.seed_state)) problems.push_back(ctx.seed_state + ": no such state file");
  return problems;
}

int cmd_floquet_spectrum(const Context& ctx, RunManifest& manifest) {
  const RunConfig& c = ctx.config;
  ModelParams params = c.model;
  params.g = 0.0;
  const std::vector<double> grid = c.floquet_spectrum.theta_grid.resolve(c.field.period());
  const double t0 = c.floquet_spectrum.t0;

  BandTrackingOptions options;
  const BandSet bands = track_bands(grid, params, c.field, t0, options);
  const HusimiBasis basis(c.husimi, params.mu, params.n_max, ctx.workers);

  const Schema schema{{"theta_index", ColumnType::integer}, {"theta", ColumnType::real},
                      {"band", ColumnType::integer},       {"quasienergy", ColumnType::real},
                      {"momentum", ColumnType::real},      {"class", ColumnType::text}};
  std::vector<Row> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t b = 0; b < bands.bands.size(); ++b) {
      const Band& band = bands.bands[b];
      const StateClass cls = classify_state(band.momenta[i], basis(band.states[i]), c.classification);
      rows.push_back({as_int(i), grid[i], as_int(b), band.quasienergies[i], band.momenta[i], to_string(cls)});
    }
  }
  emit_table(rows, schema, out_path(ctx, "bands.csv"));
  manifest.outputs.push_back("bands.csv");
  for (std::size_t i : bands.coarse_points) {
    manifest.notes.push_back("band assignment weak or ambiguous at theta index " + std::to_string(i) + "; refine the grid");
  }

  // t0-averaged linear current from |0>.
  std::vector<double> currents(grid.size(), kNaN);
  parallel_for(grid.size(), ctx.workers, [&](std::size_t i, int) {
    currents[i] = t0_average_current(grid[i], params, c.field, 16).mean;
  });
  std::vector<Row> current_rows;
  for (std::size_t i = 0; i < grid.size(); ++i) current_rows.push_back({as_int(i), grid[i], currents[i]});
  emit_table(current_rows,
             {{"theta_index", ColumnType::integer}, {"theta", ColumnType::real}, {"current", ColumnType::real}},
             out_path(ctx, "currents.csv"));
  manifest.outputs.push_back("currents.csv");

  if (c.floquet_spectrum.dump_states) {
    fs::create_directories(out_path(ctx, "states"));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t b = 0; b < bands.bands.size(); ++b) {
        const std::string name = "states/theta" + std::to_string(i) + "_band" + std::to_string(b) + ".bin";
        save_state(out_path(ctx, name), {bands.bands[b].states[i], params.mu, t0});
        manifest.outputs.push_back(name);
      }
    }
  }
  return 0;
}

int cmd_continue(const Context& ctx, RunManifest& manifest) {
  const RunConfig& c = ctx.config;
  const ContinueSection& s = c.continuation;
  ModelParams params = c.model;
  params.g = 0.0;
  DrivingField field = c.field;
  field.theta = s.theta;

  const FloquetSpectrum spectrum = floquet_spectrum(params, field, s.t0);
  WaveFunction seed;
  double seed_eps = 0.0;
  if (!ctx.seed_state.empty()) {
    seed = load_seed(ctx);
    seed_eps = linear_quasienergy(seed, params, field, s.t0);
  } else {
    const std::size_t a = select(spectrum, s.seed);
    seed = spectrum.states[a];
    seed_eps = spectrum.quasienergies[a];
  }
  NewtonOptions newton;
  newton.workers = ctx.workers;
  NonlinearFloquetState start;
  try {
    start = newton_solve(seed, seed_eps, params, field, s.t0, newton);
  } catch (const ConvergenceError& e) {
    std::cerr << "seed is not a linear Floquet state: " << e.what() << '\n';
    manifest.notes.push_back(std::string("seed not converged: ") + e.what());
    return 1;
  }
  seed = start.state;
  seed_eps = start.quasienergy;

  std::optional<WaveFunction> partner;
  double partner_eps = kNaN;
  if (s.partner) {
    const std::size_t b = select(spectrum, *s.partner);
    partner = spectrum.states[b];
    partner_eps = spectrum.quasienergies[b];
  }

  double g_star = kNaN;
  const Orbit seed_orbit = sample_orbit(seed, params, field, s.t0);
  if (partner) {
    try {
      g_star = critical_g(seed_orbit, sample_orbit(*partner, params, field, s.t0), seed_eps, partner_eps, params.mu);
    } catch (const DegeneratePairError& e) {
      manifest.notes.push_back(e.what());
    }
  }

  ContinuationOptions options;
  options.newton = newton;
  const Branch branch = continue_in_g(start, s.g_max, s.dg, params, field, s.t0, options);
  manifest.notes.push_back("terminated_by: " + to_string(branch.terminated_by));
  if (branch.fold_g) manifest.notes.push_back("fold at g = " + format_real(*branch.fold_g));
  if (!branch.diagnostic.empty()) manifest.notes.push_back(branch.diagnostic);

  const Schema schema{{"segment", ColumnType::text},         {"g", ColumnType::real},
                      {"quasienergy", ColumnType::real},     {"momentum", ColumnType::real},
                      {"residual", ColumnType::real},        {"iterations", ColumnType::integer},
                      {"weight_seed", ColumnType::real},     {"weight_partner", ColumnType::real},
                      {"weight_outside", ColumnType::real},  {"eps_perturbative", ColumnType::real},
                      {"eps_two_state", ColumnType::real},   {"g_critical", ColumnType::real}};
  std::vector<Row> rows;
  auto add = [&](const std::string& segment, const NonlinearFloquetState& pt, double momentum) {
    ModelParams p = params;
    p.g = pt.g;
    const Orbit orbit = sample_orbit(pt.state, p, field, s.t0);
    const double eps15 = quasienergy_perturbative(orbit, pt.g, params.mu, seed_eps);
    double a2 = std::norm(seed.overlap(pt.state)), b2 = kNaN, outside = kNaN, eps16 = kNaN;
    if (partner) {
      const TwoStateWeights w = project_two_state(pt.state, seed, *partner);
      a2 = w.a2;
      b2 = w.b2;
      outside = w.outside;
      eps16 = quasienergy_two_state(w, seed_eps, partner_eps, orbit, pt.g, params.mu);
    }
    rows.push_back({segment, pt.g, pt.quasienergy, momentum, pt.residual, static_cast<std::int64_t>(pt.iterations), a2, b2,
                    outside, eps15, eps16, g_star});
  };
  for (std::size_t k = 0; k < branch.points.size(); ++k) add("main", branch.points[k], branch.momenta[k]);
  for (std::size_t k = 0; k < branch.beyond_fold.size(); ++k) add("beyond_fold", branch.beyond_fold[k], branch.beyond_fold_momenta[k]);
  emit_table(rows, schema, out_path(ctx, "branch.csv"));
  manifest.outputs.push_back("branch.csv");

  save_state(out_path(ctx, "branch_last.bin"), {branch.points.back().state, params.mu, s.t0});
  manifest.outputs.push_back("branch_last.bin");
  return 0;
}

int cmd_current_scan(const Context& ctx, RunManifest& manifest) {
  const RunConfig& c = ctx.config;
  const ScanSection& s = c.current_scan;
  const ScanAxis axis = parse_scan_axis(s.axis);
  const std::vector<double> grid = s.grid.resolve(c.field.period());

  ScanSetup setup;
  setup.params = c.model;
  setup.field = c.field;
  setup.t0 = s.t0;
  setup.initial = ctx.seed_state.empty() ? plane_wave_state(s.initial_n, c.model.n_max) : load_seed(ctx);
  setup.transport.n_periods = s.n_periods;
  setup.transport.plateau_tol = s.plateau_tol;

  const Schema schema{{"index", ColumnType::integer},       {to_string(axis), ColumnType::real},
                      {"current", ColumnType::real},       {"converged", ColumnType::boolean},
                      {"total_periods", ColumnType::integer}, {"failed", ColumnType::boolean},
                      {"error", ColumnType::text}};
  const std::string path = out_path(ctx, "current_scan.csv");
  const std::string timing_path = out_path(ctx, "current_scan_timing.csv");

  // Resume: rows already on disk are kept and skipped.
  std::vector<std::size_t> skip;
  std::size_t previous_failures = 0;
  if (ctx.resume && fs::exists(path)) {
    const CsvData existing = read_csv(path);
    for (const auto& rec : existing.records) {
      if (rec.size() != schema.size()) continue;
      const std::size_t index = std::stoul(rec[0]);
      if (index >= grid.size() || std::stod(rec[1]) != grid[index]) {
        throw std::runtime_error(path + ": existing rows do not match the configured grid");
      }
      skip.push_back(index);
      if (rec[5] == "true") ++previous_failures;
    }
    manifest.notes.push_back("resumed with " + std::to_string(skip.size()) + " rows already present");
  }
  const bool append = ctx.resume && !skip.empty();
  TableWriter writer(path, schema, append);
  TableWriter timing(timing_path, {{"index", ColumnType::integer}, {"wall_time", ColumnType::real}}, append);
  std::size_t failures = previous_failures;
  const auto rows = scan(
      axis, grid, setup, ctx.workers,
      [&](const ScanRow& row) {
        const CurrentEstimate& e = row.estimate;
        if (e.failed) ++failures;
        writer.write({as_int(row.index), row.axis_value, e.value, e.converged, static_cast<std::int64_t>(e.total_periods),
                      e.failed, e.error});
        timing.write({as_int(row.index), row.wall_time});
      },
      skip);
  manifest.outputs.push_back("current_scan.csv");
  manifest.outputs.push_back("current_scan_timing.csv");
  if (failures == 0) return 0;
  manifest.notes.push_back(std::to_string(failures) + " of " + std::to_string(grid.size()) + " scan points failed");
  return failures == grid.size() ? 1 : 2;
}

int cmd_dimer(const Context& ctx, RunManifest& manifest) {
  const DimerSection& d = ctx.config.dimer;
  DimerContinuationOptions options;
  options.kick = d.kick;
  const std::vector<DimerOrbit> modes = dimer_linear_modes(d.params);
  const Schema schema{{"mode", ColumnType::integer},      {"segment", ColumnType::text},
                      {"theta", ColumnType::real},        {"g", ColumnType::real},
                      {"quasienergy", ColumnType::real},  {"imbalance", ColumnType::real},
                      {"classification", ColumnType::text}, {"critical_g", ColumnType::real}};
  std::vector<Row> rows;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const DimerBranch branch = dimer_continue(modes[m], d.g_max, d.dg, d.params, options);
    const std::string cls = to_string(branch.classification);
    const double crit = branch.critical_g.value_or(kNaN);
    auto add = [&](const std::string& segment, const std::vector<DimerOrbit>& orbits) {
      for (const auto& o : orbits) {
        rows.push_back({as_int(m), segment, d.params.theta, o.g, o.quasienergy, o.imbalance, cls, crit});
      }
    };
    add("main", branch.points);
    add("beyond_fold", branch.beyond_fold);
    add("daughter_plus", branch.daughter_plus);
    add("daughter_minus", branch.daughter_minus);
    add("isolated", branch.isolated);
    manifest.notes.push_back("mode " + std::to_string(m) + ": " + cls +
                             (branch.diagnostic.empty() ? "" : " (" + branch.diagnostic + ")"));
  }
  emit_table(rows, schema, out_path(ctx, "dimer.csv"));
  manifest.outputs.push_back("dimer.csv");
  return 0;
}

int cmd_husimi(const Context& ctx, RunManifest& manifest) {
  const RunConfig& c = ctx.config;
  const StateRecord record = load_state(ctx.seed_state);
  const WaveFunction psi = record.state.normalized();
  const HusimiGrid grid = husimi(psi, c.husimi, record.mu, ctx.workers);

  std::vector<Row> rows;
  for (std::size_t k = 0; k < grid.p_grid.size(); ++k) {
    for (std::size_t j = 0; j < grid.x_grid.size(); ++j) {
      rows.push_back({grid.p_grid[k], grid.x_grid[j], grid.values[k * grid.x_grid.size() + j]});
    }
  }
  emit_table(rows, {{"p", ColumnType::real}, {"x", ColumnType::real}, {"husimi", ColumnType::real}},
             out_path(ctx, "husimi.csv"));
  manifest.outputs.push_back("husimi.csv");

  const double momentum = mean_momentum(psi, record.mu);
  nlohmann::json meta;
  meta["x_range"] = {0.0, kTwoPi};
  meta["p_range"] = {c.husimi.p_min, c.husimi.p_max};
  meta["nx"] = c.husimi.nx;
  meta["np"] = c.husimi.np;
  meta["mu"] = record.mu;
  meta["sigma_x"] = grid.sigma_x;
  meta["sigma_p"] = grid.sigma_p;
  meta["normalization"] = grid.normalization();
  meta["participation_ratio"] = grid.participation_ratio();
  meta["mean_momentum"] = momentum;
  meta["class"] = to_string(classify_state(momentum, grid, c.classification));
  meta["state_file"] = ctx.seed_state;
  std::ofstream out(out_path(ctx, "husimi.json"));
  out << meta.dump(2) << '\n';
  if (!out) throw std::runtime_error(out_path(ctx, "husimi.json") + ": write failed");
  manifest.outputs.push_back("husimi.json");
  return 0;
}

}  // namespace ratchet::cli
