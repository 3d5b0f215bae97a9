#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "ratchet/floquet_linear.hpp"
#include "ratchet/transport.hpp"

using namespace ratchet;

namespace {

DrivingField lattice_field(double theta) {
  DrivingField f;
  f.e1 = 3.26;
  f.e2 = 1.2;
  f.omega = 3.0;
  f.theta = theta;
  return f;
}

ModelParams params(int n_max, double g = 0.0) {
  ModelParams p;
  p.mu = 0.2;
  p.n_max = n_max;
  p.g = g;
  p.dt = lattice_field(0.0).period() / 256;
  return p;
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("free particle keeps its canonical momentum") {
    ModelParams p = params(6);
    p.v0 = 0.0;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(13);
    c[8] = std::sqrt(0.7);
    c[3] = cplx(0.0, std::sqrt(0.3));
    const WaveFunction psi(6, c);
    TransportOptions opt;
    opt.n_periods = 64;
    const CurrentEstimate e = running_average_momentum(psi, 0.0, p, lattice_field(-1.0), opt);
    CHECK(e.value == doctest::Approx(mean_momentum(psi, p.mu)).epsilon(1e-10));
    CHECK(e.converged);
    CHECK_FALSE(e.failed);
    CHECK(e.total_periods == 64);
  }

  TEST_CASE("plateau flag and dyadic windows") {
    TransportOptions opt;
    opt.n_periods = 256;
    const CurrentEstimate e = running_average_momentum(plane_wave_state(0, 12), 0.1, params(12), lattice_field(-0.99), opt);
    // 256, 128, ..., 1 periods: nine windows, longest last.
    REQUIRE(e.window_values.size() == 9);
    CHECK(e.window_values.back() == e.value);
    const double half = e.window_values[7];
    CHECK(e.converged == (std::abs(e.value - half) < opt.plateau_tol * std::max(std::abs(e.value), 0.01)));

    opt.n_periods = 96;  // 96, 48, 24, 12, 6, 3
    CHECK(running_average_momentum(plane_wave_state(0, 12), 0.0, params(12), lattice_field(-0.99), opt)
              .window_values.size() == 6);
    opt.n_periods = 32;
    CHECK_THROWS_AS(running_average_momentum(plane_wave_state(0, 12), 0.0, params(12), lattice_field(-0.99), opt),
                    std::invalid_argument);
  }

  TEST_CASE("stroboscopic linear path follows the step-by-step trajectory") {
    const ModelParams p = params(12);
    TransportOptions strobe, stepped;
    strobe.n_periods = stepped.n_periods = 256;
    stepped.stroboscopic_linear = false;
    for (double t0 : {0.0, 0.37}) {
      const WaveFunction psi = plane_wave_state(1, 12);
      const CurrentEstimate a = running_average_momentum(psi, t0, p, lattice_field(-0.99), strobe);
      const CurrentEstimate b = running_average_momentum(psi, t0, p, lattice_field(-0.99), stepped);
      REQUIRE(a.window_values.size() == b.window_values.size());
      for (std::size_t i = 0; i < a.window_values.size(); ++i)
        CHECK(std::abs(a.window_values[i] - b.window_values[i]) < 1e-11);
      CHECK(a.converged == b.converged);
    }
  }

  TEST_CASE("direct current agrees with the Floquet expansion") {
    // A mixture of Floquet states with well separated quasienergies: the cross
    // terms average out as 1 / (periods * gap), so 512 periods suffice.
    const ModelParams p = params(12);
    const DrivingField f = lattice_field(-1.0);
    const FloquetSpectrum s = floquet_spectrum(p, f, 0.0);
    std::vector<std::size_t> picked{0};
    for (std::size_t a = 1; a < s.size() && picked.size() < 3; ++a) {
      bool apart = true;
      for (std::size_t b : picked) apart = apart && phase_distance(s.quasienergies[a], s.quasienergies[b]) > 0.2;
      if (apart) picked.push_back(a);
    }
    REQUIRE(picked.size() == 3);
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(s.states[0].dim());
    const double w[3] = {0.5, 0.3, 0.2};
    for (int i = 0; i < 3; ++i) c += std::sqrt(w[i]) * s.states[picked[static_cast<std::size_t>(i)]].coeffs();
    const WaveFunction mix(12, c);

    TransportOptions opt;
    opt.n_periods = 512;
    const CurrentEstimate e = running_average_momentum(mix, 0.0, p, f, opt);
    const double j = asymptotic_current_linear(mix, s).current;
    CHECK(j == doctest::Approx(w[0] * s.momenta[picked[0]] + w[1] * s.momenta[picked[1]] + w[2] * s.momenta[picked[2]])
                   .epsilon(1e-9));
    CHECK(e.converged);
    CHECK(std::abs(e.value - j) < 2e-3);
  }

  TEST_CASE("t0-averaged current vanishes for the symmetric drive") {
    ScanSetup setup;
    setup.params = params(12);
    setup.field = lattice_field(0.0);
    setup.initial = plane_wave_state(0, 12);
    setup.transport.n_periods = 256;
    double mean = 0.0;
    for (const ScanRow& row : scan(ScanAxis::t0, t0_grid(setup.field, 16), setup)) mean += row.estimate.value / 16;
    CHECK(std::abs(mean) < 1e-3);
  }

  TEST_CASE("blow-up marks the estimate failed") {
    Eigen::VectorXcd c = plane_wave_state(0, 6).coeffs();
    ModelParams p = params(6, 1e300);
    TransportOptions opt;
    opt.n_periods = 64;
    const CurrentEstimate e = running_average_momentum(WaveFunction(6, c), 0.0, p, lattice_field(-1.0), opt);
    CHECK(e.failed);
    CHECK(std::isnan(e.value));
    CHECK_FALSE(e.error.empty());
  }

  TEST_CASE("scan ordering, skipping and failures") {
    ScanSetup setup;
    setup.params = params(6);
    setup.field = lattice_field(-1.0);
    setup.initial = plane_wave_state(0, 6);
    setup.transport.n_periods = 64;
    const std::vector<double> grid{0.0, 1e300, 0.01, 0.02};
    const std::vector<std::size_t> skip{2};
    std::vector<std::size_t> emitted;
    const auto rows = scan(ScanAxis::g, grid, setup, 3, [&](const ScanRow& r) { emitted.push_back(r.index); }, skip);
    CHECK(emitted == std::vector<std::size_t>{0, 1, 3});
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].estimate.failed);
    CHECK_FALSE(rows[0].estimate.failed);
    CHECK(rows[3].axis_value == 0.02);
    CHECK(rows[0].wall_time >= 0.0);
    CHECK_THROWS_AS(scan(ScanAxis::g, std::vector<double>{}, setup), std::invalid_argument);

    // Results do not depend on the worker count.
    const auto serial = scan(ScanAxis::g, grid, setup, 1);
    for (std::size_t i : {0u, 3u}) CHECK(serial[i].estimate.value == rows[i].estimate.value);
  }

  TEST_CASE("axes and t0 grids") {
    for (ScanAxis a : {ScanAxis::theta, ScanAxis::g, ScanAxis::t0}) CHECK(parse_scan_axis(to_string(a)) == a);
    CHECK_THROWS_AS(parse_scan_axis("omega"), std::invalid_argument);
    const auto grid = t0_grid(lattice_field(0.0), 16);
    CHECK(grid.size() == 16);
    CHECK(grid[0] == 0.0);
    CHECK(grid[15] == doctest::Approx(15.0 / 16 * lattice_field(0.0).period()));
  }
}
