#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ratchet/dimer.hpp"

using namespace ratchet;

namespace {

// Linear driven dimer over one period by exponential midpoint steps of
// H(t) = [[f, C], [C, -f]] / mu.
Eigen::Matrix2cd linear_monodromy(const DimerParams& p, int steps) {
  const double h = p.period() / steps;
  Eigen::Matrix2cd u = Eigen::Matrix2cd::Identity();
  for (int k = 0; k < steps; ++k) {
    const double f = p.drive((k + 0.5) * h);
    // exp(-i h (f sz + C sx) / mu) = cos(w h) - i sin(w h) (f sz + C sx) / w, w = |(f, C)| / mu.
    const double w = std::hypot(f, p.c) / p.mu;
    Eigen::Matrix2cd n;
    n << f, p.c, p.c, -f;
    n /= w * p.mu;
    const Eigen::Matrix2cd step =
        std::cos(w * h) * Eigen::Matrix2cd::Identity() - std::complex<double>(0.0, std::sin(w * h)) * n;
    u = step * u;
  }
  return u;
}

// Smallest g on a dense grid at which the undriven dimer has an imbalanced
// stationary state psi = (cos phi, sin phi), phi < pi/4, found by scanning phi
// for a root of g sin(phi) cos(phi) - C.
double brute_force_threshold(double c) {
  for (int k = 1; k < 100000; ++k) {
    const double g = 1e-4 * k;
    for (int j = 1; j < 10000; ++j) {
      const double phi = 0.25 * kPi * j / 10000;
      if (g * std::sin(phi) * std::cos(phi) >= c) return g;
    }
  }
  return -1.0;
}

DimerParams dimer_params(double theta) {
  DimerParams p;
  p.theta = theta;
  return p;
}

}  // namespace

TEST_SUITE("dimer") {
  TEST_CASE("right-hand side") {
    const DimerParams p = dimer_params(-1.6);
    DimerParams still = p;
    still.f1 = still.f2 = 0.0;
    const double r = 1.0 / std::sqrt(2.0);
    const DimerState d = dimer_rhs({r, r}, 0.3, 0.0, still);
    CHECK(std::abs(d.psi1 - d.psi2) < 1e-15);

    // psi1 <-> psi2 together with f -> -f: compare at a time where the drive flips.
    const DimerState s{{0.6, 0.2}, {-0.1, 0.75}};
    DimerParams flipped = p;
    flipped.f1 = -p.f1;
    flipped.f2 = -p.f2;
    const DimerState a = dimer_rhs(s, 0.37, 1.3, p);
    const DimerState b = dimer_rhs({s.psi2, s.psi1}, 0.37, 1.3, flipped);
    CHECK(std::abs(a.psi1 - b.psi2) < 1e-14);
    CHECK(std::abs(a.psi2 - b.psi1) < 1e-14);

    const double dn = 2 * std::real(std::conj(s.psi1) * a.psi1 + std::conj(s.psi2) * a.psi2);
    CHECK(std::abs(dn) < 1e-14);
  }

  TEST_CASE("undriven normal modes") {
    DimerParams p = dimer_params(0.0);
    p.f1 = p.f2 = 0.0;
    const double r = 1.0 / std::sqrt(2.0);
    const DimerState in = dimer_propagate({r, r}, 0.0, 3 * p.steps_per_period, 0.0, p);
    const DimerState out = dimer_propagate({r, -r}, 0.0, 3 * p.steps_per_period, 0.0, p);
    const double t = 3 * p.period();
    CHECK(std::abs(in.psi1 - r * std::polar(1.0, -p.c * t / p.mu)) < 1e-10);
    CHECK(std::abs(in.psi2 - in.psi1) < 1e-14);
    CHECK(std::abs(out.psi1 - r * std::polar(1.0, p.c * t / p.mu)) < 1e-10);
  }

  TEST_CASE("fourth-order integrator and norm conservation") {
    DimerParams p = dimer_params(-1.6);
    const DimerState s{{0.8, 0.1}, {0.2, -0.55}};
    const double norm = s.n1() + s.n2();
    auto one_period = [&](int steps) {
      DimerParams q = p;
      q.steps_per_period = steps;
      return dimer_propagate(s, 0.0, steps, 2.0, q);
    };
    const DimerState ref = one_period(8192);
    auto err = [&](int steps) {
      const DimerState x = one_period(steps);
      return std::hypot(std::abs(x.psi1 - ref.psi1), std::abs(x.psi2 - ref.psi2));
    };
    CHECK(err(64) / err(128) == doctest::Approx(16.0).epsilon(0.1));
    const DimerState after = dimer_propagate(s, 0.0, 10 * p.steps_per_period, 2.0, p);
    CHECK(std::abs(after.n1() + after.n2() - norm) < 1e-9);
    const DimerState one = dimer_propagate(s, 0.0, p.steps_per_period, 2.0, p);
    CHECK(std::abs(one.n1() + one.n2() - norm) < 1e-10);
  }

  TEST_CASE("linear modes against an exponential-midpoint monodromy") {
    for (double theta : {0.0, -1.6}) {
      const DimerParams p = dimer_params(theta);
      const auto modes = dimer_linear_modes(p);
      REQUIRE(modes.size() == 2);
      Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(linear_monodromy(p, 20000));
      std::vector<double> ref{wrap_phase(-std::arg(es.eigenvalues()[0])), wrap_phase(-std::arg(es.eigenvalues()[1]))};
      std::sort(ref.begin(), ref.end());
      CHECK(modes[0].quasienergy == doctest::Approx(ref[0]).epsilon(1e-7));
      CHECK(modes[1].quasienergy == doctest::Approx(ref[1]).epsilon(1e-7));
      for (const auto& m : modes) CHECK(m.residual < 1e-9);
    }
    // Frozen from the reference above.
    const auto sym = dimer_linear_modes(dimer_params(0.0));
    CHECK(sym[1].quasienergy == doctest::Approx(0.965844).epsilon(1e-6));
    CHECK(sym[0].quasienergy == doctest::Approx(-0.965844).epsilon(1e-6));
  }

  TEST_CASE("orbit properties at g = 0") {
    for (const auto& m : dimer_linear_modes(dimer_params(0.0))) CHECK(std::abs(m.imbalance) < 1e-8);
    for (const auto& m : dimer_linear_modes(dimer_params(-1.6))) CHECK(std::abs(m.imbalance) > 1e-4);

    DimerParams weak = dimer_params(0.0);
    weak.f1 = weak.f2 = 0.01;
    for (const auto& m : dimer_linear_modes(weak)) {
      CHECK(std::abs(m.quasienergy) / weak.period() == doctest::Approx(weak.c / weak.mu).epsilon(0.02));
    }
  }

  TEST_CASE("orbit solve and the one-period map") {
    const DimerParams p = dimer_params(-1.6);
    const auto modes = dimer_linear_modes(p);
    const DimerOrbit o = dimer_orbit_solve(modes[1].state, modes[1].quasienergy, 0.5, p);
    const DimerState back = dimer_propagate(o.state, 0.0, p.steps_per_period, 0.5, p);
    const std::complex<double> phase = std::polar(1.0, -o.quasienergy);
    CHECK(std::abs(back.psi1 - phase * o.state.psi1) < 1e-9);
    CHECK(std::abs(back.psi2 - phase * o.state.psi2) < 1e-9);
    // Normalized to the solver tolerance.
    CHECK(std::abs(o.state.n1() + o.state.n2() - 1.0) < 1e-8);
    CHECK(imbalance(o.state, 0.5, p) == doctest::Approx(o.imbalance).epsilon(1e-12));
  }

  TEST_CASE("pitchfork under the symmetric drive") {
    const DimerParams p = dimer_params(0.0);
    const auto modes = dimer_linear_modes(p);
    const DimerBranch upper = dimer_continue(modes[1], 4.0, 0.05, p);
    CHECK(upper.classification == Bifurcation::pitchfork);
    REQUIRE(upper.critical_g.has_value());
    CHECK(*upper.critical_g == doctest::Approx(1.9527).epsilon(1e-3));
    REQUIRE(!upper.daughter_plus.empty());
    REQUIRE(!upper.daughter_minus.empty());
    const DimerOrbit& a = upper.daughter_plus.back();
    const DimerOrbit& b = upper.daughter_minus.back();
    CHECK(a.g == doctest::Approx(4.0));
    CHECK(b.g == doctest::Approx(4.0));
    CHECK(a.imbalance * b.imbalance < 0.0);
    CHECK(std::abs(a.imbalance + b.imbalance) < 1e-6);
    CHECK(std::abs(a.imbalance) == doctest::Approx(0.864620).epsilon(1e-5));
    // With theta = 0 the drive is odd in t, so the daughters are images under
    // the site swap combined with time reversal (complex conjugation at t = 0).
    const std::complex<double> o = a.state.psi2 * b.state.psi1 + a.state.psi1 * b.state.psi2;
    CHECK(std::abs(o) > 1.0 - 1e-8);
    // The symmetric branch keeps zero imbalance up to the bifurcation.
    for (const auto& pt : upper.points) {
      if (pt.g < *upper.critical_g) CHECK(std::abs(pt.imbalance) < 1e-8);
    }
    CHECK(dimer_continue(modes[0], 4.0, 0.05, p).classification == Bifurcation::none);
    // Below the critical value nothing happens.
    CHECK(dimer_continue(modes[1], 1.5, 0.05, p).classification == Bifurcation::none);
  }

  TEST_CASE("saddle-node under the non-symmetric drive") {
    const DimerParams p = dimer_params(-1.6);
    const auto modes = dimer_linear_modes(p);
    const DimerBranch upper = dimer_continue(modes[1], 4.0, 0.05, p);
    CHECK(upper.classification == Bifurcation::saddle_node);
    REQUIRE(upper.critical_g.has_value());
    CHECK(*upper.critical_g == doctest::Approx(1.97988).epsilon(1e-4));
    CHECK(std::abs(upper.points.back().imbalance) > 0.5);
    CHECK(std::abs(upper.points.back().imbalance) > 10 * std::abs(upper.points.front().imbalance));
    REQUIRE(!upper.isolated.empty());
    for (const auto& o : upper.isolated) CHECK(o.g >= *upper.critical_g - 1e-9);
    CHECK(to_string(upper.classification) == "saddle-node");
    const DimerBranch trivial = dimer_continue(modes[1], 0.0, 0.05, p);
    CHECK(trivial.points.size() == 1);
    CHECK(trivial.classification == Bifurcation::none);
  }

  TEST_CASE("undriven self-trapping threshold") {
    const double oracle = brute_force_threshold(1.0);
    CHECK(oracle == doctest::Approx(2.0).epsilon(1e-3));
    const double ours = self_trapping_threshold(dimer_params(0.0));
    CHECK(ours == doctest::Approx(oracle).epsilon(0.01));
  }
}
