#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "ratchet/spectral_propagator.hpp"

using namespace ratchet;

namespace {

DrivingField lattice_field(double theta = -1.2) {
  DrivingField f;
  f.e1 = 3.26;
  f.e2 = 1.2;
  f.omega = 3.0;
  f.theta = theta;
  return f;
}

ModelParams params(int n_max, double g = 0.0, int steps = 1024) {
  ModelParams p;
  p.mu = 0.2;
  p.n_max = n_max;
  p.g = g;
  p.dt = lattice_field().period() / steps;
  return p;
}

WaveFunction random_state(int n_max, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Eigen::VectorXcd c(2 * n_max + 1);
  for (auto& v : c) v = cplx(n(rng), n(rng));
  return WaveFunction(n_max, c).normalized();
}

}  // namespace

TEST_SUITE("spectral-propagator") {
  TEST_CASE("plane waves") {
    const WaveFunction zero = plane_wave_state(0, 16);
    CHECK(zero.coeff(0) == cplx(1.0, 0.0));
    CHECK(zero.norm2() == 1.0);
    CHECK(mean_momentum(zero, 0.2) == 0.0);
    CHECK(mean_momentum(plane_wave_state(1, 16), 0.2) == doctest::Approx(0.2));
    CHECK(mean_momentum(plane_wave_state(2, 16), 0.2) == doctest::Approx(0.4));
    CHECK_THROWS_AS(plane_wave_state(17, 16), std::out_of_range);
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(33);
    c[15] = c[17] = 1.0 / std::sqrt(2.0);
    CHECK(mean_momentum(WaveFunction(16, c), 0.2) == doctest::Approx(0.0));
  }

  TEST_CASE("position round trip and normalization") {
    const WaveFunction psi = random_state(8, 3);
    for (int m : {17, 64, 100}) {
      const auto values = psi.to_position(m);
      double norm = 0.0;
      for (const auto& v : values) norm += std::norm(v);
      CHECK(norm * kTwoPi / m == doctest::Approx(1.0).epsilon(1e-12));
      const WaveFunction back = WaveFunction::from_position(values, 8);
      CHECK((back.coeffs() - psi.coeffs()).norm() < 1e-13);
    }
    CHECK_THROWS(psi.to_position(16));
    // psi(x) = sum_n c_n e^{inx} / sqrt(2 pi), checked at one point.
    const auto values = psi.to_position(32);
    cplx direct = 0.0;
    const double x = kTwoPi * 5 / 32;
    for (int n = -8; n <= 8; ++n) direct += psi.coeff(n) * std::polar(1.0, n * x);
    CHECK(std::abs(values[5] - direct / std::sqrt(kTwoPi)) < 1e-13);
  }

  TEST_CASE("dealiased grid size") {
    CHECK(dealiased_grid_size(16) == 128);
    CHECK(dealiased_grid_size(24) == 128);
    CHECK(dealiased_grid_size(32) == 256);
    for (int n = 1; n < 70; ++n) CHECK(dealiased_grid_size(n) >= 4 * n + 1);
  }

  TEST_CASE("free particle phases") {
    ModelParams p = params(6, 0.0, 256);
    p.v0 = 0.0;
    DrivingField f = lattice_field();
    f.e1 = f.e2 = 0.0;
    for (int n : {-6, -1, 0, 3}) {
      const auto out = propagate(plane_wave_state(n, 6), 0.0, 2 * f.period(), p, f);
      const cplx expected = std::polar(1.0, -p.mu * n * n * 2 * f.period() / 2);
      CHECK(std::abs(out.state.coeff(n) - expected) < 1e-12);
      CHECK(std::abs(out.state.norm2() - 1.0) < 1e-11);
    }
  }

  TEST_CASE("one step preserves the norm") {
    for (double g : {0.0, 0.005, 0.5}) {
      const WaveFunction psi = random_state(16, 11);
      CHECK(std::abs(step(psi, 0.3, params(16, g), lattice_field()).norm2() - 1.0) < 1e-14);
    }
  }

  TEST_CASE("matches a Galerkin RK4 reference over one period") {
    // Small basis so the direct-convolution oracle stays cheap.
    const DrivingField f = lattice_field(-1.6);
    for (double g : {0.0, 0.05}) {
      const ModelParams p = params(8, g, 4096);
      const WaveFunction psi = random_state(8, 5);
      const auto ours = propagate(psi, 0.0, f.period(), p, f).state.coeffs();
      const Eigen::VectorXcd ref = oracle::galerkin_rk4(psi.coeffs(), 0.0, f.period(), 8192, p, f);
      CHECK((ours - ref).norm() < 2e-5);
    }
  }

  TEST_CASE("second-order convergence") {
    // Driven nonlinear problem over one period against a dt/64 reference.
    const DrivingField f = lattice_field(-1.6);
    const WaveFunction psi = plane_wave_state(0, 16);
    auto run = [&](int steps) { return propagate(psi, 0.0, f.period(), params(16, 0.005, steps), f).state.coeffs(); };
    const Eigen::VectorXcd ref = run(256 * 64);
    const double e1 = (run(256) - ref).norm();
    const double e2 = (run(512) - ref).norm();
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
  }

  TEST_CASE("composition and linearity") {
    const DrivingField f = lattice_field();
    const ModelParams p = params(12, 0.005);
    const WaveFunction psi = random_state(12, 8);
    const auto once = propagate(propagate(psi, 0.0, f.period(), p, f).state, f.period(), 2 * f.period(), p, f);
    const auto twice = propagate(psi, 0.0, 2 * f.period(), p, f);
    CHECK((once.state.coeffs() - twice.state.coeffs()).norm() < 1e-13);

    const ModelParams lin = params(12);
    const WaveFunction a = random_state(12, 1), b = random_state(12, 2);
    const cplx alpha(0.3, -0.4), beta(0.8, 0.1);
    const WaveFunction mix(12, alpha * a.coeffs() + beta * b.coeffs());
    const Eigen::VectorXcd lhs = propagate(mix, 0.0, f.period(), lin, f).state.coeffs();
    const Eigen::VectorXcd rhs = alpha * propagate(a, 0.0, f.period(), lin, f).state.coeffs() +
                     beta * propagate(b, 0.0, f.period(), lin, f).state.coeffs();
    CHECK((lhs - rhs).norm() < 1e-10);
  }

  TEST_CASE("long-run norm conservation") {
    const DrivingField f = lattice_field();
    SplitStepPropagator prop(params(24, 0.005), f);
    Eigen::VectorXcd c = plane_wave_state(0, 24).coeffs();
    prop.advance(c, 0.0, 10000);
    CHECK(std::abs(c.squaredNorm() - 1.0) < 1e-10);

    for (unsigned seed : {21u, 22u, 23u}) {
      SplitStepPropagator lin(params(16), f);
      Eigen::VectorXcd r = random_state(16, seed).coeffs();
      lin.advance(r, 0.0, 1000);
      CHECK(std::abs(r.squaredNorm() - 1.0) < 1e-11);
    }
  }

  TEST_CASE("log sampling") {
    const DrivingField f = lattice_field();
    const auto out = propagate(plane_wave_state(0, 10), 0.0, f.period(), params(10), f, 100);
    CHECK(out.log.times.size() == out.log.norms.size());
    CHECK(out.log.times.size() == out.log.momenta.size());
    CHECK(out.log.times.front() == 0.0);
    CHECK(out.log.times.back() == doctest::Approx(f.period()));
    for (std::size_t k = 1; k < out.log.times.size(); ++k) CHECK(out.log.times[k] > out.log.times[k - 1]);
    CHECK_THROWS_AS(propagate(plane_wave_state(0, 10), 0.0, 0.5 * f.period() / 1024 * 3, params(10), f),
                    std::invalid_argument);
  }

  TEST_CASE("merged-step momentum sampling matches step boundaries") {
    const DrivingField f = lattice_field(-1.2);
    SplitStepPropagator a(params(16, 0.005), f), b(params(16, 0.005), f);
    Eigen::VectorXcd ca = plane_wave_state(0, 16).coeffs(), cb = ca;
    const long n = 4 * 1024;
    double sa = 0.0, sb = 0.0;
    a.advance_visit(ca, 0.0, n, [&](long k, double, const Eigen::VectorXcd& c) {
      sa += (k == 0 || k == n ? 0.5 : 1.0) * mean_momentum(c, 0.2);
    });
    b.advance_sampled(cb, 0.0, n, [&](long k, const Eigen::VectorXcd& c) {
      sb += (k == 0 || k == n ? 0.5 : 1.0) * mean_momentum(c, 0.2);
    });
    // Fusing the two nonlinear half steps is exact only up to the projection
    // onto the basis in between, so the schemes differ at O(dt^2) per period.
    CHECK((ca - cb).norm() < 1e-7);
    CHECK(std::abs(sa - sb) / n < 1e-8);
  }

  TEST_CASE("non-finite states abort") {
    Eigen::VectorXcd c = plane_wave_state(0, 8).coeffs();
    c[3] = cplx(std::nan(""), 0.0);
    SplitStepPropagator prop(params(8), lattice_field());
    CHECK_THROWS_AS(prop.advance(c, 0.0, 300), PropagationError);
  }

  TEST_CASE("cutoff convergence") {
    // |0> over one period under the two-harmonic drive. The coefficient at the cutoff
    // and the change under cutoff doubling both fall fast with n_max; frozen
    // values from this implementation at the default step.
    const DrivingField f = lattice_field(-1.2);
    auto period_of = [&](int n_max) {
      ModelParams p = params(n_max);
      p.dt = 0.0;
      return propagate(plane_wave_state(0, n_max), 0.0, f.period(), p, f).state;
    };
    auto embed = [](const WaveFunction& s, int n_max) {
      Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2 * n_max + 1);
      c.segment(n_max - s.n_max(), s.dim()) = s.coeffs();
      return c;
    };
    const WaveFunction w16 = period_of(16), w24 = period_of(24), w32 = period_of(32);
    const double change16 = (w32.coeffs() - embed(w16, 32)).norm();
    const double change24 = (w32.coeffs() - embed(w24, 32)).norm();
    const double edge24 = std::max(std::abs(w24.coeff(24)), std::abs(w24.coeff(-24)));
    MESSAGE("cutoff change 16->32: " << change16 << ", 24->32: " << change24 << ", |c| at n=24: " << edge24);
    CHECK(change24 < 1e-10);
    CHECK(change24 < 1e-3 * change16);
    CHECK(edge24 < 1e-10);
  }

  TEST_CASE("state files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "ratchet_state_test";
    std::filesystem::create_directories(dir);
    const StateRecord rec{random_state(5, 9), 0.2, 1.25};
    for (const char* name : {"s.bin", "s.txt"}) {
      const std::string path = (dir / name).string();
      save_state(path, rec);
      const StateRecord back = load_state(path);
      CHECK(back.state.n_max() == 5);
      CHECK(back.mu == 0.2);
      CHECK(back.t == 1.25);
      CHECK(back.state.coeffs() == rec.state.coeffs());
    }
    // Binary layout: int32 n_max, two doubles, then 2 (2N + 1) doubles.
    CHECK(std::filesystem::file_size(dir / "s.bin") == 4 + 16 + 16 * 11);
    std::ifstream in(dir / "s.bin", std::ios::binary);
    unsigned char first[4];
    in.read(reinterpret_cast<char*>(first), 4);
    CHECK(first[0] == 5);
    CHECK(first[3] == 0);
    std::ofstream(dir / "bad.bin", std::ios::binary) << "xx";
    CHECK_THROWS(load_state((dir / "bad.bin").string()));
    CHECK_THROWS(load_state((dir / "missing.bin").string()));
    std::filesystem::remove_all(dir);
  }
}
