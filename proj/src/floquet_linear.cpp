#include "ratchet/floquet_linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

namespace ratchet {

namespace {

constexpr double kUnitarityLimit = 1e-6;
constexpr double kExpansionDefectLimit = 1e-6;

ModelParams linear(const ModelParams& params) {
  ModelParams p = params;
  p.g = 0.0;
  return p;
}

Eigen::MatrixXcd states_matrix(const FloquetSpectrum& spectrum) {
  const auto d = static_cast<Eigen::Index>(spectrum.states.front().dim());
  Eigen::MatrixXcd x(d, static_cast<Eigen::Index>(spectrum.size()));
  for (std::size_t a = 0; a < spectrum.size(); ++a) x.col(static_cast<Eigen::Index>(a)) = spectrum.states[a].coeffs();
  return x;
}

Eigen::VectorXd column_momenta(const Eigen::MatrixXcd& x, double mu) {
  const int n_max = static_cast<int>(x.rows() - 1) / 2;
  Eigen::VectorXd n(x.rows());
  for (int i = 0; i < x.rows(); ++i) n[i] = mu * (i - n_max);
  return (n.transpose() * x.cwiseAbs2()).transpose();
}

// Propagates the columns of x over one period from t0; accumulates the
// trapezoidal period average of <p> per column and stores snapshots at every
// `snapshot_every` steps (snapshot k is at t0 + k * snapshot_every * dt).
Eigen::VectorXd period_average_momenta(Eigen::MatrixXcd x, const SplitStepPropagator& prop, double t0,
                                       int snapshot_every, std::vector<Eigen::MatrixXcd>* snapshots) {
  const int steps = prop.steps_per_period();
  const double mu = prop.params().mu;
  Eigen::VectorXd acc = 0.5 * column_momenta(x, mu);
  if (snapshots) snapshots->push_back(x);
  for (int k = 0; k < steps; ++k) {
    prop.step_columns(x, t0 + k * prop.dt());
    const double w = (k + 1 == steps) ? 0.5 : 1.0;
    acc += w * column_momenta(x, mu);
    if (snapshots && (k + 1) % snapshot_every == 0 && k + 1 < steps) snapshots->push_back(x);
  }
  return acc / steps;
}

}  // namespace

double phase_distance(double a, double b) { return std::abs(wrap_phase(a - b)); }

double unitarity_defect(const Eigen::MatrixXcd& u) {
  const Eigen::MatrixXcd defect = u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols());
  return defect.cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd codiagonal_transpose(const Eigen::MatrixXcd& u) {
  const Eigen::Index d = u.rows();
  Eigen::MatrixXcd out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = u(d - 1 - j, d - 1 - i);
  }
  return out;
}

Eigen::MatrixXcd build_floquet_operator(const ModelParams& params, const DrivingField& field, double t0) {
  SplitStepPropagator prop(linear(params), field);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(prop.dim(), prop.dim());
  prop.advance_columns(u, t0, prop.steps_per_period());
  const double defect = unitarity_defect(u);
  if (defect > kUnitarityLimit) {
    throw NonUnitaryError("Floquet operator not unitary (defect " + std::to_string(defect) +
                          "): propagation under-resolved");
  }
  return u;
}

FloquetSpectrum diagonalize_unitary(const Eigen::MatrixXcd& u, int n_max) {
  if (u.rows() != u.cols() || u.rows() != 2 * n_max + 1) {
    throw std::invalid_argument("Floquet operator dimension does not match the cutoff");
  }
  const double defect = unitarity_defect(u);
  if (defect > kUnitarityLimit) {
    throw NonUnitaryError("input matrix is not unitary (defect " + std::to_string(defect) + ")");
  }
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u);
  const Eigen::MatrixXcd& q = schur.matrixU();
  const Eigen::MatrixXcd& t = schur.matrixT();
  const Eigen::Index d = u.rows();

  std::vector<double> eps(static_cast<std::size_t>(d));
  for (Eigen::Index a = 0; a < d; ++a) eps[static_cast<std::size_t>(a)] = wrap_phase(-std::arg(t(a, a)));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return eps[static_cast<std::size_t>(a)] < eps[static_cast<std::size_t>(b)];
  });

  FloquetSpectrum out;
  for (Eigen::Index a : order) {
    Eigen::VectorXcd v = q.col(a);
    Eigen::Index imax = 0;
    v.cwiseAbs2().maxCoeff(&imax);
    v *= std::polar(1.0, -std::arg(v[imax]));
    out.quasienergies.push_back(eps[static_cast<std::size_t>(a)]);
    out.states.emplace_back(n_max, std::move(v));
  }
  return out;
}

std::vector<double> floquet_mean_momenta(const FloquetSpectrum& spectrum, const ModelParams& params,
                                         const DrivingField& field) {
  if (spectrum.size() == 0) return {};
  ModelParams p = linear(params);
  p.n_max = spectrum.states.front().n_max();
  SplitStepPropagator prop(p, field);
  const Eigen::VectorXd m = period_average_momenta(states_matrix(spectrum), prop, spectrum.t0, 1, nullptr);
  return {m.data(), m.data() + m.size()};
}

FloquetSpectrum floquet_spectrum(const ModelParams& params, const DrivingField& field, double t0) {
  FloquetSpectrum s = diagonalize_unitary(build_floquet_operator(params, field, t0), params.n_max);
  s.theta = field.theta;
  s.t0 = t0;
  s.momenta = floquet_mean_momenta(s, params, field);
  return s;
}

LinearCurrent asymptotic_current_linear(const WaveFunction& initial, const FloquetSpectrum& spectrum) {
  if (spectrum.momenta.size() != spectrum.size()) {
    throw std::invalid_argument("spectrum has no Floquet momenta");
  }
  LinearCurrent out;
  out.occupations.reserve(spectrum.size());
  double total = 0.0;
  for (std::size_t a = 0; a < spectrum.size(); ++a) {
    const double w = std::norm(spectrum.states[a].overlap(initial));
    out.occupations.push_back(w);
    out.current += spectrum.momenta[a] * w;
    total += w;
  }
  if (std::abs(total - initial.norm2()) > kExpansionDefectLimit || std::abs(initial.norm2() - 1.0) > kExpansionDefectLimit) {
    throw std::invalid_argument("Floquet expansion defect: occupations sum to " + std::to_string(total));
  }
  return out;
}

AveragedCurrent t0_average_current(double theta, const ModelParams& params, const DrivingField& field_template,
                                   int n_samples, const WaveFunction& initial) {
  DrivingField field = field_template;
  field.theta = theta;
  ModelParams p = linear(params);
  p.n_max = initial.n_max();
  SplitStepPropagator prop(p, field);
  const int steps = prop.steps_per_period();
  if (n_samples < 8) throw std::invalid_argument("t0 averaging needs at least 8 samples");
  if (steps % n_samples != 0) throw std::invalid_argument("t0 samples must divide the steps per period");

  FloquetSpectrum spectrum = diagonalize_unitary(build_floquet_operator(p, field, 0.0), p.n_max);
  std::vector<Eigen::MatrixXcd> snapshots;
  const Eigen::VectorXd momenta =
      period_average_momenta(states_matrix(spectrum), prop, 0.0, steps / n_samples, &snapshots);

  AveragedCurrent out;
  for (int k = 0; k < n_samples; ++k) {
    const Eigen::VectorXcd c = snapshots[static_cast<std::size_t>(k)].adjoint() * initial.coeffs();
    const double total = c.squaredNorm();
    if (std::abs(total - 1.0) > kExpansionDefectLimit) {
      throw std::invalid_argument("Floquet expansion defect: occupations sum to " + std::to_string(total));
    }
    out.per_t0.push_back(momenta.dot(c.cwiseAbs2()));
    out.t0_grid.push_back(k * field.period() / n_samples);
  }
  out.mean = std::accumulate(out.per_t0.begin(), out.per_t0.end(), 0.0) / n_samples;
  return out;
}

AveragedCurrent t0_average_current(double theta, const ModelParams& params, const DrivingField& field_template,
                                   int n_samples) {
  return t0_average_current(theta, params, field_template, n_samples, plane_wave_state(0, params.n_max));
}

BandSet::Gap BandSet::minimal_gap(std::size_t band_a, std::size_t band_b) const {
  const Band& a = bands.at(band_a);
  const Band& b = bands.at(band_b);
  Gap best{std::numeric_limits<double>::infinity(), 0.0, 0};
  for (std::size_t k = 0; k < theta_grid.size(); ++k) {
    const double gap = phase_distance(a.quasienergies[k], b.quasienergies[k]);
    if (gap < best.gap) best = {gap, theta_grid[k], k};
  }
  return best;
}

BandSet track_bands(std::span<const double> theta_grid, const ModelParams& params, const DrivingField& field,
                    double t0, const BandTrackingOptions& options) {
  if (theta_grid.empty()) throw std::invalid_argument("empty theta grid");
  BandSet out;
  out.theta_grid.assign(theta_grid.begin(), theta_grid.end());
  Eigen::MatrixXcd previous;

  for (std::size_t k = 0; k < theta_grid.size(); ++k) {
    DrivingField f = field;
    f.theta = theta_grid[k];
    FloquetSpectrum s = diagonalize_unitary(build_floquet_operator(params, f, t0), params.n_max);
    s.theta = f.theta;
    s.t0 = t0;
    if (options.compute_momenta) s.momenta = floquet_mean_momenta(s, params, f);
    const Eigen::MatrixXcd current = states_matrix(s);
    const auto d = s.size();

    std::vector<std::size_t> assignment(d);
    if (k == 0) {
      out.bands.resize(d);
      std::iota(assignment.begin(), assignment.end(), 0);
    } else {
      const Eigen::MatrixXd overlap = (previous.adjoint() * current).cwiseAbs();
      struct Candidate {
        double value;
        std::size_t band, state;
      };
      std::vector<Candidate> cands;
      cands.reserve(d * d);
      for (std::size_t b = 0; b < d; ++b) {
        for (std::size_t a = 0; a < d; ++a) {
          cands.push_back({overlap(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)), b, a});
        }
      }
      std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.value > y.value; });
      std::vector<bool> band_done(d, false), state_done(d, false);
      bool coarse = false;
      for (const auto& c : cands) {
        if (band_done[c.band] || state_done[c.state]) continue;
        band_done[c.band] = state_done[c.state] = true;
        assignment[c.band] = c.state;
        // Runner-up for this band among all current states.
        double second = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          if (a != c.state) second = std::max(second, overlap(static_cast<Eigen::Index>(c.band), static_cast<Eigen::Index>(a)));
        }
        if (c.value <= options.overlap_floor || second >= c.value - options.ambiguity_margin) coarse = true;
      }
      if (coarse) out.coarse_points.push_back(k);
    }

    Eigen::MatrixXcd matched(current.rows(), current.cols());
    for (std::size_t b = 0; b < d; ++b) {
      const std::size_t a = assignment[b];
      Band& band = out.bands[b];
      band.quasienergies.push_back(s.quasienergies[a]);
      if (options.compute_momenta) band.momenta.push_back(s.momenta[a]);
      if (options.keep_states) band.states.push_back(s.states[a]);
      matched.col(static_cast<Eigen::Index>(b)) = current.col(static_cast<Eigen::Index>(a));
    }
    previous = std::move(matched);
  }
  return out;
}

std::size_t select_resonant_state(const FloquetSpectrum& spectrum, StateKind kind, double near_eps, double window) {
  if (kind == StateKind::transporting && spectrum.momenta.size() != spectrum.size()) {
    throw std::invalid_argument("transporting-state selection needs the mean momenta");
  }
  std::optional<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < spectrum.size(); ++a) {
    if (phase_distance(spectrum.quasienergies[a], near_eps) > window) continue;
    const double score = kind == StateKind::chaotic_layer ? std::norm(spectrum.states[a].coeff(0)) : spectrum.momenta[a];
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  if (!best) throw std::out_of_range("no Floquet state within the quasienergy window");
  return *best;
}

}  // namespace ratchet
