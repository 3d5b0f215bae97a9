#include "ratchet/dimer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ratchet {

double DimerParams::drive(double t) const { return f1 * std::sin(omega * t) + f2 * std::sin(2.0 * omega * t + theta); }

void DimerParams::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("dimer mu must be positive");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw std::invalid_argument("dimer omega must be positive");
  if (steps_per_period < 1) throw std::invalid_argument("dimer steps_per_period must be positive");
  if (!std::isfinite(c) || !std::isfinite(f1) || !std::isfinite(f2) || !std::isfinite(theta)) {
    throw std::invalid_argument("dimer parameters must be finite");
  }
}

DimerState dimer_rhs(const DimerState& s, double t, double g, const DimerParams& p) {
  const double f = p.drive(t);
  const cplx k(0.0, -1.0 / p.mu);
  return {k * (p.c * s.psi2 + (g * s.n1() + f) * s.psi1), k * (p.c * s.psi1 + (g * s.n2() - f) * s.psi2)};
}

namespace {

DimerState axpy(const DimerState& s, double h, const DimerState& k) { return {s.psi1 + h * k.psi1, s.psi2 + h * k.psi2}; }

DimerState rk4_step(const DimerState& s, double t, double h, double g, const DimerParams& p) {
  const DimerState k1 = dimer_rhs(s, t, g, p);
  const DimerState k2 = dimer_rhs(axpy(s, h / 2, k1), t + h / 2, g, p);
  const DimerState k3 = dimer_rhs(axpy(s, h / 2, k2), t + h / 2, g, p);
  const DimerState k4 = dimer_rhs(axpy(s, h, k3), t + h, g, p);
  return {s.psi1 + h / 6 * (k1.psi1 + 2.0 * k2.psi1 + 2.0 * k3.psi1 + k4.psi1),
          s.psi2 + h / 6 * (k1.psi2 + 2.0 * k2.psi2 + 2.0 * k3.psi2 + k4.psi2)};
}

Eigen::VectorXcd to_vec(const DimerState& s) {
  Eigen::VectorXcd v(2);
  v << s.psi1, s.psi2;
  return v;
}

DimerState from_vec(const Eigen::VectorXcd& v) { return {v[0], v[1]}; }

DimerOrbit make_orbit(const OrbitSolution& s, const DimerParams& p) {
  DimerOrbit o;
  o.state = from_vec(s.state);
  o.quasienergy = wrap_phase(s.quasienergy);
  o.g = s.g;
  o.imbalance = imbalance(o.state, s.g, p);
  o.residual = s.residual;
  o.iterations = s.iterations;
  return o;
}

OrbitSolution as_solution(const DimerOrbit& o) {
  return {to_vec(o.state), o.quasienergy, o.g, o.residual, o.iterations, 1.0};
}

// Direction in packed coordinates that moves population between the sites:
// (psi1, -psi2) for the state, zero for eps and g.
Eigen::VectorXd imbalance_direction(const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd w(2);
  w << psi[0], -psi[1];
  return pack_point(w, 0.0, 0.0).normalized();
}

Eigen::VectorXcd pinned(const Eigen::VectorXcd& psi) {
  const int pin = std::norm(psi[0]) >= std::norm(psi[1]) ? 0 : 1;
  return psi * std::polar(1.0, -std::arg(psi[pin]));
}

// Orbit with g free whose projection on the imbalance direction is offset by
// kick from the (symmetric) orbit s.
OrbitSolution kicked_solve(const PeriodMapFactory& factory, const OrbitSolution& s, double kick,
                           const NewtonOptions& options) {
  const Eigen::VectorXcd psi = pinned(s.state);
  const Eigen::VectorXd w = imbalance_direction(psi);
  const Eigen::VectorXd predictor = pack_point(psi, s.quasienergy, s.g) + kick * w;
  return solve_orbit_arclength(factory, predictor, w, options);
}

// Grows a daughter branch from the kicked solution outward until g_max.
std::vector<OrbitSolution> grow_daughter(const PeriodMapFactory& factory, const OrbitSolution& seed, double kick,
                                         double g_max, const DimerContinuationOptions& options) {
  OrbitSolution second = kicked_solve(factory, seed, 2.0 * kick, options.continuation.newton);
  std::vector<OrbitSolution> path{seed, second};
  const auto more = trace_arclength(
      factory, seed, second, options.arclength_step, options.max_arclength_steps,
      [&](const OrbitSolution& s) { return s.g >= g_max || s.g < 0.0; }, options.continuation.newton);
  path.insert(path.end(), more.begin(), more.end());
  if (path.back().g < 0.0) throw ConvergenceError("daughter branch turned back below g = 0", 0.0, 0);
  // Land exactly on g_max.
  if (path.back().g > g_max) {
    const OrbitSolution& last = path.back();
    path.back() = solve_orbit(factory, last.state, last.quasienergy, g_max, options.continuation.newton);
  }
  return path;
}

}  // namespace

DimerState dimer_propagate(const DimerState& s, double t_start, long n_steps, double g, const DimerParams& p) {
  const double h = p.period() / p.steps_per_period;
  DimerState cur = s;
  for (long k = 0; k < n_steps; ++k) cur = rk4_step(cur, t_start + static_cast<double>(k) * h, h, g, p);
  if (!std::isfinite(std::abs(cur.psi1)) || !std::isfinite(std::abs(cur.psi2))) {
    throw PropagationError("dimer integration produced a non-finite state");
  }
  return cur;
}

PeriodMapFactory dimer_map_factory(const DimerParams& p) {
  p.validate();
  return [p]() -> ParamPeriodMap {
    return [p](const Eigen::VectorXcd& psi, double g) {
      return to_vec(dimer_propagate(from_vec(psi), 0.0, p.steps_per_period, g, p));
    };
  };
}

double imbalance(const DimerState& s, double g, const DimerParams& p) {
  constexpr int kSamples = 128;
  if (p.steps_per_period % kSamples != 0) throw std::invalid_argument("dimer steps_per_period must be a multiple of 128");
  const long every = p.steps_per_period / kSamples;
  DimerState cur = s;
  double acc = 0.5 * (cur.n1() - cur.n2());
  for (int k = 1; k <= kSamples; ++k) {
    cur = dimer_propagate(cur, (k - 1) * p.period() / kSamples, every, g, p);
    acc += (k == kSamples ? 0.5 : 1.0) * (cur.n1() - cur.n2());
  }
  return acc / kSamples;
}

DimerOrbit dimer_orbit_solve(const DimerState& seed, double eps_seed, double g, const DimerParams& p,
                             const NewtonOptions& options) {
  return make_orbit(solve_orbit(dimer_map_factory(p), to_vec(seed), eps_seed, g, options), p);
}

std::vector<DimerOrbit> dimer_linear_modes(const DimerParams& p) {
  p.validate();
  Eigen::Matrix2cd u;
  u.col(0) = to_vec(dimer_propagate({1.0, 0.0}, 0.0, p.steps_per_period, 0.0, p));
  u.col(1) = to_vec(dimer_propagate({0.0, 1.0}, 0.0, p.steps_per_period, 0.0, p));
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(u);
  std::vector<DimerOrbit> modes;
  for (int a = 0; a < 2; ++a) {
    const Eigen::VectorXcd v = pinned(es.eigenvectors().col(a).normalized());
    const double eps = wrap_phase(-std::arg(es.eigenvalues()[a]));
    // Polish against the integrator so the mode is a root to Newton tolerance.
    modes.push_back(dimer_orbit_solve(from_vec(v), eps, 0.0, p));
  }
  std::sort(modes.begin(), modes.end(), [](const DimerOrbit& a, const DimerOrbit& b) { return a.quasienergy < b.quasienergy; });
  return modes;
}

std::string to_string(Bifurcation b) {
  switch (b) {
    case Bifurcation::none: return "none";
    case Bifurcation::pitchfork: return "pitchfork";
    case Bifurcation::saddle_node: return "saddle-node";
  }
  return "unknown";
}

DimerBranch dimer_continue(const DimerOrbit& start, double g_max, double dg, const DimerParams& p,
                           const DimerContinuationOptions& options) {
  const PeriodMapFactory factory = dimer_map_factory(p);
  const OrbitBranch ob = continue_orbit(factory, as_solution(start), g_max, dg, options.continuation);
  DimerBranch out;
  out.terminated_by = ob.terminated_by;
  out.fold_g = ob.fold_g;
  out.diagnostic = ob.diagnostic;
  for (const auto& s : ob.points) out.points.push_back(make_orbit(s, p));
  for (const auto& s : ob.beyond_fold) out.beyond_fold.push_back(make_orbit(s, p));

  if (ob.fold_g) {
    out.classification = Bifurcation::saddle_node;
    out.critical_g = ob.fold_g;
    return out;
  }

  const bool symmetric = std::abs(std::sin(p.theta)) < 1e-12;
  if (symmetric) {
    // A daughter pair exists once a kicked solve with g free lands inside the range.
    for (const auto& s : ob.points) {
      OrbitSolution plus, minus;
      try {
        plus = kicked_solve(factory, s, options.kick, options.continuation.newton);
        minus = kicked_solve(factory, s, -options.kick, options.continuation.newton);
      } catch (const ConvergenceError&) {
        continue;
      }
      if (!(plus.g > 0.0 && plus.g <= g_max && minus.g > 0.0 && minus.g <= g_max)) continue;
      // A genuine daughter pair carries the imposed imbalance with opposite signs.
      const double floor = 0.1 * std::abs(options.kick);
      const double imb_plus = imbalance(from_vec(plus.state), plus.g, p);
      const double imb_minus = imbalance(from_vec(minus.state), minus.g, p);
      if (!(imb_plus * imb_minus < 0.0 && std::abs(imb_plus) > floor && std::abs(imb_minus) > floor)) continue;
      out.classification = Bifurcation::pitchfork;
      out.critical_g = 0.5 * (plus.g + minus.g);
      try {
        for (const auto& d : grow_daughter(factory, plus, options.kick, g_max, options)) out.daughter_plus.push_back(make_orbit(d, p));
        for (const auto& d : grow_daughter(factory, minus, -options.kick, g_max, options)) out.daughter_minus.push_back(make_orbit(d, p));
      } catch (const ConvergenceError& e) {
        out.diagnostic = std::string("daughter branch incomplete: ") + e.what();
      }
      return out;
    }
    return out;
  }

  // Without the symmetry the broken pitchfork leaves a disconnected pair. Seed
  // it at g_max from the site-swapped final orbit and follow it down in g.
  const OrbitSolution& last = ob.points.back();
  if (last.g <= 0.0) return out;
  Eigen::VectorXcd swapped(2);
  swapped << last.state[1], last.state[0];
  OrbitSolution other;
  try {
    other = solve_orbit(factory, swapped, last.quasienergy, last.g, options.continuation.newton);
  } catch (const ConvergenceError&) {
    return out;
  }
  const DimerOrbit other_orbit = make_orbit(other, p);
  if (std::abs(other.state.dot(last.state)) > 1.0 - 1e-6 || other_orbit.imbalance * out.points.back().imbalance >= 0.0) {
    return out;
  }
  // Step down in g along the isolated branch and look for its turning point.
  OrbitSolution lower;
  try {
    lower = solve_orbit(factory, other.state, other.quasienergy, other.g - dg, options.continuation.newton);
  } catch (const ConvergenceError&) {
    return out;
  }
  const auto path = trace_arclength(
      factory, other, lower, options.arclength_step, options.max_arclength_steps,
      [&](const OrbitSolution& s) { return s.g <= 0.0 || s.g > g_max; }, options.continuation.newton);
  double g_min = lower.g;
  std::size_t turn = 0;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (path[k].g < g_min) {
      g_min = path[k].g;
      turn = k;
    }
  }
  const bool turned = !path.empty() && turn + 1 < path.size() && path.back().g > g_min + 1e-9 && g_min > 0.0;
  out.isolated.push_back(other_orbit);
  out.isolated.push_back(make_orbit(lower, p));
  for (const auto& s : path) out.isolated.push_back(make_orbit(s, p));
  if (turned) {
    out.classification = Bifurcation::saddle_node;
    out.critical_g = g_min;
    std::ostringstream msg;
    msg << "isolated branch turns at g = " << g_min;
    out.diagnostic = msg.str();
  }
  return out;
}

double self_trapping_threshold(const DimerParams& p, double kick) {
  DimerParams undriven = p;
  undriven.f1 = 0.0;
  undriven.f2 = 0.0;
  const PeriodMapFactory factory = dimer_map_factory(undriven);
  const double c = std::abs(p.c);
  if (c == 0.0) throw std::invalid_argument("self-trapping needs a nonzero coupling");
  // In-phase mode psi1 = psi2: exp(-i C t / mu).
  const double s = p.c > 0 ? 1.0 : -1.0;
  Eigen::VectorXcd psi(2);
  psi << 1.0 / std::sqrt(2.0), s / std::sqrt(2.0);
  const double eps = wrap_phase(c * undriven.period() / undriven.mu);
  for (int k = 0; k <= 40; ++k) {
    const double g = 0.1 * c * k;
    try {
      const OrbitSolution sol = kicked_solve(factory, {psi, eps, g, 0.0, 0, 1.0}, kick, {});
      if (sol.g > 0.0) return sol.g;
    } catch (const ConvergenceError&) {
    }
  }
  throw ConvergenceError("no self-trapping threshold found for g in [0, 4C]", 0.0, 0);
}

}  // namespace ratchet
