#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sbpp/barycenter.hpp"
#include "sbpp/energy.hpp"

namespace sbpp {

struct SolverOptions {
  double tol = 1e-8;             ///< stop when grad_residual <= tol
  int max_iter = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double initial_step = 1.0;     ///< in units of the preconditioned metric
  double min_step = 1e-12;
  double max_step = 1e6;
  double collapse_floor = 1e-3;  ///< lower bound for |u+|_{p,eps} on accepted states
  double distinct_tol = 0.1;     ///< relative L2 distance separating solutions
  /// Whole-cell translations the iterates are kept invariant under. The group
  /// they generate is averaged over after every step.
  std::vector<Index3> symmetry_shifts;
  /// Curvature pairs kept for limited-memory quasi-Newton directions; 0 uses
  /// the preconditioned gradient with Barzilai-Borwein lengths.
  int memory = 5;
  int parallel = 1;              ///< worker threads for multistart_search
  bool keep_trace = true;
};

struct TraceRow {
  int iteration = 0;
  double energy = 0.0;
  double nehari_residual = 0.0;
  double grad_residual = 0.0;
  double step = 0.0;
};

struct NehariState {
  explicit NehariState(ScalarField field) : u(std::move(field)) {}

  ScalarField u;
  double t_u = 1.0;
  EnergyBreakdown energy;
  double nehari_residual = 0.0;
  double grad_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool collapsed = false;
  bool stalled = false;
  std::string label;
  std::string diagnostic;
  std::vector<TraceRow> trace;
  double wall_seconds = 0.0;  ///< not part of any deterministic output

  double p_norm(const ModelParams& params) const {
    return std::pow(energy.power, 1.0 / params.p);
  }
};

/// Unique t > 0 with a + b t^2 - c t^(p-2) = 0 (a, c > 0, b >= 0, p > 4).
inline double nehari_scale(double a, double b, double c, double p) {
  detail::require(std::isfinite(a) && a > 0.0, "nehari_scale: a must be positive");
  detail::require(std::isfinite(b) && b >= 0.0, "nehari_scale: b must be nonnegative");
  detail::require(std::isfinite(c) && c > 0.0,
                  "nehari_scale: positive part vanishes, no projection exists");
  detail::require(p > 4.0, "nehari_scale: p must exceed 4");
  auto f = [&](double t) { return a + b * t * t - c * std::pow(t, p - 2.0); };
  auto df = [&](double t) { return 2.0 * b * t - (p - 2.0) * c * std::pow(t, p - 3.0); };

  double lo = 1.0, hi = 1.0;
  for (int i = 0; f(lo) <= 0.0; ++i) {
    lo *= 0.5;
    if (i > 2000) throw SolverError("nehari_scale: lower bracket not found");
  }
  for (int i = 0; f(hi) > 0.0; ++i) {
    hi *= 2.0;
    if (i > 2000) throw SolverError("nehari_scale: upper bracket not found");
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double ft = f(t);
    if (ft == 0.0) return t;
    if (ft > 0.0) lo = t; else hi = t;
    const double d = df(t);
    double next = (d != 0.0) ? t - ft / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4.0 * std::numeric_limits<double>::epsilon() * t) return next;
    t = next;
  }
  return t;
}

namespace detail {

inline double dual_sq(const SpectralGrid& grid, const ComplexBuffer& g, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  return grid.inner(g, g, [=](double k2) { return e3 / (1.0 + e2 * k2); });
}

/// Closure of a set of cell shifts under addition, identity included.
inline std::vector<Index3> shift_group(const TorusSpec& s, const std::vector<Index3>& gens) {
  const Index3& n = s.resolution();
  auto norm = [&](Index3 a) {
    for (int ax = 0; ax < 3; ++ax) a[ax] = ((a[ax] % n[ax]) + n[ax]) % n[ax];
    return a;
  };
  std::vector<Index3> group{Index3{0, 0, 0}};
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (const Index3& g : gens) {
      const Index3 c = norm({group[i][0] + g[0], group[i][1] + g[1], group[i][2] + g[2]});
      if (std::find(group.begin(), group.end(), c) == group.end()) group.push_back(c);
      if (group.size() > 4096) throw InputError("symmetry group too large");
    }
  }
  return group;
}

inline ScalarField symmetrize(const ScalarField& u, const std::vector<Index3>& group) {
  if (group.size() <= 1) return u;
  ScalarField acc(u.spec());
  for (const Index3& g : group) acc += circular_shift(u, g);
  acc *= 1.0 / static_cast<double>(group.size());
  return acc;
}

/// Nehari-tangential part of the gradient in the preconditioned metric.
struct Tangent {
  ComplexBuffer g_t;     ///< tangential gradient, spectral
  double lambda = 0.0;
  double dual_sq = 0.0;  ///< <g_t, P g_t>
};

inline Tangent tangential(const SpectralGrid& grid, const Derivatives& d, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  auto P = [=](double k2) { return e3 / (1.0 + e2 * k2); };
  const double num = grid.inner(d.grad_hat, d.nehari_grad_hat, P);
  const double den = grid.inner(d.nehari_grad_hat, d.nehari_grad_hat, P);
  Tangent t;
  t.lambda = den > 0.0 ? num / den : 0.0;
  t.g_t = d.grad_hat;
  for (std::size_t n = 0; n < t.g_t.size(); ++n) t.g_t[n] -= t.lambda * d.nehari_grad_hat[n];
  t.dual_sq = std::max(0.0, grid.inner(t.g_t, t.g_t, P));
  return t;
}

inline ScalarField precondition(const SpectralGrid& grid, ComplexBuffer g, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  const auto& ksq = grid.k_squared();
  for (std::size_t n = 0; n < g.size(); ++n) g[n] *= e3 / (1.0 + e2 * ksq[n]);
  return grid.inverse(std::move(g));
}

struct CurvaturePair {
  ComplexBuffer s;  ///< iterate difference
  ComplexBuffer y;  ///< tangential gradient difference
  double rho = 0.0;
  double gamma = 0.0;
};

/// Limited-memory inverse-Hessian product with initial matrix gamma P.
inline ComplexBuffer two_loop(const SpectralGrid& grid, const ComplexBuffer& g,
                              const std::deque<CurvaturePair>& mem, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  ComplexBuffer q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * grid.inner(mem[i].s, q);
    for (std::size_t n = 0; n < q.size(); ++n) q[n] -= alpha[i] * mem[i].y[n];
  }
  const double gamma = mem.back().gamma;
  const auto& ksq = grid.k_squared();
  for (std::size_t n = 0; n < q.size(); ++n) q[n] *= gamma * e3 / (1.0 + e2 * ksq[n]);
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * grid.inner(mem[i].y, q);
    for (std::size_t n = 0; n < q.size(); ++n) q[n] += (alpha[i] - beta) * mem[i].s[n];
  }
  return q;
}

struct Projected {
  explicit Projected(ScalarField field, double scale = 1.0, EnergyBreakdown e = {})
      : u(std::move(field)), t(scale), energy(e) {}

  ScalarField u;
  double t = 1.0;
  EnergyBreakdown energy;
};

/// Scales v onto the Nehari set using one evaluation of v.
inline Projected project_once(const ScalarField& v, const ModelParams& params) {
  const EnergyBreakdown e = evaluate(v, params).energy;
  if (!(e.power > 0.0))
    throw InputError("project_to_nehari: positive part vanishes, no projection exists");
  const double t = nehari_scale(e.kinetic_mass, e.coupling, e.power, params.p);
  ScalarField u = v;
  u *= t;
  return Projected(std::move(u), t, e.scaled(t, params.p));
}

inline double grad_residual_of(const SpectralGrid& grid, const Derivatives& d,
                               const EnergyBreakdown& e, double eps) {
  const Tangent t = tangential(grid, d, eps);
  return e.kinetic_mass > 0.0 ? std::sqrt(t.dual_sq / e.kinetic_mass) : 0.0;
}

inline void finalize(NehariState& st, const ModelParams& params) {
  const Evaluation ev = evaluate(st.u, params);
  const Derivatives d = derivatives(st.u, ev, params);
  st.energy = ev.energy;
  st.nehari_residual = ev.energy.nehari();
  st.grad_residual = grad_residual_of(*ev.grid, d, ev.energy, params.eps);
}

}  // namespace detail

/// t_u u with its energy, residual and tangential gradient residual.
inline NehariState project_to_nehari(const ScalarField& u, const ModelParams& params) {
  require_finite(u, "project_to_nehari");
  params.validate();
  detail::require(has_positive_part(u), "project_to_nehari: u+ vanishes identically");
  detail::Projected pr = detail::project_once(u, params);
  NehariState st{std::move(pr.u)};
  st.t_u = pr.t;
  detail::finalize(st, params);
  // One Newton-type correction absorbs the rounding of t u.
  if (std::abs(st.nehari_residual) > 1e-12 * st.energy.kinetic_mass) {
    detail::Projected again = detail::project_once(st.u, params);
    st.u = std::move(again.u);
    st.t_u *= again.t;
    detail::finalize(st, params);
  }
  return st;
}

/// Preconditioned projected-gradient descent of J on the Nehari set.
///
/// Steps use the H^1_eps Riesz map P = eps^3/(1+eps^2|k|^2), a Barzilai-Borwein
/// initial length in that metric and Armijo backtracking with reprojection.
/// Differences in J at the level of rounding are treated as no change.
inline NehariState minimize_on_nehari(const ScalarField& u0, const ModelParams& params,
                                      const SolverOptions& opts = {}) {
  require_finite(u0, "minimize_on_nehari");
  params.validate();
  detail::require(has_positive_part(u0), "minimize_on_nehari: u0+ vanishes identically");
  detail::require(opts.tol > 0.0 && opts.max_iter >= 0, "invalid solver options");
  detail::require(opts.backtrack > 0.0 && opts.backtrack < 1.0, "backtrack must be in (0,1)");

  const auto start = std::chrono::steady_clock::now();
  const auto group = detail::shift_group(u0.spec(), opts.symmetry_shifts);
  const double eps = params.eps;
  const double e2 = eps * eps, e3 = e2 * eps;
  auto Pinv = [=](double k2) { return (1.0 + e2 * k2) / e3; };
  auto P = [=](double k2) { return e3 / (1.0 + e2 * k2); };

  detail::Projected cur = detail::project_once(detail::symmetrize(u0, group), params);
  NehariState st{cur.u};
  st.t_u = cur.t;

  double step = opts.initial_step;
  std::optional<ComplexBuffer> prev_u_hat, prev_gt;
  std::deque<detail::CurvaturePair> memory;
  // Rounding level of a J evaluation on this grid.
  const double noise_scale =
      16.0 * std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(u0.size()));

  for (int it = 0;; ++it) {
    const detail::Evaluation ev = detail::evaluate(cur.u, params);
    const SpectralGrid& grid = *ev.grid;
    const detail::Derivatives der = detail::derivatives(cur.u, ev, params);
    const detail::Tangent tan = detail::tangential(grid, der, eps);
    const EnergyBreakdown& e = ev.energy;
    const double res = std::sqrt(tan.dual_sq / e.kinetic_mass);

    st.u = cur.u;
    st.energy = e;
    st.nehari_residual = e.nehari();
    st.grad_residual = res;
    st.iterations = it;
    st.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (opts.keep_trace) st.trace.push_back({it, e.total, e.nehari(), res, step});

    if (std::pow(e.power, 1.0 / params.p) < opts.collapse_floor) {
      st.collapsed = true;
      st.diagnostic = "collapse toward the zero field";
      return st;
    }
    if (res <= opts.tol) {
      st.converged = true;
      return st;
    }
    if (it >= opts.max_iter) {
      st.diagnostic = "iteration cap reached";
      return st;
    }

    if (prev_u_hat) {
      detail::CurvaturePair cp{ComplexBuffer(ev.u_hat.size()), ComplexBuffer(ev.u_hat.size())};
      for (std::size_t n = 0; n < cp.s.size(); ++n) {
        cp.s[n] = ev.u_hat[n] - (*prev_u_hat)[n];
        cp.y[n] = tan.g_t[n] - (*prev_gt)[n];
      }
      const double ss = grid.inner(cp.s, cp.s, Pinv);
      const double sy = grid.inner(cp.s, cp.y);
      if (sy > 0.0 && ss > 0.0) {
        step = ss / sy;
        if (opts.memory > 0) {
          cp.rho = 1.0 / sy;
          cp.gamma = sy / grid.inner(cp.y, cp.y, P);
          memory.push_back(std::move(cp));
          if (static_cast<int>(memory.size()) > opts.memory) memory.pop_front();
        }
      }
      step = std::clamp(step, opts.min_step, opts.max_step);
    }

    // Search direction r (primal) with slope <g_t, r>.
    ComplexBuffer r_hat;
    double slope = 0.0;
    if (!memory.empty()) {
      r_hat = detail::two_loop(grid, tan.g_t, memory, eps);
      slope = grid.inner(tan.g_t, r_hat);
      if (slope > 0.0) {
        step = 1.0;
      } else {
        memory.clear();
      }
    }
    if (memory.empty()) {
      r_hat = tan.g_t;
      const auto& ksq = grid.k_squared();
      for (std::size_t n = 0; n < r_hat.size(); ++n) r_hat[n] *= P(ksq[n]);
      slope = tan.dual_sq;
    }
    const ScalarField dir = grid.inverse(std::move(r_hat));
    const double noise = noise_scale * (e.kinetic_mass + e.coupling + e.power);

    bool accepted = false;
    detail::Projected trial(ScalarField(cur.u.spec()));
    while (step >= opts.min_step) {
      ScalarField v = cur.u;
      v.axpy(-step, dir);
      v = detail::symmetrize(v, group);
      if (v.all_finite() && has_positive_part(v)) {
        trial = detail::project_once(v, params);
        const double jn = trial.energy.total;
        if (jn <= e.total - opts.armijo * step * slope ||
            (step * slope <= noise && jn <= e.total + noise)) {
          accepted = true;
          break;
        }
      }
      step *= opts.backtrack;
    }
    if (!accepted) {
      st.stalled = true;
      st.diagnostic = "line search stalled";
      return st;
    }
    prev_u_hat = ev.u_hat;
    prev_gt = tan.g_t;
    st.t_u *= trial.t;
    cur = std::move(trial);
  }
}

struct ConstantSolution {
  double c_star = 0.0;
  double residual = 0.0;  ///< |1 + 4 pi q^2 c^2 - c^(p-2)| / c^(p-2)
  double energy = 0.0;
};

/// Root c* > 1 of c^(p-2) = 1 + 4 pi q^2 c^2 and the energy of u = c*.
inline ConstantSolution constant_solution(const ModelParams& params, double volume) {
  params.validate();
  detail::require(std::isfinite(volume) && volume > 0.0, "volume must be positive");
  const double p = params.p;
  const double k = 4.0 * std::numbers::pi * params.q * params.q;
  // g(c) = c^(p-4) - 1/c^2 - k is increasing on c > 0.
  auto g = [&](double c) { return std::pow(c, p - 4.0) - 1.0 / (c * c) - k; };
  double lo = 1.0, hi = 2.0;
  while (g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw SolverError("constant_solution: root bracket failed");
  }
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  const double c = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
  ConstantSolution cs;
  cs.c_star = c;
  const double cp2 = std::pow(c, p - 2.0);
  cs.residual = std::abs(1.0 + k * c * c - cp2) / cp2;
  cs.energy = volume / params.eps3() * (0.25 * c * c + (0.25 - 1.0 / p) * std::pow(c, p));
  return cs;
}

/// True when max and min differ by at most rel_tol times max|u|.
inline bool is_spatially_constant(const ScalarField& u, double rel_tol = 1e-6) {
  const double m = u.max_abs();
  return m == 0.0 || (u.max() - u.min()) <= rel_tol * m;
}

struct Initializer {
  ScalarField field;
  std::vector<Index3> symmetry_shifts;
  std::string label;
};

struct MultistartResult {
  std::vector<NehariState> distinct;  ///< converged, deduplicated, sorted by energy
  std::vector<NehariState> all;       ///< every run, input order
  std::vector<std::string> diagnostics;
};

/// Relative L2 distance between a and the best whole-cell translate of b.
inline double distance_mod_translation(const ScalarField& a, const ScalarField& b,
                                       const ModelParams& params) {
  const ScalarField bs = circular_shift(b, alignment_shift(a, b, params));
  ScalarField diff = a;
  diff -= bs;
  const double na = l2_norm(a);
  return na > 0.0 ? l2_norm(diff) / na : l2_norm(diff);
}

inline MultistartResult multistart_search(const std::vector<Initializer>& inits,
                                          const ModelParams& params,
                                          const SolverOptions& opts = {}) {
  params.validate();
  for (const auto& in : inits)
    detail::require(has_positive_part(in.field),
                    "multistart_search: initializer '" + in.label + "' has no positive part");
  MultistartResult out;
  std::vector<std::optional<NehariState>> runs(inits.size());
  std::vector<std::string> errors(inits.size());
  auto run_one = [&](std::size_t i) {
    SolverOptions o = opts;
    o.symmetry_shifts = inits[i].symmetry_shifts;
    try {
      NehariState s = minimize_on_nehari(inits[i].field, params, o);
      s.label = inits[i].label;
      runs[i] = std::move(s);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  };
  const int workers = std::max(1, std::min<int>(opts.parallel, static_cast<int>(inits.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < inits.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < inits.size(); i += workers) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<const NehariState*> converged;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    if (!runs[i]) {
      out.diagnostics.push_back(inits[i].label + ": " + errors[i]);
      continue;
    }
    if (!runs[i]->converged) {
      std::ostringstream os;
      os << inits[i].label << ": not converged (" << runs[i]->diagnostic
         << ", grad_residual " << runs[i]->grad_residual << ")";
      out.diagnostics.push_back(os.str());
    }
  }
  for (auto& r : runs)
    if (r) out.all.push_back(*r);
  for (const auto& s : out.all)
    if (s.converged) converged.push_back(&s);
  std::stable_sort(converged.begin(), converged.end(),
                   [](const NehariState* a, const NehariState* b) {
                     return a->energy.total < b->energy.total;
                   });
  for (const NehariState* s : converged) {
    bool dup = false;
    for (const auto& kept : out.distinct) {
      if (distance_mod_translation(kept.u, s->u, params) < opts.distinct_tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.distinct.push_back(*s);
  }
  if (out.distinct.empty() && !inits.empty())
    out.diagnostics.push_back("no run converged");
  return out;
}

}  // namespace sbpp
