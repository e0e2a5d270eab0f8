#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sbpp/barycenter.hpp"
#include "sbpp/field_io.hpp"
#include "sbpp/nehari.hpp"

namespace sbpp {

namespace detail {

/// U(rho) on [0, L/2] with step h/refine: exact trigonometric interpolation
/// along the three axes through the box center, averaged over the six
/// half-lines.
inline std::vector<double> radial_table(const ScalarField& f, int refine, double& step) {
  const TorusSpec& s = f.spec();
  const int n = s.points(0), c = n / 2, m = c * refine;
  const double L = s.side(0);
  step = s.spacing(0) / refine;
  std::vector<double> out(m + 1, 0.0);
  std::vector<Complex> coef(n);
  for (int a = 0; a < 3; ++a) {
    std::vector<double> line(n);
    for (int i = 0; i < n; ++i) {
      Index3 idx{c, c, c};
      idx[a] = i;
      line[i] = f.at(idx[0], idx[1], idx[2]);
    }
    for (int k = 0; k < n; ++k) {
      Complex acc = 0.0;
      for (int j = 0; j < n; ++j) acc += line[j] * std::polar(1.0, -2.0 * std::numbers::pi * k * j / n);
      coef[k] = acc / static_cast<double>(n);
    }
    for (int sgn : {-1, 1}) {
      for (int r = 0; r <= m; ++r) {
        const double x = 0.5 * L + sgn * r * step;
        double v = coef[c].real() * std::cos(std::numbers::pi * n * x / L);
        for (int k = 0; k < c; ++k) {
          const double w = 2.0 * std::numbers::pi * k * x / L;
          const double re = coef[k].real() * std::cos(w) - coef[k].imag() * std::sin(w);
          v += k == 0 ? re : 2.0 * re;
        }
        out[r] += v / 6.0;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Ground state U of the eps = 1 problem on a large cubic reference torus,
/// centered at the box center. Off-grid values come from the radial table.
struct GroundStateProfile {
  double box_side = 0.0;
  double p = 0.0;
  double q = 0.0;
  ScalarField field;
  double m_inf_estimate = 0.0;
  double h1_norm_sq = 0.0;   ///< int |grad U|^2 + U^2
  double p_norm = 0.0;       ///< |U|_p
  double coupling = 0.0;     ///< q^2 int U^2 phi(U)
  double hwhm = 0.0;         ///< radius where U falls to U(0)/2
  double grad_residual = 0.0;
  double nehari_residual = 0.0;
  double tol = 0.0;
  int iterations = 0;
  std::vector<double> radial{};
  double radial_step = 0.0;

  static constexpr int kRadialRefine = 16;

  void build_radial() { radial = detail::radial_table(field, kRadialRefine, radial_step); }

  double center_value() const { return value_at({0.0, 0.0, 0.0}); }

  /// U at offset y from the center. Catmull-Rom on the radial table up to
  /// one unit inside the box edge, then the e^-rho / rho tail of the linear
  /// operator anchored there.
  double value_at(const Vec3& y) const {
    detail::require(!radial.empty(), "profile radial table not built");
    const double rho = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
    const int m = static_cast<int>(radial.size()) - 1;
    const int anchor = m - static_cast<int>(std::lround(1.0 / radial_step));
    const double ra = anchor * radial_step;
    if (rho > ra) return radial[anchor] * (ra / rho) * std::exp(ra - rho);
    const double t = rho / radial_step;
    const int i = static_cast<int>(t);
    const double f = t - i;
    auto at = [&](int k) { return radial[std::abs(k)]; };
    const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    return p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
  }
};

namespace detail {

/// Shifts u by an arbitrary vector d (out(x + d) = u(x)) through the Fourier
/// phase; the Nyquist planes are left unshifted.
inline ScalarField spectral_shift(const ScalarField& u, const Vec3& d) {
  auto grid = SpectralGrid::get(u.spec());
  ComplexBuffer c = grid->forward(u);
  const Index3& n = u.spec().resolution();
  const auto& kx = grid->derivative_wavenumbers(0);
  const auto& ky = grid->derivative_wavenumbers(1);
  const auto& kz = grid->derivative_wavenumbers(2);
  const int nz = grid->half_z();
  std::size_t idx = 0;
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int l = 0; l < nz; ++l, ++idx) {
        const double ph = -(kx[i] * d[0] + ky[j] * d[1] + kz[l] * d[2]);
        c[idx] *= Complex(std::cos(ph), std::sin(ph));
      }
  return grid->inverse(std::move(c));
}

inline double half_width(const GroundStateProfile& g) {
  const auto& r = g.radial;
  const double half = 0.5 * r.front();
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] < half) return (i - 1 + (r[i - 1] - half) / (r[i - 1] - r[i])) * g.radial_step;
  return 0.5 * g.box_side;
}

inline void fill_profile_stats(GroundStateProfile& g, const NehariState& st) {
  g.m_inf_estimate = st.energy.total;
  g.h1_norm_sq = st.energy.kinetic_mass;
  g.p_norm = std::pow(st.energy.power, 1.0 / g.p);
  g.coupling = st.energy.coupling;
  g.grad_residual = st.grad_residual;
  g.nehari_residual = st.nehari_residual;
  g.build_radial();
  g.hwhm = half_width(g);
}

}  // namespace detail

/// Minimizes J_1 on the cubic reference torus of the given side from a
/// centered Gaussian and recenters the Gamma-barycenter at the box center.
inline GroundStateProfile compute_limit_ground_state(double box_side, int resolution, double p,
                                                     double q, SolverOptions opts = {}) {
  detail::require(box_side > 0.0 && std::isfinite(box_side), "box side must be positive");
  const TorusSpec spec = TorusSpec::cube(box_side, resolution);
  const ModelParams mp{1.0, p, q, 0.25 * box_side};
  mp.validate(spec);
  const double c = 0.5 * box_side;
  const ScalarField u0 = ScalarField::sample(spec, [c](const Vec3& x) {
    const double r2 = (x[0] - c) * (x[0] - c) + (x[1] - c) * (x[1] - c) + (x[2] - c) * (x[2] - c);
    return std::exp(-0.5 * r2);
  });
  opts.symmetry_shifts.clear();
  NehariState st = minimize_on_nehari(u0, mp, opts);
  if (!st.converged) {
    std::ostringstream os;
    os << "limit ground state did not converge: " << st.diagnostic << " (grad_residual "
       << st.grad_residual << " after " << st.iterations << " iterations)";
    throw SolverError(os.str());
  }
  const Barycenter b = barycenter(st.u, mp);
  const Vec3 d = spec.displacement(b.point, {c, c, c});
  const int iters = st.iterations;
  st = project_to_nehari(detail::spectral_shift(st.u, d), mp);

  GroundStateProfile g{.box_side = box_side, .p = p, .q = q, .field = st.u};
  g.tol = opts.tol;
  g.iterations = iters;
  detail::fill_profile_stats(g, st);
  return g;
}

/// Writes stem.fld (field dump) and stem.meta (key=value).
inline void save_profile(const GroundStateProfile& g, const std::filesystem::path& stem) {
  std::filesystem::path fld = stem, meta = stem;
  fld += ".fld";
  meta += ".meta";
  write_field(fld, g.field);
  std::ofstream os(meta);
  if (!os) throw SolverError("cannot open for writing: " + meta.string());
  os << std::setprecision(17);
  os << "box_side=" << g.box_side << "\nresolution=" << g.field.spec().points(0)
     << "\np=" << g.p << "\nq=" << g.q << "\nm_inf_estimate=" << g.m_inf_estimate
     << "\nh1_norm_sq=" << g.h1_norm_sq << "\np_norm=" << g.p_norm
     << "\ncoupling=" << g.coupling << "\nhwhm=" << g.hwhm
     << "\ngrad_residual=" << g.grad_residual << "\nnehari_residual=" << g.nehari_residual
     << "\ntol=" << g.tol << "\niterations=" << g.iterations << "\n";
  if (!os) throw SolverError("failed writing " + meta.string());
}

inline GroundStateProfile load_profile(const std::filesystem::path& stem) {
  std::filesystem::path fld = stem, meta = stem;
  fld += ".fld";
  meta += ".meta";
  std::ifstream is(meta);
  if (!is) throw InputError("cannot open profile metadata: " + meta.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find('=');
    if (line.empty() || eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&](const char* key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InputError(std::string("profile metadata lacks ") + key);
    return std::stod(it->second);
  };
  GroundStateProfile g{.box_side = num("box_side"), .p = num("p"), .q = num("q"), .field = read_field(fld)};
  g.m_inf_estimate = num("m_inf_estimate");
  g.h1_norm_sq = num("h1_norm_sq");
  g.p_norm = num("p_norm");
  g.coupling = num("coupling");
  g.hwhm = num("hwhm");
  g.grad_residual = num("grad_residual");
  g.nehari_residual = num("nehari_residual");
  g.tol = num("tol");
  g.iterations = static_cast<int>(num("iterations"));
  g.build_radial();
  return g;
}

struct BumpSpec {
  Vec3 center{};
  double eps = 0.1;
  double cutoff_r = 0.25;
};

/// C^2 cutoff: 1 on [0, r/2], 0 on [r, inf), quintic blend between.
inline double cutoff_chi(double rho, double r) {
  if (rho <= 0.5 * r) return 1.0;
  if (rho >= r) return 0.0;
  const double t = (rho - 0.5 * r) / (0.5 * r);
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

/// Fewer grid cells than this across the profile core (2 hwhm eps) is rejected.
inline constexpr double kMinCoreCells = 4.0;

inline double core_cells(const GroundStateProfile& g, double eps, const TorusSpec& target) {
  return 2.0 * g.hwhm * eps / target.max_spacing();
}

namespace detail {

/// f(d / eps) chi(|d|) with d the periodic displacement from the center.
/// The center is split into a whole cell and a sub-cell offset quantized to
/// 2^-20 cells, so whole-cell moves of the center shift the result exactly.
inline ScalarField place_profile(const TorusSpec& target, const BumpSpec& b,
                                 const std::function<double(const Vec3&)>& f) {
  const Index3& n = target.resolution();
  std::array<int, 3> m{};
  std::array<double, 3> frac{};
  const Vec3 c = target.wrap(b.center);
  for (int a = 0; a < 3; ++a) {
    const double g = c[a] / target.spacing(a);
    double fl = std::floor(g);
    double fr = std::round((g - fl) * 1048576.0) / 1048576.0;
    if (fr >= 1.0) {
      fl += 1.0;
      fr = 0.0;
    }
    m[a] = static_cast<int>(fl) % n[a];
    frac[a] = fr;
  }
  std::array<std::vector<double>, 3> disp;
  for (int a = 0; a < 3; ++a) {
    disp[a].resize(n[a]);
    const double h = target.spacing(a), L = target.side(a);
    for (int i = 0; i < n[a]; ++i) {
      int di = ((i - m[a]) % n[a] + n[a]) % n[a];
      if (di >= n[a] / 2) di -= n[a];
      double d = (di - frac[a]) * h;
      if (d < -0.5 * L) d += L;
      disp[a][i] = d;
    }
  }
  ScalarField out(target);
  std::size_t idx = 0;
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k, ++idx) {
        const Vec3 d{disp[0][i], disp[1][j], disp[2][k]};
        const double rho = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        const double chi = cutoff_chi(rho, b.cutoff_r);
        if (chi == 0.0) continue;
        out[idx] = chi * f({d[0] / b.eps, d[1] / b.eps, d[2] / b.eps});
      }
  return out;
}

inline void check_bump(const BumpSpec& b, const GroundStateProfile& g, const TorusSpec& target) {
  detail::require(b.eps > 0.0 && std::isfinite(b.eps), "bump eps must be positive");
  detail::require(b.cutoff_r > 0.0 && b.cutoff_r < 0.5 * target.min_side(),
                  "cutoff radius must be positive and below half the smallest side");
  const double cells = core_cells(g, b.eps, target);
  if (cells < kMinCoreCells) {
    std::ostringstream os;
    os << "bump unresolved: " << cells << " grid cells across the profile core at eps = "
       << b.eps << " (need " << kMinCoreCells << ")";
    throw InputError(os.str());
  }
}

}  // namespace detail

/// W_{xi,eps}(x) = U((x - xi)/eps) chi_r(|x - xi|)
inline ScalarField build_bump(const BumpSpec& b, const GroundStateProfile& g,
                              const TorusSpec& target) {
  detail::check_bump(b, g, target);
  return detail::place_profile(target, b, [&g](const Vec3& y) { return g.value_at(y); });
}

/// Positive reference bump v_eps: Gaussian of amplitude U(0) and width
/// sigma (in units of eps) under the same cutoff.
inline ScalarField build_reference_bump(const BumpSpec& b, const GroundStateProfile& g,
                                        const TorusSpec& target, double sigma = 2.0) {
  detail::check_bump(b, g, target);
  detail::require(sigma > 0.0, "reference bump width must be positive");
  const double amp = g.center_value();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return detail::place_profile(target, b, [=](const Vec3& y) {
    return amp * std::exp(-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) * inv);
  });
}

inline NehariState psi_map(const Vec3& xi, const ModelParams& params,
                           const GroundStateProfile& g, const TorusSpec& target) {
  params.validate(target);
  return project_to_nehari(build_bump({xi, params.eps, params.cutoff_r}, g, target), params);
}

/// theta v + (1 - theta) W_{xi,eps}
inline ScalarField cone_point(double theta, const Vec3& xi, const ScalarField& v_bump,
                              const ModelParams& params, const GroundStateProfile& g,
                              const TorusSpec& target) {
  detail::require(theta >= 0.0 && theta <= 1.0, "cone parameter theta must lie in [0, 1]");
  ScalarField w = build_bump({xi, params.eps, params.cutoff_r}, g, target);
  v_bump.check_same(w);
  w *= 1.0 - theta;
  w.axpy(theta, v_bump);
  return w;
}

struct ConeGrid {
  std::vector<double> thetas;
  std::vector<Vec3> centers;
  Vec3 xi0{};
  double v_sigma = 2.0;
};

struct ConeSample {
  double theta = 0.0;
  Vec3 xi{};
  double energy = 0.0;
  double t = 0.0;
};

enum class SaddleOutcome { kConverged, kSaddleCandidate, kLowEnergy, kNotRefined };

inline const char* to_string(SaddleOutcome o) {
  switch (o) {
    case SaddleOutcome::kConverged: return "converged";
    case SaddleOutcome::kSaddleCandidate: return "saddle_candidate";
    case SaddleOutcome::kLowEnergy: return "low_energy_basin";
    case SaddleOutcome::kNotRefined: return "not_refined";
  }
  return "unknown";
}

struct RefineOptions {
  int max_iter = 0;          ///< 0 skips the refinement
  double tol = 1e-6;
  double step = 0.5;
  int rotations = 2;         ///< min-mode updates per step
  double rotation_step = 0.5;
  double fd_step = 1e-4;     ///< relative finite-difference step for H d
};

struct HighEnergyResult {
  explicit HighEnergyResult(const TorusSpec& target) : state(ScalarField(target)) {}

  double c_eps = 0.0;
  ConeSample best;
  std::vector<ConeSample> samples;
  NehariState state;
  SaddleOutcome outcome = SaddleOutcome::kNotRefined;
  double level = 0.0;        ///< m_inf_estimate + delta
  std::string diagnostic;
};

namespace detail {

/// L2 representative of J'(v) in spectral form.
inline ComplexBuffer grad_hat(const ScalarField& v, const ModelParams& params) {
  const Evaluation ev = evaluate(v, params);
  return derivatives(v, ev, params).grad_hat;
}

/// Removes the component of w normal to the Nehari set at u (P-metric).
inline void tangent_project(const SpectralGrid& grid, ComplexBuffer& w,
                            const ComplexBuffer& gN, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  auto P = [=](double k2) { return e3 / (1.0 + e2 * k2); };
  const double den = grid.inner(gN, gN, P);
  if (!(den > 0.0)) return;
  const double coef = grid.inner(gN, w) / den;
  const auto& ksq = grid.k_squared();
  for (std::size_t n = 0; n < w.size(); ++n) w[n] -= coef * P(ksq[n]) * gN[n];
}

inline void normalize_h1(const SpectralGrid& grid, ComplexBuffer& w, double eps) {
  const double e2 = eps * eps, e3 = eps * e2;
  const double nrm = std::sqrt(grid.inner(w, w, [=](double k2) { return (1.0 + e2 * k2) / e3; }));
  if (nrm > 0.0)
    for (auto& c : w) c /= nrm;
}

/// Min-mode following on the Nehari set: the step reverses the gradient
/// component along the lowest-curvature tangent direction d, which is
/// updated by preconditioned Rayleigh-quotient steps on finite-difference
/// Hessian products.
inline NehariState refine_saddle(NehariState st, const ScalarField& d0,
                                 const ModelParams& params, const RefineOptions& ro) {
  const double eps = params.eps;
  const double e2 = eps * eps, e3 = eps * e2;
  auto grid = SpectralGrid::get(st.u.spec());
  const auto& ksq = grid->k_squared();
  ComplexBuffer d = grid->forward(d0);
  double step = ro.step;
  for (int it = 0; it < ro.max_iter; ++it) {
    const Evaluation ev = evaluate(st.u, params);
    const Derivatives der = derivatives(st.u, ev, params);
    const Tangent tan = tangential(*ev.grid, der, eps);
    st.energy = ev.energy;
    st.nehari_residual = ev.energy.nehari();
    st.grad_residual = std::sqrt(tan.dual_sq / ev.energy.kinetic_mass);
    st.iterations = it;
    st.trace.push_back({it, ev.energy.total, st.nehari_residual, st.grad_residual, step});
    if (st.grad_residual <= ro.tol) {
      st.converged = true;
      return st;
    }
    tangent_project(*grid, d, der.nehari_grad_hat, eps);
    normalize_h1(*grid, d, eps);
    const double h = ro.fd_step * std::sqrt(ev.energy.kinetic_mass);
    for (int r = 0; r < ro.rotations; ++r) {
      const ScalarField dp = grid->inverse(d);
      ScalarField up = st.u, um = st.u;
      up.axpy(h, dp);
      um.axpy(-h, dp);
      ComplexBuffer hd = grad_hat(up, params);
      const ComplexBuffer gm = grad_hat(um, params);
      for (std::size_t n = 0; n < hd.size(); ++n) hd[n] = (hd[n] - gm[n]) / (2.0 * h);
      const double kappa = grid->inner(d, hd);
      for (std::size_t n = 0; n < d.size(); ++n)
        d[n] -= ro.rotation_step * (e3 / (1.0 + e2 * ksq[n]) * hd[n] - kappa * d[n]);
      tangent_project(*grid, d, der.nehari_grad_hat, eps);
      normalize_h1(*grid, d, eps);
    }
    const double along = grid->inner(tan.g_t, d);
    ComplexBuffer r = tan.g_t;
    for (std::size_t n = 0; n < r.size(); ++n)
      r[n] = e3 / (1.0 + e2 * ksq[n]) * r[n] - 2.0 * along * d[n];
    const ScalarField dir = grid->inverse(std::move(r));
    ScalarField v = st.u;
    v.axpy(-step, dir);
    if (!v.all_finite() || !has_positive_part(v)) {
      st.diagnostic = "refinement left the admissible set";
      return st;
    }
    Projected pr = project_once(v, params);
    st.t_u *= pr.t;
    st.u = std::move(pr.u);
  }
  finalize(st, params);
  st.converged = st.grad_residual <= ro.tol;
  return st;
}

}  // namespace detail

/// Samples J_eps(t_u u) over the cone {theta v + (1 - theta) W_xi}, reports
/// its maximum c_eps and optionally refines the maximizer toward a critical
/// point by min-mode following.
inline HighEnergyResult high_energy_search(const ModelParams& params,
                                           const GroundStateProfile& g,
                                           const TorusSpec& target, const ConeGrid& cone,
                                           const RefineOptions& ro = {}, int parallel = 1) {
  params.validate(target);
  detail::require(!cone.thetas.empty() && !cone.centers.empty(),
                  "cone discretization must be nonempty");
  const ScalarField v =
      build_reference_bump({cone.xi0, params.eps, params.cutoff_r}, g, target, cone.v_sigma);
  HighEnergyResult res(target);
  const std::size_t nt = cone.thetas.size();
  res.samples.resize(nt * cone.centers.size());
  std::vector<std::string> errors(res.samples.size());
  auto eval_one = [&](std::size_t i) {
    const double th = cone.thetas[i % nt];
    const Vec3& xi = cone.centers[i / nt];
    try {
      const NehariState st = project_to_nehari(cone_point(th, xi, v, params, g, target), params);
      res.samples[i] = {th, xi, st.energy.total, st.t_u};
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  };
  const int workers = std::max(1, std::min<int>(parallel, static_cast<int>(res.samples.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < res.samples.size(); ++i) eval_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < res.samples.size(); i += workers) eval_one(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw InputError("cone sampling failed: " + e);

  std::size_t best = 0;
  for (std::size_t i = 1; i < res.samples.size(); ++i)
    if (res.samples[i].energy > res.samples[best].energy) best = i;
  res.best = res.samples[best];
  res.c_eps = res.best.energy;
  res.level = 1.1 * g.m_inf_estimate;

  res.state = project_to_nehari(cone_point(res.best.theta, res.best.xi, v, params, g, target),
                                params);
  res.state.label = "cone_max";
  if (ro.max_iter <= 0) return res;

  ScalarField d0 = v;
  d0 -= build_bump({res.best.xi, params.eps, params.cutoff_r}, g, target);
  if (d0.max_abs() == 0.0) d0 = v;
  res.state = detail::refine_saddle(std::move(res.state), d0, params, ro);
  res.state.label = "cone_refined";
  if (res.state.converged) {
    res.outcome = res.state.energy.total > res.level ? SaddleOutcome::kConverged
                                                     : SaddleOutcome::kLowEnergy;
  } else {
    res.outcome = res.state.energy.total > res.level ? SaddleOutcome::kSaddleCandidate
                                                     : SaddleOutcome::kLowEnergy;
  }
  if (res.outcome == SaddleOutcome::kLowEnergy)
    res.diagnostic = "refinement reached the low-energy basin";
  else if (res.outcome == SaddleOutcome::kSaddleCandidate)
    res.diagnostic = "refinement did not converge; state is a saddle candidate";
  return res;
}

}  // namespace sbpp
