#pragma once

// Output directory layout of run_experiment:
//   report.txt            key = value report (deterministic)
//   timing.txt            wall times (kept out of the report)
//   <name>.fld            field dumps referenced from the report
//   trace_<label>.csv     iteration,energy,nehari_residual,grad_residual,step
//   sweep.csv             eps,n,core_cells,psi_energy,t_w,m_eps,grad_residual,converged,
//                         m_inf_estimate,gap
//   audit.csv             see kAuditCsvHeader
//   cone.csv              theta,xi0,xi1,xi2,energy,t

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sbpp/config.hpp"
#include "sbpp/diagnostics.hpp"
#include "sbpp/field_io.hpp"
#include "sbpp/nehari.hpp"
#include "sbpp/photography.hpp"

namespace sbpp {

inline constexpr const char* kVersion = "sbpp 1.0.0";
inline constexpr const char* kTraceCsvHeader = "iteration,energy,nehari_residual,grad_residual,step";
inline constexpr const char* kSweepCsvHeader =
    "eps,n,core_cells,psi_energy,t_w,m_eps,grad_residual,converged,m_inf_estimate,gap";
inline constexpr const char* kConeCsvHeader = "theta,xi0,xi1,xi2,energy,t";

struct RunReport {
  std::string text;
  std::filesystem::path directory;
  std::vector<std::string> files;  ///< relative to directory
  double m_eps_best = 0.0;
  bool all_converged = true;
  double wall_seconds = 0.0;
  std::vector<std::string> timings;  ///< written to timing.txt only

  int exit_code() const { return all_converged ? 0 : 2; }
};

namespace detail {

class ReportWriter {
 public:
  template <class T>
  void put(const std::string& key, const T& v) {
    os_ << key << " = " << v << "\n";
  }
  void num(const std::string& key, double v) { os_ << key << " = " << fmt(v) << "\n"; }
  void vec(const std::string& key, const Vec3& v) {
    os_ << key << " = " << fmt(v[0]) << " " << fmt(v[1]) << " " << fmt(v[2]) << "\n";
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

inline std::string fmt_time(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << s;
  return os.str();
}

inline void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream os(path);
  if (!os) throw SolverError("cannot open for writing: " + path.string());
  os << kTraceCsvHeader << "\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << r.iteration << ',' << r.energy << ',' << r.nehari_residual << ',' << r.grad_residual
       << ',' << r.step << "\n";
  if (!os) throw SolverError("failed writing " + path.string());
}

inline GroundStateProfile obtain_profile(const ExperimentConfig& c) {
  SolverOptions o;
  o.tol = c.profile_tol;
  o.memory = c.memory;
  o.max_iter = std::max(c.max_iter, 2000);
  if (!c.profile_cache.empty()) {
    std::filesystem::path meta = c.profile_cache;
    meta += ".meta";
    if (std::filesystem::exists(meta)) {
      GroundStateProfile g = load_profile(c.profile_cache);
      if (g.p != c.model.p || g.q != c.model.q || g.box_side != c.profile_box ||
          g.field.spec().points(0) != c.profile_n)
        throw InputError("profile.cache: cached profile does not match model.p, model.q, "
                         "profile.box and profile.N");
      return g;
    }
    GroundStateProfile g = compute_limit_ground_state(c.profile_box, c.profile_n, c.model.p,
                                                      c.model.q, o);
    save_profile(g, c.profile_cache);
    return g;
  }
  return compute_limit_ground_state(c.profile_box, c.profile_n, c.model.p, c.model.q, o);
}

inline SolverOptions solver_options(const ExperimentConfig& c) {
  SolverOptions o;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  o.armijo = c.armijo;
  o.backtrack = c.backtrack;
  o.distinct_tol = c.distinct_tol;
  o.memory = c.memory;
  o.parallel = c.parallel;
  return o;
}

/// Field from a cell-quantized random superposition of three bumps.
inline ScalarField random_init(const ExperimentConfig& c, const GroundStateProfile& g,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const TorusSpec s = c.torus();
  ScalarField u(s);
  for (int b = 0; b < 3; ++b) {
    Vec3 xi{};
    for (int a = 0; a < 3; ++a) {
      const int cell = static_cast<int>(rng() % static_cast<std::uint64_t>(s.points(a)));
      xi[a] = cell * s.spacing(a);
    }
    const double amp = 0.5 + 0.5 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    u.axpy(amp, build_bump({xi, c.model.eps, c.model.cutoff_r}, g, s));
  }
  return u;
}

inline std::vector<Initializer> make_inits(const ExperimentConfig& c,
                                           const GroundStateProfile* g) {
  const TorusSpec s = c.torus();
  const Vec3 xi = c.center();
  std::vector<Initializer> out;
  int nrandom = 0;
  for (InitKind k : c.inits) {
    switch (k) {
      case InitKind::kOneBump:
        out.push_back({build_bump({xi, c.model.eps, c.model.cutoff_r}, *g, s), {}, "one_bump"});
        break;
      case InitKind::kTwoBump: {
        // Half-period translate along the first axis, kept by symmetry.
        ScalarField u = build_bump({xi, c.model.eps, c.model.cutoff_r}, *g, s);
        u += circular_shift(u, {s.points(0) / 2, 0, 0});
        out.push_back({std::move(u), {Index3{s.points(0) / 2, 0, 0}}, "two_bump"});
        break;
      }
      case InitKind::kConstant:
        out.push_back({ScalarField::constant(s, 1.0), {}, "constant"});
        break;
      case InitKind::kRandom:
        out.push_back({random_init(c, *g, c.seed + static_cast<std::uint64_t>(nrandom)), {},
                       "random_" + std::to_string(nrandom)});
        ++nrandom;
        break;
    }
  }
  return out;
}

inline bool needs_profile(const ExperimentConfig& c) {
  if (c.mode == Mode::kConstant) return false;
  if (c.mode != Mode::kGround) return true;
  for (InitKind k : c.inits)
    if (k != InitKind::kConstant) return true;
  return false;
}

inline void record_state(ReportWriter& w, const std::string& prefix, const NehariState& st,
                         const ModelParams& mp) {
  w.put(prefix + ".label", st.label);
  w.num(prefix + ".energy.total", st.energy.total);
  w.num(prefix + ".energy.kinetic_mass", st.energy.kinetic_mass);
  w.num(prefix + ".energy.coupling", st.energy.coupling);
  w.num(prefix + ".energy.power", st.energy.power);
  w.num(prefix + ".t_u", st.t_u);
  w.num(prefix + ".nehari_residual", st.nehari_residual);
  w.num(prefix + ".grad_residual", st.grad_residual);
  w.put(prefix + ".iterations", st.iterations);
  w.put(prefix + ".converged", st.converged ? 1 : 0);
  w.put(prefix + ".collapsed", st.collapsed ? 1 : 0);
  w.put(prefix + ".stalled", st.stalled ? 1 : 0);
  w.put(prefix + ".constant", is_spatially_constant(st.u) ? 1 : 0);
  if (!st.diagnostic.empty()) w.put(prefix + ".diagnostic", st.diagnostic);
  try {
    const ConcentrationReport cr = concentration_center(st.u, mp, 0.5 * mp.cutoff_r);
    w.vec(prefix + ".barycenter", cr.barycenter);
    w.vec(prefix + ".resultant_length", cr.resultant_length);
    w.put(prefix + ".barycenter_degenerate",
          (cr.degenerate[0] || cr.degenerate[1] || cr.degenerate[2]) ? 1 : 0);
    w.vec(prefix + ".concentration.center", cr.center_q);
    w.num(prefix + ".concentration.radius", cr.ball_radius);
    w.num(prefix + ".concentration.mass_fraction", cr.mass_fraction_in_ball);
  } catch (const InputError& e) {
    w.put(prefix + ".barycenter", std::string("unavailable (") + e.what() + ")");
  }
}

}  // namespace detail

/// Dispatches on the mode, writes every artifact into the output directory
/// and returns the report.
inline RunReport run_experiment(const ExperimentConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  RunReport rep;
  rep.directory = c.output_dir;
  std::error_code ec;
  fs::create_directories(rep.directory, ec);
  if (ec) throw SolverError("cannot create output directory " + rep.directory.string() + ": " +
                            ec.message());

  detail::ReportWriter w;
  w.put("version", kVersion);
  {
    std::istringstream echo(c.echo());
    for (std::string line; std::getline(echo, line);) {
      const auto eq = line.find('=');
      w.put("config." + line.substr(0, eq), line.substr(eq + 1));
    }
  }
  const TorusSpec spec = c.torus();
  const ModelParams& mp = c.model;
  const ConstantSolution cs = constant_solution(mp, spec.volume());
  w.num("constant.c_star", cs.c_star);
  w.num("constant.residual", cs.residual);
  w.num("constant.energy", cs.energy);

  std::optional<GroundStateProfile> profile;
  if (detail::needs_profile(c)) {
    profile = detail::obtain_profile(c);
    w.num("profile.m_inf_estimate", profile->m_inf_estimate);
    w.num("profile.h1_norm_sq", profile->h1_norm_sq);
    w.num("profile.p_norm", profile->p_norm);
    w.num("profile.coupling", profile->coupling);
    w.num("profile.hwhm", profile->hwhm);
    w.num("profile.grad_residual", profile->grad_residual);
    w.num("profile.delta", 0.1 * profile->m_inf_estimate);
    const fs::path stem = rep.directory / "profile";
    save_profile(*profile, stem);
    rep.files.push_back("profile.fld");
    rep.files.push_back("profile.meta");
    w.put("profile.field", "profile.fld");
  }

  auto dump = [&](const std::string& name, const ScalarField& u) {
    write_field(rep.directory / name, u);
    rep.files.push_back(name);
  };
  auto trace = [&](const std::string& name, const std::vector<TraceRow>& rows) {
    detail::write_trace(rep.directory / name, rows);
    rep.files.push_back(name);
  };
  double best = std::numeric_limits<double>::infinity();

  switch (c.mode) {
    case Mode::kConstant: {
      const ScalarField u = ScalarField::constant(spec, cs.c_star);
      const EnergyBreakdown e = energy_J(u, mp);
      w.num("constant.numeric_energy", e.total);
      w.num("constant.grad_max_abs", grad_J(u, mp).max_abs());
      w.num("constant.energy_rel_deviation", std::abs(e.total - cs.energy) / cs.energy);
      best = cs.energy;
      break;
    }
    case Mode::kGround: {
      SolverOptions o = detail::solver_options(c);
      const auto inits = detail::make_inits(c, profile ? &*profile : nullptr);
      const MultistartResult r = multistart_search(inits, mp, o);
      w.put("runs.count", r.all.size());
      for (std::size_t i = 0; i < r.all.size(); ++i) {
        const auto& st = r.all[i];
        const std::string pre = "run." + std::to_string(i);
        detail::record_state(w, pre, st, mp);
        const std::string fname = "run_" + std::to_string(i) + "_" + st.label;
        dump(fname + ".fld", st.u);
        w.put(pre + ".field", fname + ".fld");
        trace("trace_" + std::to_string(i) + "_" + st.label + ".csv", st.trace);
        w.put(pre + ".trace", "trace_" + std::to_string(i) + "_" + st.label + ".csv");
        rep.all_converged = rep.all_converged && st.converged;
        rep.timings.push_back(pre + ".wall_seconds = " + detail::fmt_time(st.wall_seconds));
      }
      if (r.all.size() != inits.size()) rep.all_converged = false;
      w.put("solutions.distinct", r.distinct.size());
      for (std::size_t i = 0; i < r.distinct.size(); ++i)
        w.put("solution." + std::to_string(i) + ".label", r.distinct[i].label);
      for (std::size_t i = 0; i < r.distinct.size(); ++i) {
        w.num("solution." + std::to_string(i) + ".energy", r.distinct[i].energy.total);
        best = std::min(best, r.distinct[i].energy.total);
      }
      for (std::size_t i = 0; i < r.diagnostics.size(); ++i)
        w.put("diagnostic." + std::to_string(i), r.diagnostics[i]);
      break;
    }
    case Mode::kPhotography: {
      const int k = c.photography_centers;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int i = 0; i < k; ++i) {
        const Vec3 base = c.center();
        const Vec3 xi = spec.wrap({base[0] + spec.side(0) * i / k, base[1] + spec.side(1) * i / k,
                                   base[2] + spec.side(2) * i / k});
        NehariState st = psi_map(xi, mp, *profile, spec);
        st.label = "psi_" + std::to_string(i);
        const std::string pre = "psi." + std::to_string(i);
        w.vec(pre + ".xi", xi);
        detail::record_state(w, pre, st, mp);
        w.num(pre + ".gap", st.energy.total / profile->m_inf_estimate - 1.0);
        dump("psi_" + std::to_string(i) + ".fld", st.u);
        w.put(pre + ".field", "psi_" + std::to_string(i) + ".fld");
        lo = std::min(lo, st.energy.total);
        hi = std::max(hi, st.energy.total);
      }
      w.num("psi.energy_spread", hi - lo);
      w.put("psi.within_delta", (hi - lo) <= 0.1 * profile->m_inf_estimate ? 1 : 0);
      best = lo;
      break;
    }
    case Mode::kCone: {
      ConeGrid cone;
      cone.thetas = c.cone_thetas;
      cone.xi0 = c.center();
      cone.v_sigma = c.cone_sigma;
      for (int i = 0; i < c.cone_centers; ++i) {
        const Vec3 b = c.center();
        cone.centers.push_back(spec.wrap({b[0] + spec.side(0) * i / c.cone_centers, b[1], b[2]}));
      }
      RefineOptions ro;
      ro.max_iter = c.cone_refine_iter;
      ro.tol = c.tol;
      const HighEnergyResult he = high_energy_search(mp, *profile, spec, cone, ro, c.parallel);
      w.num("cone.c_eps", he.c_eps);
      w.num("cone.best.theta", he.best.theta);
      w.vec("cone.best.xi", he.best.xi);
      w.put("cone.outcome", to_string(he.outcome));
      if (!he.diagnostic.empty()) w.put("cone.diagnostic", he.diagnostic);
      detail::record_state(w, "cone.state", he.state, mp);
      dump("cone_state.fld", he.state.u);
      w.put("cone.state.field", "cone_state.fld");
      {
        std::ofstream os(rep.directory / "cone.csv");
        os << kConeCsvHeader << "\n" << std::setprecision(17);
        for (const auto& s : he.samples)
          os << s.theta << ',' << s.xi[0] << ',' << s.xi[1] << ',' << s.xi[2] << ',' << s.energy
             << ',' << s.t << "\n";
        if (!os) throw SolverError("failed writing cone.csv");
        rep.files.push_back("cone.csv");
      }
      if (!he.state.trace.empty()) trace("trace_cone.csv", he.state.trace);
      rep.all_converged = he.outcome == SaddleOutcome::kConverged ||
                          (he.outcome == SaddleOutcome::kNotRefined);
      best = he.c_eps;
      break;
    }
    case Mode::kSweep: {
      std::ofstream os(rep.directory / "sweep.csv");
      os << kSweepCsvHeader << "\n" << std::setprecision(17);
      for (std::size_t i = 0; i < c.sweep_eps.size(); ++i) {
        const double e = c.sweep_eps[i];
        const TorusSpec t(spec.side_lengths(), {c.sweep_n[i], c.sweep_n[i], c.sweep_n[i]});
        const ModelParams m = mp.with_eps(e);
        const std::string pre = "sweep." + std::to_string(i);
        w.num(pre + ".eps", e);
        w.put(pre + ".n", c.sweep_n[i]);
        try {
          const NehariState psi = psi_map(c.center(), m, *profile, t);
          NehariState st = minimize_on_nehari(psi.u, m, detail::solver_options(c));
          st.label = "sweep_" + std::to_string(i);
          detail::record_state(w, pre, st, m);
          w.num(pre + ".psi_energy", psi.energy.total);
          w.num(pre + ".t_w", psi.t_u);
          dump(st.label + ".fld", st.u);
          w.put(pre + ".field", st.label + ".fld");
          trace("trace_" + st.label + ".csv", st.trace);
          os << e << ',' << c.sweep_n[i] << ',' << core_cells(*profile, e, t) << ','
             << psi.energy.total << ',' << psi.t_u << ',' << st.energy.total << ','
             << st.grad_residual << ',' << (st.converged ? 1 : 0) << ','
             << profile->m_inf_estimate << ','
             << st.energy.total / profile->m_inf_estimate - 1.0 << "\n";
          rep.all_converged = rep.all_converged && st.converged;
          if (st.converged) best = std::min(best, st.energy.total);
        } catch (const InputError& ex) {
          w.put(pre + ".skipped", ex.what());
          rep.all_converged = false;
        }
      }
      if (!os) throw SolverError("failed writing sweep.csv");
      rep.files.push_back("sweep.csv");
      break;
    }
    case Mode::kAudit: {
      std::vector<AuditTarget> sweep;
      for (std::size_t i = 0; i < c.sweep_eps.size(); ++i)
        sweep.push_back({c.sweep_eps[i],
                         TorusSpec(spec.side_lengths(), {c.sweep_n[i], c.sweep_n[i], c.sweep_n[i]})});
      const auto rows = w_limits_audit(c.center(), sweep, mp, *profile);
      std::ofstream os(rep.directory / "audit.csv");
      write_audit_csv(os, rows);
      if (!os) throw SolverError("failed writing audit.csv");
      rep.files.push_back("audit.csv");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string pre = "audit." + std::to_string(i);
        w.num(pre + ".eps", rows[i].eps);
        w.put(pre + ".skipped", rows[i].skipped ? 1 : 0);
        if (rows[i].skipped) {
          w.put(pre + ".notice", rows[i].notice);
          continue;
        }
        w.num(pre + ".kinetic_ratio", rows[i].kinetic_ratio);
        w.num(pre + ".power_ratio", rows[i].power_ratio);
        w.num(pre + ".coupling_ratio", rows[i].coupling_ratio);
        w.num(pre + ".t_w", rows[i].t_w);
        w.num(pre + ".gap", rows[i].gap);
        best = std::min(best, rows[i].energy);
      }
      break;
    }
  }

  rep.m_eps_best = best;
  w.num("m_eps_best", best);
  w.put("status", rep.all_converged ? "converged" : "partial");
  rep.text = w.str();
  {
    std::ofstream os(rep.directory / "report.txt");
    os << rep.text;
    if (!os) throw SolverError("failed writing " + (rep.directory / "report.txt").string());
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream os(rep.directory / "timing.txt");
    os << "wall_seconds = " << rep.wall_seconds << "\n";
    for (const auto& t : rep.timings) os << t << "\n";
  }
  return rep;
}

}  // namespace sbpp
