#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sbpp/barycenter.hpp"
#include "sbpp/photography.hpp"

namespace sbpp {

/// Periodic axis-aligned box of grid cells [lo, lo + count) (wrapping) with
/// representative point at its center.
struct PartitionCell {
  Index3 lo{};
  Index3 count{};
  Vec3 center{};
};

struct PartitionSpec {
  double cell_side = 0.0;  ///< smallest cell edge
  std::vector<PartitionCell> cells;
};

/// Congruent grid-aligned boxes whose edge on each axis is the smallest
/// divisor of the resolution giving a length >= 2 eps.
inline PartitionSpec make_partition(const TorusSpec& s, double eps) {
  detail::require(eps > 0.0 && std::isfinite(eps), "partition eps must be positive");
  Index3 w{};
  for (int a = 0; a < 3; ++a) {
    const int n = s.points(a);
    w[a] = n;
    for (int c = 1; c <= n; ++c)
      if (n % c == 0 && c * s.spacing(a) >= 2.0 * eps) {
        w[a] = c;
        break;
      }
  }
  PartitionSpec part;
  part.cell_side = std::min({w[0] * s.spacing(0), w[1] * s.spacing(1), w[2] * s.spacing(2)});
  for (int i = 0; i < s.points(0); i += w[0])
    for (int j = 0; j < s.points(1); j += w[1])
      for (int k = 0; k < s.points(2); k += w[2]) {
        PartitionCell c{{i, j, k}, w, {}};
        for (int a = 0; a < 3; ++a) c.center[a] = (c.lo[a] + 0.5 * w[a]) * s.spacing(a);
        part.cells.push_back(c);
      }
  return part;
}

/// Partition translated by whole grid cells.
inline PartitionSpec shift_partition(const PartitionSpec& part, const TorusSpec& s,
                                     const Index3& shift) {
  PartitionSpec out = part;
  for (auto& c : out.cells) {
    for (int a = 0; a < 3; ++a) {
      const int n = s.points(a);
      c.lo[a] = ((c.lo[a] + shift[a]) % n + n) % n;
    }
    c.center = s.wrap({c.center[0] + shift[0] * s.spacing(0), c.center[1] + shift[1] * s.spacing(1),
                       c.center[2] + shift[2] * s.spacing(2)});
  }
  return out;
}

struct PartitionValidation {
  bool covers = false;      ///< every grid point in exactly one cell
  bool sandwich = false;    ///< B(q, side/4) in P, P in B(q, side), B(q, eps) in P
  int overlap = 0;          ///< max number of enclosing balls over a grid point
  bool ok() const { return covers && sandwich && overlap <= 27; }
  std::string problem;
};

namespace detail {

template <class F>
void for_each_point(const TorusSpec& s, const PartitionCell& c, F&& f) {
  const Index3& n = s.resolution();
  for (int i = 0; i < c.count[0]; ++i) {
    const int ii = (c.lo[0] + i) % n[0];
    for (int j = 0; j < c.count[1]; ++j) {
      const int jj = (c.lo[1] + j) % n[1];
      for (int k = 0; k < c.count[2]; ++k) f(s.index(ii, jj, (c.lo[2] + k) % n[2]));
    }
  }
}

}  // namespace detail

inline PartitionValidation validate_partition(const TorusSpec& s, const PartitionSpec& part,
                                              double eps) {
  PartitionValidation v;
  std::vector<int> hits(s.size(), 0);
  double r_in = std::numeric_limits<double>::infinity(), r_out = 0.0;
  for (const auto& c : part.cells) {
    for (int a = 0; a < 3; ++a) {
      if (c.count[a] <= 0 || c.count[a] > s.points(a)) {
        v.problem = "cell with invalid extent";
        return v;
      }
    }
    detail::for_each_point(s, c, [&](std::size_t idx) { ++hits[idx]; });
    double half_min = std::numeric_limits<double>::infinity(), diag = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double e = c.count[a] * s.spacing(a);
      half_min = std::min(half_min, 0.5 * e);
      diag += 0.25 * e * e;
    }
    r_in = std::min(r_in, half_min);
    r_out = std::max(r_out, std::sqrt(diag));
  }
  v.covers = std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
  if (!v.covers) v.problem = "cells do not cover the torus disjointly";
  const double side = part.cell_side;
  v.sandwich = r_in >= 0.25 * side && r_out <= side && r_in >= eps;
  if (!v.sandwich && v.problem.empty()) v.problem = "ball sandwich violated";

  // Overlap of the enclosing balls B(q_j, side), checked on the first cell's
  // points for congruent partitions and on all points otherwise.
  bool congruent = true;
  for (const auto& c : part.cells) congruent = congruent && c.count == part.cells.front().count;
  std::vector<std::size_t> probe;
  if (congruent && !part.cells.empty()) {
    detail::for_each_point(s, part.cells.front(), [&](std::size_t idx) { probe.push_back(idx); });
  } else {
    for (std::size_t n = 0; n < s.size(); ++n) probe.push_back(n);
  }
  for (std::size_t idx : probe) {
    const Index3 g = s.unravel(idx);
    const Vec3 x = s.position(g[0], g[1], g[2]);
    int cnt = 0;
    for (const auto& c : part.cells)
      if (s.distance(x, c.center) <= side * (1.0 + 1e-12)) ++cnt;
    v.overlap = std::max(v.overlap, cnt);
  }
  if (v.overlap > 27 && v.problem.empty()) v.problem = "enclosing balls overlap more than 27 times";
  return v;
}

struct PartitionResult {
  std::size_t best_cell = 0;
  double best_value = 0.0;
  std::vector<double> values;  ///< (1/eps^3) int_cell (u+)^p per cell
};

inline PartitionResult good_partition_check(const ScalarField& u, const ModelParams& params,
                                            const PartitionSpec& part) {
  require_finite(u, "good_partition_check");
  params.validate();
  detail::require(!part.cells.empty(), "partition has no cells");
  const PartitionValidation v = validate_partition(u.spec(), part, params.eps);
  if (!v.ok()) throw InputError("invalid partition: " + v.problem);
  const double scale = u.spec().cell_volume() / params.eps3();
  PartitionResult r;
  r.values.reserve(part.cells.size());
  for (const auto& c : part.cells) {
    double s = 0.0;
    detail::for_each_point(u.spec(), c, [&](std::size_t idx) {
      const double x = u[idx];
      if (x > 0.0) s += std::pow(x, params.p);
    });
    r.values.push_back(s * scale);
  }
  for (std::size_t i = 1; i < r.values.size(); ++i)
    if (r.values[i] > r.values[r.best_cell]) r.best_cell = i;
  r.best_value = r.values[r.best_cell];
  return r;
}

struct AuditRow {
  double eps = 0.0;
  Index3 resolution{};
  bool skipped = false;
  std::string notice;
  double core_cells = 0.0;
  double kinetic_ratio = 0.0;   ///< ||W||^2_{1,eps} / ||U||^2_{H^1}
  double power_ratio = 0.0;     ///< |W|^p_{p,eps} / |U|^p_p
  double coupling_ratio = 0.0;  ///< (q^2/eps^3) int phi(W) W^2 / q^2 int U^2 phi(U)
  double t_w = 0.0;
  double energy = 0.0;          ///< J_eps(t_W W)
  double gap = 0.0;             ///< energy / m_inf_estimate - 1
};

struct AuditTarget {
  double eps = 0.0;
  TorusSpec target;
};

/// Small-eps limits of the bump family W_{xi,eps} along the given sweep, as ratios
/// to the profile quantities.
inline std::vector<AuditRow> w_limits_audit(const Vec3& xi, const std::vector<AuditTarget>& sweep,
                                            const ModelParams& base, const GroundStateProfile& g) {
  std::vector<AuditRow> rows;
  const double u_power = std::pow(g.p_norm, g.p);
  for (const auto& st : sweep) {
    AuditRow row;
    row.eps = st.eps;
    row.resolution = st.target.resolution();
    row.core_cells = core_cells(g, st.eps, st.target);
    const ModelParams mp = base.with_eps(st.eps);
    try {
      mp.validate(st.target);
      const ScalarField w = build_bump({xi, st.eps, mp.cutoff_r}, g, st.target);
      const EnergyBreakdown e = energy_J(w, mp);
      row.kinetic_ratio = e.kinetic_mass / g.h1_norm_sq;
      row.power_ratio = e.power / u_power;
      row.coupling_ratio = e.coupling / g.coupling;
      row.t_w = nehari_scale(e.kinetic_mass, e.coupling, e.power, mp.p);
      row.energy = e.scaled(row.t_w, mp.p).total;
      row.gap = row.energy / g.m_inf_estimate - 1.0;
    } catch (const InputError& ex) {
      row.skipped = true;
      row.notice = ex.what();
    }
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kAuditCsvHeader =
    "eps,n0,n1,n2,skipped,core_cells,kinetic_ratio,power_ratio,coupling_ratio,t_w,energy,gap";

inline void write_audit_csv(std::ostream& os, const std::vector<AuditRow>& rows) {
  os << kAuditCsvHeader << "\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.eps << ',' << r.resolution[0] << ',' << r.resolution[1] << ',' << r.resolution[2]
       << ',' << (r.skipped ? 1 : 0) << ',' << r.core_cells << ',' << r.kinetic_ratio << ','
       << r.power_ratio << ',' << r.coupling_ratio << ',' << r.t_w << ',' << r.energy << ','
       << r.gap << "\n";
  }
}

}  // namespace sbpp
