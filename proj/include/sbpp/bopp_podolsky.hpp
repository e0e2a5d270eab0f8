#pragma once

#include <cmath>
#include <numbers>

#include "sbpp/fields.hpp"

namespace sbpp {

/// Inverse symbol of -eps^2 Lap + eps^4 Lap^2 + 1 at |k|^2 = k_sq; lies in (0, 1].
inline double phi_multiplier(double k_sq, double eps) {
  detail::require(k_sq >= 0.0, "phi_multiplier: k_sq must be nonnegative");
  const double a = eps * eps * k_sq;
  return 1.0 / (1.0 + a + a * a);
}

struct PhiSolveReport {
  double min_value = 0.0;
  /// sqrt(int phi^2 + |grad phi|^2 + |Lap phi|^2), spectral quadrature.
  double h2_norm = 0.0;
  /// |u|_2^2 = int u^2, the right-hand side of the H^2 bound.
  double source_l2 = 0.0;
};

struct PhiSolution {
  ScalarField phi;
  PhiSolveReport report;
};

namespace detail {

/// phi(u) from the spectral coefficients of u^2; returns phi in physical space
/// and optionally its H^2 norm squared.
inline ScalarField phi_from_square(const SpectralGrid& grid, const ScalarField& u2, double eps,
                                   double* h2_sq = nullptr) {
  ComplexBuffer c = grid.forward(u2);
  const auto& ksq = grid.k_squared();
  const double four_pi = 4.0 * std::numbers::pi;
  const double e2 = eps * eps;
  for (std::size_t n = 0; n < c.size(); ++n) {
    const double a = e2 * ksq[n];
    c[n] *= four_pi / (1.0 + a + a * a);
  }
  if (h2_sq) {
    *h2_sq = grid.inner(c, c, [](double k2) { return 1.0 + k2 + k2 * k2; });
  }
  return grid.inverse(std::move(c));
}

inline ScalarField squared(const ScalarField& u) {
  ScalarField u2 = u;
  for (double& v : u2.values()) v *= v;
  return u2;
}

}  // namespace detail

/// Unique grid solution of -eps^2 Lap phi + eps^4 Lap^2 phi + phi = 4 pi u^2.
inline PhiSolution solve_phi(const ScalarField& u, const ModelParams& params) {
  require_finite(u, "solve_phi");
  params.validate();
  auto grid = SpectralGrid::get(u.spec());
  const ScalarField u2 = detail::squared(u);
  double h2_sq = 0.0;
  ScalarField phi = detail::phi_from_square(*grid, u2, params.eps, &h2_sq);
  PhiSolveReport rep;
  rep.min_value = phi.min();
  rep.h2_norm = std::sqrt(h2_sq);
  rep.source_l2 = integrate(u2);
  return {std::move(phi), rep};
}

struct PhiPropertyRecord {
  /// max |phi(t u) - t^2 phi(u)| / max |t^2 phi(u)|
  double scaling_deviation = 0.0;
  double min_phi = 0.0;
  double max_phi = 0.0;
};

inline PhiPropertyRecord check_phi_properties(const ScalarField& u, const ModelParams& params,
                                              double t) {
  detail::require(t != 0.0 && std::isfinite(t), "check_phi_properties: t must be nonzero");
  const PhiSolution base = solve_phi(u, params);
  ScalarField tu = u;
  tu *= t;
  const PhiSolution scaled = solve_phi(tu, params);

  PhiPropertyRecord rec;
  rec.min_phi = base.phi.min();
  rec.max_phi = base.phi.max();
  double dev = 0.0, ref = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double expect = t * t * base.phi[n];
    dev = std::max(dev, std::abs(scaled.phi[n] - expect));
    ref = std::max(ref, std::abs(expect));
  }
  rec.scaling_deviation = ref > 0.0 ? dev / ref : dev;
  return rec;
}

}  // namespace sbpp
