#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbpp/bopp_podolsky.hpp"
#include "sbpp/fields.hpp"

namespace sbpp {

/// Pieces of J_eps(u) = kinetic_mass/2 + coupling/4 - power/p.
struct EnergyBreakdown {
  double kinetic_mass = 0.0;  ///< ||u||^2_{1,eps}
  double coupling = 0.0;      ///< (q^2/eps^3) int phi(u) u^2
  double power = 0.0;         ///< |u+|^p_{p,eps}
  double total = 0.0;

  static EnergyBreakdown from_parts(double a, double b, double c, double p) {
    return {a, b, c, 0.5 * a + 0.25 * b - c / p};
  }
  /// Breakdown of t*u given the breakdown of u (phi(tu) = t^2 phi(u)).
  EnergyBreakdown scaled(double t, double p) const {
    const double t2 = t * t;
    return from_parts(t2 * kinetic_mass, t2 * t2 * coupling,
                      std::pow(std::abs(t), p) * power, p);
  }
  /// N_eps = J'(u)[u]
  double nehari() const { return kinetic_mass + coupling - power; }
};

namespace detail {

/// One pass over u: spectral coefficients, phi(u) and the energy pieces.
struct Evaluation {
  std::shared_ptr<const SpectralGrid> grid;
  ComplexBuffer u_hat;
  ScalarField phi;
  EnergyBreakdown energy;
};

inline Evaluation evaluate(const ScalarField& u, const ModelParams& params) {
  require_finite(u, "energy evaluation");
  params.validate();
  auto grid = SpectralGrid::get(u.spec());
  ComplexBuffer u_hat = grid->forward(u);
  const double e2 = params.eps * params.eps;
  const double e3 = params.eps3();
  const double a = grid->inner(u_hat, u_hat, [e2](double k2) { return 1.0 + e2 * k2; }) / e3;

  ScalarField phi = phi_from_square(*grid, squared(u), params.eps);
  double coup = 0.0, pow_sum = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double v = u[n];
    coup += phi[n] * v * v;
    if (v > 0.0) pow_sum += std::pow(v, params.p);
  }
  const double dv = u.spec().cell_volume();
  const double b = params.q * params.q * coup * dv / e3;
  const double c = pow_sum * dv / e3;
  return {std::move(grid), std::move(u_hat), std::move(phi),
          EnergyBreakdown::from_parts(a, b, c, params.p)};
}

/// Spectral L2-representatives of J'(u) and N'(u) in the (grid) pairing
/// J'(u)[h] = sum g h dV.
struct Derivatives {
  ComplexBuffer grad_hat;
  ComplexBuffer nehari_grad_hat;
};

inline Derivatives derivatives(const ScalarField& u, const Evaluation& ev,
                               const ModelParams& params) {
  const SpectralGrid& grid = *ev.grid;
  const double q2 = params.q * params.q;
  const double pm1 = params.p - 1.0;
  ScalarField coupling_term(u.spec()), power_term(u.spec());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double v = u[n];
    coupling_term[n] = q2 * ev.phi[n] * v;
    power_term[n] = v > 0.0 ? std::pow(v, pm1) : 0.0;
  }
  const ComplexBuffer A = grid.forward(coupling_term);
  const ComplexBuffer B = grid.forward(power_term);
  const auto& ksq = grid.k_squared();
  const double e2 = params.eps * params.eps;
  const double inv_e3 = 1.0 / params.eps3();
  Derivatives d{ComplexBuffer(A.size()), ComplexBuffer(A.size())};
  for (std::size_t n = 0; n < A.size(); ++n) {
    const Complex lin = (1.0 + e2 * ksq[n]) * ev.u_hat[n];
    d.grad_hat[n] = (lin + A[n] - B[n]) * inv_e3;
    d.nehari_grad_hat[n] = (2.0 * lin + 4.0 * A[n] - params.p * B[n]) * inv_e3;
  }
  return d;
}

}  // namespace detail

inline EnergyBreakdown energy_J(const ScalarField& u, const ModelParams& params) {
  return detail::evaluate(u, params).energy;
}

/// L2-gradient (1/eps^3)(-eps^2 Lap u + u + q^2 phi(u) u - (u+)^(p-1)); its
/// grid inner product with h is the directional derivative of energy_J.
inline ScalarField grad_J(const ScalarField& u, const ModelParams& params) {
  const auto ev = detail::evaluate(u, params);
  auto d = detail::derivatives(u, ev, params);
  return ev.grid->inverse(std::move(d.grad_hat));
}

inline double nehari_N(const ScalarField& u, const ModelParams& params) {
  require_finite(u, "nehari_N");
  detail::require(u.max_abs() > 0.0, "nehari_N: the zero field is excluded from the Nehari set");
  return energy_J(u, params).nehari();
}

/// Gamma(u) = (1/2 - 1/p)(1/eps^3)(u+)^p - (q^2/(4 eps^3)) u^2 phi(u)
inline ScalarField gamma_density(const ScalarField& u, const ModelParams& params) {
  require_finite(u, "gamma_density");
  params.validate();
  auto grid = SpectralGrid::get(u.spec());
  const ScalarField phi = detail::phi_from_square(*grid, detail::squared(u), params.eps);
  const double inv_e3 = 1.0 / params.eps3();
  const double cp = (0.5 - 1.0 / params.p) * inv_e3;
  const double cc = 0.25 * params.q * params.q * inv_e3;
  ScalarField g(u.spec());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double v = u[n];
    const double vp = v > 0.0 ? std::pow(v, params.p) : 0.0;
    g[n] = cp * vp - cc * v * v * phi[n];
  }
  return g;
}

/// The three on-manifold expressions of J_eps.
struct IdentityRecord {
  double via_gamma = 0.0;           ///< int Gamma(u)
  double via_norm_coupling = 0.0;   ///< (1/2-1/p)||u||^2 + (1/4-1/p) coupling
  double via_norm_power = 0.0;      ///< ||u||^2/4 + (1/4-1/p) power
  double energy = 0.0;              ///< energy_J total
  double max_rel_deviation = 0.0;   ///< over all pairs of the four values
  double nehari_residual = 0.0;
};

inline IdentityRecord energy_identities(const ScalarField& u, const ModelParams& params,
                                        double tolerance = 1e-8) {
  const EnergyBreakdown e = energy_J(u, params);
  const double residual = e.nehari();
  if (!(std::abs(residual) <= tolerance * e.kinetic_mass)) {
    std::ostringstream os;
    os << "energy_identities: field is not on the Nehari manifold (N = " << residual
       << ", allowed " << tolerance * e.kinetic_mass << ")";
    throw InputError(os.str());
  }
  const double p = params.p;
  IdentityRecord r;
  r.via_gamma = integrate(gamma_density(u, params));
  r.via_norm_coupling = (0.5 - 1.0 / p) * e.kinetic_mass + (0.25 - 1.0 / p) * e.coupling;
  r.via_norm_power = 0.25 * e.kinetic_mass + (0.25 - 1.0 / p) * e.power;
  r.energy = e.total;
  r.nehari_residual = residual;
  const double vals[4] = {r.via_gamma, r.via_norm_coupling, r.via_norm_power, r.energy};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const double scale = std::max(std::abs(vals[i]), std::abs(vals[j]));
      if (scale > 0.0)
        r.max_rel_deviation = std::max(r.max_rel_deviation, std::abs(vals[i] - vals[j]) / scale);
    }
  return r;
}

}  // namespace sbpp
