#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sbpp/energy.hpp"

namespace sbpp {

/// Resultant lengths below this value make the circular mean on that axis
/// ill-defined.
inline constexpr double kDegenerateResultant = 0.05;

struct Barycenter {
  Vec3 point{};
  Vec3 resultant_length{};
  std::array<bool, 3> degenerate{};
  double gamma_mass = 0.0;

  bool any_degenerate() const { return degenerate[0] || degenerate[1] || degenerate[2]; }
};

/// Gamma-weighted per-axis circular mean of a density already evaluated on
/// the grid. Throws if the total weight is not positive.
inline Barycenter weighted_circular_mean(const ScalarField& weight) {
  const TorusSpec& s = weight.spec();
  const Index3& n = s.resolution();
  std::array<std::vector<double>, 3> cs, sn;
  for (int a = 0; a < 3; ++a) {
    cs[a].resize(n[a]);
    sn[a].resize(n[a]);
    for (int i = 0; i < n[a]; ++i) {
      const double th = 2.0 * std::numbers::pi * i / n[a];
      cs[a][i] = std::cos(th);
      sn[a][i] = std::sin(th);
    }
  }
  double total = 0.0;
  std::array<double, 3> C{}, S{};
  std::size_t idx = 0;
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k, ++idx) {
        const double w = weight[idx];
        total += w;
        C[0] += w * cs[0][i];
        S[0] += w * sn[0][i];
        C[1] += w * cs[1][j];
        S[1] += w * sn[1][j];
        C[2] += w * cs[2][k];
        S[2] += w * sn[2][k];
      }
  if (!(total > 0.0)) throw InputError("barycenter: Gamma mass is not positive");
  Barycenter b;
  b.gamma_mass = total * s.cell_volume();
  for (int a = 0; a < 3; ++a) {
    const double len = std::hypot(C[a], S[a]) / total;
    b.resultant_length[a] = std::clamp(len, 0.0, 1.0);
    b.degenerate[a] = len < kDegenerateResultant;
    double x = std::atan2(S[a], C[a]) / (2.0 * std::numbers::pi) * s.side(a);
    if (x < 0.0) x += s.side(a);
    if (x >= s.side(a)) x -= s.side(a);
    b.point[a] = x;
  }
  return b;
}

inline Barycenter barycenter(const ScalarField& u, const ModelParams& params) {
  return weighted_circular_mean(gamma_density(u, params));
}

struct ConcentrationReport {
  Vec3 barycenter{};
  Vec3 resultant_length{};
  std::array<bool, 3> degenerate{};
  Vec3 center_q{};
  /// Ball mass over total Gamma mass, clamped to [0, 1].
  double mass_fraction_in_ball = 0.0;
  /// Unclamped ratio; exceeds 1 when Gamma has negative tails outside the ball.
  double raw_fraction = 0.0;
  double ball_radius = 0.0;
  double ball_mass = 0.0;
  double total_mass = 0.0;
};

namespace detail {

/// Indicator of the periodic ball of given radius centered at the origin.
inline ScalarField ball_indicator(const TorusSpec& s, double radius) {
  ScalarField b(s);
  const Index3& n = s.resolution();
  const double r2 = radius * radius;
  std::size_t idx = 0;
  for (int i = 0; i < n[0]; ++i) {
    const double dx = std::min(i, n[0] - i) * s.spacing(0);
    for (int j = 0; j < n[1]; ++j) {
      const double dy = std::min(j, n[1] - j) * s.spacing(1);
      for (int k = 0; k < n[2]; ++k, ++idx) {
        const double dz = std::min(k, n[2] - k) * s.spacing(2);
        b[idx] = (dx * dx + dy * dy + dz * dz <= r2 * (1.0 + 1e-12)) ? 1.0 : 0.0;
      }
    }
  }
  return b;
}

/// c(s) = sum_x a(x) b(x - s) for every cell shift s.
inline ScalarField circular_correlation(const ScalarField& a, const ScalarField& b) {
  a.check_same(b);
  auto grid = SpectralGrid::get(a.spec());
  ComplexBuffer ah = grid->forward(a);
  const ComplexBuffer bh = grid->forward(b);
  for (std::size_t n = 0; n < ah.size(); ++n) ah[n] *= std::conj(bh[n]);
  return grid->inverse(std::move(ah));
}

/// c(s) = sum_x a(x) b(s - x)
inline ScalarField circular_convolution(const ScalarField& a, const ScalarField& b) {
  a.check_same(b);
  auto grid = SpectralGrid::get(a.spec());
  ComplexBuffer ah = grid->forward(a);
  const ComplexBuffer bh = grid->forward(b);
  for (std::size_t n = 0; n < ah.size(); ++n) ah[n] *= bh[n];
  return grid->inverse(std::move(ah));
}

inline std::size_t argmax(const ScalarField& f) {
  std::size_t best = 0;
  for (std::size_t n = 1; n < f.size(); ++n)
    if (f[n] > f[best]) best = n;
  return best;
}

}  // namespace detail

/// Grid point q maximizing the Gamma-mass of the periodic ball B(q, radius).
inline ConcentrationReport concentration_center(const ScalarField& u, const ModelParams& params,
                                                double radius) {
  detail::require(radius > 0.0 && std::isfinite(radius), "concentration radius must be positive");
  const ScalarField gamma = gamma_density(u, params);
  const Barycenter bc = weighted_circular_mean(gamma);
  const TorusSpec& s = u.spec();
  const ScalarField mass =
      detail::circular_convolution(gamma, detail::ball_indicator(s, radius));
  const std::size_t best = detail::argmax(mass);
  const Index3 q = s.unravel(best);

  ConcentrationReport r;
  r.barycenter = bc.point;
  r.resultant_length = bc.resultant_length;
  r.degenerate = bc.degenerate;
  r.center_q = s.position(q[0], q[1], q[2]);
  r.ball_radius = radius;
  r.ball_mass = mass[best] * s.cell_volume();
  r.total_mass = bc.gamma_mass;
  r.raw_fraction = r.ball_mass / r.total_mass;
  r.mass_fraction_in_ball = std::clamp(r.raw_fraction, 0.0, 1.0);
  return r;
}

/// Whole-cell shift that best maps b onto a: barycenter difference when both
/// barycenters are well defined, otherwise the peak of the cross-correlation.
inline Index3 alignment_shift(const ScalarField& a, const ScalarField& b,
                              const ModelParams& params) {
  a.check_same(b);
  const TorusSpec& s = a.spec();
  const Barycenter ba = barycenter(a, params);
  const Barycenter bb = barycenter(b, params);
  Index3 shift{};
  if (!ba.any_degenerate() && !bb.any_degenerate()) {
    const Vec3 d = s.displacement(bb.point, ba.point);
    for (int ax = 0; ax < 3; ++ax) {
      shift[ax] = static_cast<int>(std::lround(d[ax] / s.spacing(ax)));
    }
    return shift;
  }
  const std::size_t best = detail::argmax(detail::circular_correlation(a, b));
  return s.unravel(best);
}

}  // namespace sbpp
