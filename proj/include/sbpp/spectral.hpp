#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "sbpp/torus.hpp"

namespace sbpp {

using Complex = std::complex<double>;
using ComplexBuffer = std::vector<Complex, FftwAllocator<Complex>>;

/// Real-to-half-complex transforms on a torus grid plus the frequency
/// lattice 2*pi*m/L, m in [-N/2, N/2).
///
/// Spectral arrays have shape n0 x n1 x (n2/2 + 1) and hold the unnormalized
/// DFT. Instances are immutable after construction; transforms may be run
/// concurrently from several threads (FFTW new-array execute is reentrant).
class SpectralGrid {
 public:
  explicit SpectralGrid(const TorusSpec& spec) : spec_(spec) {
    const Index3& n = spec.resolution();
    nz_ = n[2] / 2 + 1;
    csize_ = static_cast<std::size_t>(n[0]) * n[1] * nz_;

    for (int a = 0; a < 3; ++a) {
      k_[a].resize(n[a]);
      kd_[a].resize(n[a]);
      const double base = 2.0 * std::numbers::pi / spec.side(a);
      for (int i = 0; i < n[a]; ++i) {
        const int m = i < n[a] / 2 ? i : i - n[a];
        k_[a][i] = base * m;
        kd_[a][i] = (i == n[a] / 2) ? 0.0 : base * m;
      }
    }
    ksq_.resize(csize_);
    weight_.resize(csize_);
    std::size_t idx = 0;
    for (int i = 0; i < n[0]; ++i)
      for (int j = 0; j < n[1]; ++j)
        for (int l = 0; l < nz_; ++l, ++idx) {
          const double kx = k_[0][i], ky = k_[1][j], kz = k_[2][l];
          ksq_[idx] = kx * kx + ky * ky + kz * kz;
          weight_[idx] = (l == 0 || 2 * l == n[2]) ? 1.0 : 2.0;
        }

    RealBuffer r(spec.size());
    ComplexBuffer c(csize_);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    fwd_ = fftw_plan_dft_r2c_3d(n[0], n[1], n[2], r.data(), cp, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_3d(n[0], n[1], n[2], cp, r.data(), FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw SolverError("FFTW planning failed for " + spec.describe());
  }

  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;
  ~SpectralGrid() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  /// Shared, lazily planned grid for a torus spec.
  static std::shared_ptr<const SpectralGrid> get(const TorusSpec& spec) {
    static std::mutex mu;
    static std::map<std::pair<Index3, Vec3>, std::shared_ptr<const SpectralGrid>> cache;
    std::lock_guard lock(mu);
    auto key = std::make_pair(spec.resolution(), spec.side_lengths());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto grid = std::make_shared<const SpectralGrid>(spec);
    cache.emplace(key, grid);
    return grid;
  }

  const TorusSpec& spec() const { return spec_; }
  std::size_t complex_size() const { return csize_; }
  int half_z() const { return nz_; }

  /// |k|^2 at each half-spectrum index (Nyquist included).
  const std::vector<double>& k_squared() const { return ksq_; }
  /// Hermitian multiplicity of each half-spectrum entry (1 or 2).
  const std::vector<double>& weights() const { return weight_; }
  /// Wavenumbers along one axis, Nyquist kept (even derivatives).
  const std::vector<double>& wavenumbers(int axis) const { return k_[axis]; }
  /// Wavenumbers along one axis, Nyquist zeroed (odd derivatives).
  const std::vector<double>& derivative_wavenumbers(int axis) const { return kd_[axis]; }

  ComplexBuffer forward(std::span<const double> values) const {
    ComplexBuffer out(csize_);
    // r2c out-of-place preserves its input.
    fftw_execute_dft_r2c(fwd_, const_cast<double*>(values.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }
  ComplexBuffer forward(const ScalarField& u) const {
    detail::require(u.spec() == spec_, "field grid does not match spectral grid");
    return forward(u.values());
  }

  /// Inverse transform including the 1/N normalization; consumes its input.
  ScalarField inverse(ComplexBuffer coeffs) const {
    ScalarField out(spec_);
    fftw_execute_dft_c2r(bwd_, reinterpret_cast<fftw_complex*>(coeffs.data()), out.data());
    const double scale = 1.0 / static_cast<double>(spec_.size());
    for (double& v : out.values()) v *= scale;
    return out;
  }

  /// Grid quadrature of a*b computed from spectral coefficients (Parseval).
  double inner(const ComplexBuffer& a, const ComplexBuffer& b) const {
    double s = 0.0;
    for (std::size_t n = 0; n < csize_; ++n)
      s += weight_[n] * (a[n].real() * b[n].real() + a[n].imag() * b[n].imag());
    return s * parseval_scale();
  }
  /// Quadrature of multiplier(|k|^2) * a * conj(b).
  template <class Multiplier>
  double inner(const ComplexBuffer& a, const ComplexBuffer& b, Multiplier&& m) const {
    double s = 0.0;
    for (std::size_t n = 0; n < csize_; ++n)
      s += weight_[n] * m(ksq_[n]) *
           (a[n].real() * b[n].real() + a[n].imag() * b[n].imag());
    return s * parseval_scale();
  }

  double parseval_scale() const {
    const double N = static_cast<double>(spec_.size());
    return spec_.volume() / (N * N);
  }

 private:
  TorusSpec spec_;
  int nz_ = 0;
  std::size_t csize_ = 0;
  std::array<std::vector<double>, 3> k_;
  std::array<std::vector<double>, 3> kd_;
  std::vector<double> ksq_;
  std::vector<double> weight_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Applies a radial spectral multiplier m(|k|^2) to a field.
template <class Multiplier>
ScalarField apply_multiplier(const ScalarField& u, Multiplier&& m) {
  auto grid = SpectralGrid::get(u.spec());
  ComplexBuffer c = grid->forward(u);
  const auto& ksq = grid->k_squared();
  for (std::size_t n = 0; n < c.size(); ++n) c[n] *= m(ksq[n]);
  return grid->inverse(std::move(c));
}

}  // namespace sbpp
