#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <new>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sbpp/error.hpp"

namespace sbpp {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

/// Allocator returning FFTW-aligned storage so field buffers can be handed
/// to the planned transforms directly.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n == 0) return nullptr;
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

using RealBuffer = std::vector<double, FftwAllocator<double>>;

/// Flat rectangular 3-torus together with its sampling grid.
///
/// Grid point (i, j, k) sits at (i*h0, j*h1, k*h2); values are stored
/// row-major with the first axis slowest.
class TorusSpec {
 public:
  TorusSpec(Vec3 side_lengths, Index3 resolution)
      : sides_(side_lengths), res_(resolution) {
    for (int a = 0; a < 3; ++a) {
      detail::require(std::isfinite(sides_[a]) && sides_[a] > 0.0,
                      "torus side length must be positive and finite");
      detail::require(res_[a] >= 8 && res_[a] % 2 == 0,
                      "torus resolution must be even and >= 8 on every axis");
    }
  }

  static TorusSpec cube(double side, int n) {
    return TorusSpec({side, side, side}, {n, n, n});
  }

  const Vec3& side_lengths() const { return sides_; }
  const Index3& resolution() const { return res_; }
  double side(int axis) const { return sides_[axis]; }
  int points(int axis) const { return res_[axis]; }
  double spacing(int axis) const { return sides_[axis] / res_[axis]; }
  double max_spacing() const {
    return std::max({spacing(0), spacing(1), spacing(2)});
  }
  double min_side() const { return std::min({sides_[0], sides_[1], sides_[2]}); }

  std::size_t size() const {
    return static_cast<std::size_t>(res_[0]) * res_[1] * res_[2];
  }
  double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }
  double volume() const { return sides_[0] * sides_[1] * sides_[2]; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * res_[1] + j) * res_[2] + k;
  }
  Index3 unravel(std::size_t n) const {
    const int k = static_cast<int>(n % res_[2]);
    n /= res_[2];
    const int j = static_cast<int>(n % res_[1]);
    const int i = static_cast<int>(n / res_[1]);
    return {i, j, k};
  }
  Vec3 position(int i, int j, int k) const {
    return {i * spacing(0), j * spacing(1), k * spacing(2)};
  }

  /// Minimal-image displacement b - a on the torus, each component in
  /// [-L/2, L/2).
  Vec3 displacement(const Vec3& a, const Vec3& b) const {
    Vec3 d{};
    for (int ax = 0; ax < 3; ++ax) {
      const double L = sides_[ax];
      double x = std::fmod(b[ax] - a[ax], L);
      if (x < -0.5 * L) x += L;
      if (x >= 0.5 * L) x -= L;
      d[ax] = x;
    }
    return d;
  }
  double distance(const Vec3& a, const Vec3& b) const {
    const Vec3 d = displacement(a, b);
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  }
  Vec3 wrap(const Vec3& x) const {
    Vec3 w{};
    for (int ax = 0; ax < 3; ++ax) {
      w[ax] = std::fmod(x[ax], sides_[ax]);
      if (w[ax] < 0.0) w[ax] += sides_[ax];
      if (w[ax] >= sides_[ax]) w[ax] -= sides_[ax];
    }
    return w;
  }

  bool operator==(const TorusSpec&) const = default;

  std::string describe() const {
    std::ostringstream os;
    os << res_[0] << "x" << res_[1] << "x" << res_[2] << " on [" << sides_[0]
       << ", " << sides_[1] << ", " << sides_[2] << "]";
    return os.str();
  }

 private:
  Vec3 sides_;
  Index3 res_;
};

/// Real scalar field sampled on a torus grid. Value type; copies deep.
class ScalarField {
 public:
  explicit ScalarField(const TorusSpec& spec)
      : spec_(spec), values_(spec.size(), 0.0) {}
  ScalarField(const TorusSpec& spec, RealBuffer values)
      : spec_(spec), values_(std::move(values)) {
    detail::require(values_.size() == spec_.size(),
                    "field value count does not match torus resolution");
  }

  static ScalarField constant(const TorusSpec& spec, double c) {
    ScalarField f(spec);
    std::fill(f.values_.begin(), f.values_.end(), c);
    return f;
  }

  /// Samples f(x, y, z) at every grid point.
  static ScalarField sample(const TorusSpec& spec,
                            const std::function<double(const Vec3&)>& f) {
    ScalarField out(spec);
    const Index3& n = spec.resolution();
    std::size_t idx = 0;
    for (int i = 0; i < n[0]; ++i)
      for (int j = 0; j < n[1]; ++j)
        for (int k = 0; k < n[2]; ++k) out.values_[idx++] = f(spec.position(i, j, k));
    return out;
  }

  const TorusSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t n) { return values_[n]; }
  double operator[](std::size_t n) const { return values_[n]; }
  double& at(int i, int j, int k) { return values_[spec_.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values_[spec_.index(i, j, k)]; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  ScalarField& operator+=(const ScalarField& o) {
    check_same(o);
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check_same(o);
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  /// this += s * o
  ScalarField& axpy(double s, const ScalarField& o) {
    check_same(o);
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += s * o.values_[n];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

  bool operator==(const ScalarField& o) const {
    return spec_ == o.spec_ && values_ == o.values_;
  }

  void check_same(const ScalarField& o) const {
    detail::require(spec_ == o.spec_, "fields live on different torus grids");
  }

 private:
  TorusSpec spec_;
  RealBuffer values_;
};

/// Circular shift by whole cells: out(x + shift*h) = u(x).
inline ScalarField circular_shift(const ScalarField& u, const Index3& shift) {
  const TorusSpec& s = u.spec();
  const Index3& n = s.resolution();
  Index3 sh{};
  for (int a = 0; a < 3; ++a) sh[a] = ((shift[a] % n[a]) + n[a]) % n[a];
  ScalarField out(s);
  for (int i = 0; i < n[0]; ++i) {
    const int ii = (i + sh[0]) % n[0];
    for (int j = 0; j < n[1]; ++j) {
      const int jj = (j + sh[1]) % n[1];
      const double* src = u.data() + s.index(i, j, 0);
      double* dst = out.data() + s.index(ii, jj, 0);
      for (int k = 0; k < n[2]; ++k) dst[(k + sh[2]) % n[2]] = src[k];
    }
  }
  return out;
}

inline void require_finite(const ScalarField& u, const char* what) {
  if (!u.all_finite())
    throw InputError(std::string(what) + ": field contains non-finite values");
}

}  // namespace sbpp
