#pragma once

// Field dump format:
//   "SBPPFLD1" | u32 n0 n1 n2 | f64 L0 L1 L2 | f64 values[n0*n1*n2] (row-major)
// All integers and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "sbpp/torus.hpp"

namespace sbpp {

inline constexpr char kFieldMagic[8] = {'S', 'B', 'P', 'P', 'F', 'L', 'D', '1'};

namespace detail {

template <class U>
void put_le(std::ostream& os, U bits) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu);
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!is) throw InputError("field dump truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return bits;
}

}  // namespace detail

inline void write_field(std::ostream& os, const ScalarField& u) {
  const TorusSpec& s = u.spec();
  os.write(kFieldMagic, sizeof(kFieldMagic));
  for (int a = 0; a < 3; ++a)
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.points(a)));
  for (int a = 0; a < 3; ++a)
    detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(s.side(a)));
  for (double v : u.values()) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw SolverError("failed writing field dump");
}

inline ScalarField read_field(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0)
    throw InputError("not a field dump (bad magic)");
  Index3 n{};
  Vec3 L{};
  for (int a = 0; a < 3; ++a) {
    const auto v = detail::get_le<std::uint32_t>(is);
    if (v > (1u << 16)) throw InputError("field dump resolution out of range");
    n[a] = static_cast<int>(v);
  }
  for (int a = 0; a < 3; ++a) L[a] = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  const TorusSpec spec(L, n);
  ScalarField u(spec);
  for (double& v : u.values()) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  return u;
}

inline void write_field(const std::filesystem::path& path, const ScalarField& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw SolverError("cannot open for writing: " + path.string());
  write_field(os, u);
}

inline ScalarField read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open field dump: " + path.string());
  return read_field(is);
}

}  // namespace sbpp
