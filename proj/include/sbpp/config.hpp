#pragma once

// Flat key=value experiment configuration. Lines starting with '#' are
// comments. Recognized keys and defaults:
//
//   mode                  ground | photography | cone | constant | sweep | audit
//   torus.L               side of a cube, or torus.L1 torus.L2 torus.L3
//   torus.N               points per axis, or torus.N1 torus.N2 torus.N3
//   model.eps             required
//   model.p               required, open interval (4,6)
//   model.q               1
//   model.r               0.25 (bump cutoff radius)
//   solver.tol            1e-8
//   solver.max_iter       500
//   solver.armijo         1e-4
//   solver.backtrack      0.5
//   solver.distinct_tol   0.1
//   solver.memory         5 (0: preconditioned gradient with Barzilai-Borwein steps)
//   profile.box           12
//   profile.N             72
//   profile.tol           1e-8
//   profile.cache         (none) stem of a saved profile to reuse or create
//   inits                 one_bump,two_bump,constant,random
//   init.center           torus center
//   seed                  1
//   photography.centers   8
//   cone.thetas           0,0.25,0.5,0.75,1
//   cone.centers          4
//   cone.sigma            2
//   cone.refine_iter      0
//   sweep.eps             0.2,0.1,0.05
//   sweep.N               48,64,96
//   output.dir            out (SBPP_OUT, when set, is the default root)
//   parallel              1

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sbpp/error.hpp"
#include "sbpp/fields.hpp"
#include "sbpp/torus.hpp"

namespace sbpp {

enum class Mode { kGround, kPhotography, kCone, kConstant, kSweep, kAudit };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::kGround: return "ground";
    case Mode::kPhotography: return "photography";
    case Mode::kCone: return "cone";
    case Mode::kConstant: return "constant";
    case Mode::kSweep: return "sweep";
    case Mode::kAudit: return "audit";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kGround, Mode::kPhotography, Mode::kCone, Mode::kConstant, Mode::kSweep,
                 Mode::kAudit})
    if (s == to_string(m)) return m;
  throw InputError("mode: unknown value '" + s +
                   "' (expected ground, photography, cone, constant, sweep or audit)");
}

enum class InitKind { kOneBump, kTwoBump, kConstant, kRandom };

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::kOneBump: return "one_bump";
    case InitKind::kTwoBump: return "two_bump";
    case InitKind::kConstant: return "constant";
    case InitKind::kRandom: return "random";
  }
  return "?";
}

struct ExperimentConfig {
  Mode mode = Mode::kGround;
  Vec3 sides{1.0, 1.0, 1.0};
  Index3 resolution{32, 32, 32};
  ModelParams model;
  double tol = 1e-8;
  int max_iter = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double distinct_tol = 0.1;
  int memory = 5;
  double profile_box = 12.0;
  int profile_n = 72;
  double profile_tol = 1e-8;
  std::string profile_cache;
  std::vector<InitKind> inits{InitKind::kOneBump, InitKind::kTwoBump, InitKind::kConstant,
                              InitKind::kRandom};
  std::optional<Vec3> init_center;
  std::uint64_t seed = 1;
  int photography_centers = 8;
  std::vector<double> cone_thetas{0.0, 0.25, 0.5, 0.75, 1.0};
  int cone_centers = 4;
  double cone_sigma = 2.0;
  int cone_refine_iter = 0;
  std::vector<double> sweep_eps{0.2, 0.1, 0.05};
  std::vector<int> sweep_n{48, 64, 96};
  std::string output_dir = "out";
  int parallel = 1;

  TorusSpec torus() const { return TorusSpec(sides, resolution); }
  Vec3 center() const {
    return init_center.value_or(Vec3{0.5 * sides[0], 0.5 * sides[1], 0.5 * sides[2]});
  }

  /// Open interval (4,6). A config built in code for mode constant may also
  /// use the closed-form endpoint 6; text configs never can.
  bool p_allowed() const {
    return model.p > 4.0 && (model.p < 6.0 || (mode == Mode::kConstant && model.p == 6.0));
  }

  /// Range checks shared by parsing and command-line overrides.
  void validate() const {
    const TorusSpec s = torus();
    if (!p_allowed()) throw InputError("model.p: must lie in the open interval (4,6)");
    try {
      model.validate(s);
    } catch (const InputError& e) {
      throw InputError(std::string("model: ") + e.what());
    }
    detail::require(tol > 0.0, "solver.tol: must be positive");
    detail::require(max_iter >= 0, "solver.max_iter: must be nonnegative");
    detail::require(armijo > 0.0 && armijo < 1.0, "solver.armijo: must lie in (0,1)");
    detail::require(backtrack > 0.0 && backtrack < 1.0, "solver.backtrack: must lie in (0,1)");
    detail::require(distinct_tol > 0.0, "solver.distinct_tol: must be positive");
    detail::require(memory >= 0 && memory <= 50, "solver.memory: must lie in [0,50]");
    detail::require(profile_box > 0.0, "profile.box: must be positive");
    detail::require(profile_n >= 8 && profile_n % 2 == 0, "profile.N: must be even and >= 8");
    detail::require(profile_tol > 0.0, "profile.tol: must be positive");
    detail::require(photography_centers >= 1, "photography.centers: must be >= 1");
    detail::require(!cone_thetas.empty(), "cone.thetas: must be nonempty");
    for (double t : cone_thetas)
      detail::require(t >= 0.0 && t <= 1.0, "cone.thetas: values must lie in [0,1]");
    detail::require(cone_centers >= 1, "cone.centers: must be >= 1");
    detail::require(cone_sigma > 0.0, "cone.sigma: must be positive");
    detail::require(cone_refine_iter >= 0, "cone.refine_iter: must be nonnegative");
    detail::require(!sweep_eps.empty() && sweep_eps.size() == sweep_n.size(),
                    "sweep.eps and sweep.N: must be nonempty lists of equal length");
    for (double e : sweep_eps) detail::require(e > 0.0, "sweep.eps: values must be positive");
    for (int n : sweep_n)
      detail::require(n >= 8 && n % 2 == 0, "sweep.N: values must be even and >= 8");
    detail::require(!output_dir.empty(), "output.dir: must be nonempty");
    detail::require(parallel >= 1, "parallel: must be >= 1");
    if (mode == Mode::kGround) detail::require(!inits.empty(), "inits: must be nonempty");
  }

  /// Canonical key=value echo (every key, resolved values).
  std::string echo() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out))
    throw InputError(key + ": not a finite number: '" + v + "'");
  return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw InputError(key + ": not an integer: '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

}  // namespace detail

inline std::string ExperimentConfig::echo() const {
  using detail::fmt;
  std::ostringstream os;
  os << "mode=" << to_string(mode) << "\n";
  for (int a = 0; a < 3; ++a) os << "torus.L" << a + 1 << "=" << fmt(sides[a]) << "\n";
  for (int a = 0; a < 3; ++a) os << "torus.N" << a + 1 << "=" << resolution[a] << "\n";
  os << "model.eps=" << fmt(model.eps) << "\nmodel.p=" << fmt(model.p)
     << "\nmodel.q=" << fmt(model.q) << "\nmodel.r=" << fmt(model.cutoff_r)
     << "\nsolver.tol=" << fmt(tol) << "\nsolver.max_iter=" << max_iter
     << "\nsolver.armijo=" << fmt(armijo) << "\nsolver.backtrack=" << fmt(backtrack)
     << "\nsolver.distinct_tol=" << fmt(distinct_tol) << "\nsolver.memory=" << memory
     << "\nprofile.box=" << fmt(profile_box)
     << "\nprofile.N=" << profile_n << "\nprofile.tol=" << fmt(profile_tol)
     << "\nprofile.cache=" << profile_cache << "\ninits=";
  for (std::size_t i = 0; i < inits.size(); ++i) os << (i ? "," : "") << to_string(inits[i]);
  const Vec3 c = center();
  os << "\ninit.center=" << fmt(c[0]) << "," << fmt(c[1]) << "," << fmt(c[2])
     << "\nseed=" << seed << "\nphotography.centers=" << photography_centers
     << "\ncone.thetas=" << detail::join(cone_thetas) << "\ncone.centers=" << cone_centers
     << "\ncone.sigma=" << fmt(cone_sigma) << "\ncone.refine_iter=" << cone_refine_iter
     << "\nsweep.eps=" << detail::join(sweep_eps) << "\nsweep.N=" << detail::join(sweep_n)
     << "\noutput.dir=" << output_dir << "\nparallel=" << parallel << "\n";
  return os.str();
}

/// Parses and validates a configuration text. Errors name the offending key.
inline ExperimentConfig validate_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> order;
  std::istringstream is(text);
  int lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw InputError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw InputError("duplicate key: " + key);
    kv[key] = val;
    order.push_back(key);
  }

  static const std::vector<std::string> known = {
      "mode", "torus.L", "torus.L1", "torus.L2", "torus.L3", "torus.N", "torus.N1", "torus.N2",
      "torus.N3", "model.eps", "model.p", "model.q", "model.r", "solver.tol", "solver.max_iter",
      "solver.armijo", "solver.backtrack", "solver.distinct_tol", "solver.memory", "profile.box",
      "profile.N", "profile.tol", "profile.cache", "inits", "init.center", "seed",
      "photography.centers", "cone.thetas", "cone.centers", "cone.sigma", "cone.refine_iter",
      "sweep.eps", "sweep.N", "output.dir", "parallel"};
  std::vector<std::string> unknown;
  for (const auto& k : order)
    if (std::find(known.begin(), known.end(), k) == known.end()) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string msg = "unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw InputError(msg);
  }
  for (const char* req : {"mode", "model.eps", "model.p"})
    if (!kv.count(req)) throw InputError(std::string("missing required key: ") + req);
  const bool cube_l = kv.count("torus.L") > 0;
  const bool axis_l = kv.count("torus.L1") || kv.count("torus.L2") || kv.count("torus.L3");
  if (cube_l == axis_l)
    throw InputError("torus.L: give either torus.L or all of torus.L1, torus.L2, torus.L3");
  const bool cube_n = kv.count("torus.N") > 0;
  const bool axis_n = kv.count("torus.N1") || kv.count("torus.N2") || kv.count("torus.N3");
  if (cube_n == axis_n)
    throw InputError("torus.N: give either torus.N or all of torus.N1, torus.N2, torus.N3");

  ExperimentConfig c;
  auto num = [&](const std::string& k) { return detail::parse_double(k, kv.at(k)); };
  auto integer = [&](const std::string& k) { return detail::parse_int(k, kv.at(k)); };
  auto has = [&](const std::string& k) { return kv.count(k) > 0; };

  c.mode = parse_mode(kv.at("mode"));
  for (int a = 0; a < 3; ++a) {
    const std::string lk = cube_l ? "torus.L" : "torus.L" + std::to_string(a + 1);
    const std::string nk = cube_n ? "torus.N" : "torus.N" + std::to_string(a + 1);
    if (!has(lk)) throw InputError("missing required key: " + lk);
    if (!has(nk)) throw InputError("missing required key: " + nk);
    c.sides[a] = num(lk);
    const long long n = integer(nk);
    if (n < 8 || n % 2 != 0 || n > 4096) throw InputError(nk + ": must be even, >= 8 and <= 4096");
    c.resolution[a] = static_cast<int>(n);
    if (!(c.sides[a] > 0.0)) throw InputError(lk + ": must be positive");
  }
  c.model.eps = num("model.eps");
  c.model.p = num("model.p");
  if (!(c.model.p > 4.0 && c.model.p < 6.0))
    throw InputError("model.p: must lie in the open interval (4,6), got " + kv.at("model.p"));
  if (!(c.model.eps > 0.0)) throw InputError("model.eps: must be positive");
  if (has("model.q")) c.model.q = num("model.q");
  if (has("model.r")) c.model.cutoff_r = num("model.r");
  if (has("solver.tol")) c.tol = num("solver.tol");
  if (has("solver.max_iter")) c.max_iter = static_cast<int>(integer("solver.max_iter"));
  if (has("solver.armijo")) c.armijo = num("solver.armijo");
  if (has("solver.backtrack")) c.backtrack = num("solver.backtrack");
  if (has("solver.distinct_tol")) c.distinct_tol = num("solver.distinct_tol");
  if (has("solver.memory")) c.memory = static_cast<int>(integer("solver.memory"));
  if (has("profile.box")) c.profile_box = num("profile.box");
  if (has("profile.N")) c.profile_n = static_cast<int>(integer("profile.N"));
  if (has("profile.tol")) c.profile_tol = num("profile.tol");
  if (has("profile.cache")) c.profile_cache = kv.at("profile.cache");
  if (has("inits")) {
    c.inits.clear();
    for (const auto& s : detail::split_list(kv.at("inits"))) {
      bool found = false;
      for (InitKind k : {InitKind::kOneBump, InitKind::kTwoBump, InitKind::kConstant,
                         InitKind::kRandom})
        if (s == to_string(k)) {
          c.inits.push_back(k);
          found = true;
        }
      if (!found)
        throw InputError("inits: unknown initializer '" + s +
                         "' (expected one_bump, two_bump, constant or random)");
    }
  }
  if (has("init.center")) {
    const auto parts = detail::split_list(kv.at("init.center"));
    if (parts.size() != 3) throw InputError("init.center: expected three comma-separated numbers");
    Vec3 v{};
    for (int a = 0; a < 3; ++a) v[a] = detail::parse_double("init.center", parts[a]);
    c.init_center = v;
  }
  if (has("seed")) {
    const long long s = integer("seed");
    if (s < 0) throw InputError("seed: must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (has("photography.centers"))
    c.photography_centers = static_cast<int>(integer("photography.centers"));
  if (has("cone.thetas")) {
    c.cone_thetas.clear();
    for (const auto& s : detail::split_list(kv.at("cone.thetas")))
      c.cone_thetas.push_back(detail::parse_double("cone.thetas", s));
  }
  if (has("cone.centers")) c.cone_centers = static_cast<int>(integer("cone.centers"));
  if (has("cone.sigma")) c.cone_sigma = num("cone.sigma");
  if (has("cone.refine_iter")) c.cone_refine_iter = static_cast<int>(integer("cone.refine_iter"));
  if (has("sweep.eps")) {
    c.sweep_eps.clear();
    for (const auto& s : detail::split_list(kv.at("sweep.eps")))
      c.sweep_eps.push_back(detail::parse_double("sweep.eps", s));
  }
  if (has("sweep.N")) {
    c.sweep_n.clear();
    for (const auto& s : detail::split_list(kv.at("sweep.N")))
      c.sweep_n.push_back(static_cast<int>(detail::parse_int("sweep.N", s)));
  }
  if (const char* env = std::getenv("SBPP_OUT"); env && *env) c.output_dir = env;
  if (has("output.dir")) {
    const std::string d = kv.at("output.dir");
    const char* env = std::getenv("SBPP_OUT");
    c.output_dir = (env && *env && !d.empty() && d.front() != '/') ? std::string(env) + "/" + d : d;
  }
  if (has("parallel")) c.parallel = static_cast<int>(integer("parallel"));
  c.validate();
  return c;
}

}  // namespace sbpp
