#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"

using namespace sbpp;
using sbpp::testing::acceptance_params;
using sbpp::testing::max_abs_diff;
using sbpp::testing::rel_diff;
using sbpp::testing::shared_profile;

namespace {

const Vec3 kMid{0.5, 0.5, 0.5};

}  // namespace

TEST(LimitGroundState, ConvergedPositiveNehari) {
  const GroundStateProfile& g = shared_profile();
  EXPECT_GT(g.m_inf_estimate, 0.0);
  EXPECT_GE(g.field.min(), -1e-10);
  EXPECT_LE(std::abs(g.nehari_residual), 1e-8 * g.h1_norm_sq);
  EXPECT_LE(g.grad_residual, 1e-8);
  const ModelParams mp{1.0, g.p, g.q, 0.25 * g.box_side};
  EXPECT_LE(energy_identities(g.field, mp).max_rel_deviation, 1e-8);
}

TEST(LimitGroundState, CenteredAndRadiallyNonincreasing) {
  const GroundStateProfile& g = shared_profile();
  const ScalarField& f = g.field;
  const int n = f.spec().points(0), c = n / 2;
  EXPECT_GE(g.center_value(), f.max() * (1.0 - 1e-6));
  for (int a = 0; a < 3; ++a) {
    for (int dir : {-1, 1}) {
      double prev = f.at(c, c, c);
      for (int s = 1; s < n / 2; ++s) {
        Index3 idx{c, c, c};
        idx[a] = c + dir * s;
        const double v = f.at(idx[0], idx[1], idx[2]);
        EXPECT_LE(v, prev + 1e-6) << "axis " << a << " step " << dir * s;
        prev = v;
      }
    }
  }
  const Barycenter b = weighted_circular_mean(gamma_density(f, {1.0, g.p, g.q, 3.0}));
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(b.point[a], 0.5 * g.box_side, 1e-6);
}

TEST(LimitGroundState, BoxSizeConsistency) {
  const GroundStateProfile& g12 = shared_profile();
  const GroundStateProfile g16 = compute_limit_ground_state(16.0, 96, 4.2, 0.3);
  EXPECT_LE(rel_diff(g12.m_inf_estimate, g16.m_inf_estimate), 0.01);
  EXPECT_LE(rel_diff(g12.hwhm, g16.hwhm), 0.01);
}

TEST(LimitGroundState, DistinctExponentsGiveDistinctEnergies) {
  const GroundStateProfile g5 = compute_limit_ground_state(12.0, 48, 5.0, 0.3);
  const GroundStateProfile g6 = compute_limit_ground_state(12.0, 48, 6.0, 0.3);
  EXPECT_GT(g5.m_inf_estimate, 0.0);
  EXPECT_GT(g6.m_inf_estimate, 0.0);
  EXPECT_GT(rel_diff(g5.m_inf_estimate, g6.m_inf_estimate), 1e-3);
}

TEST(LimitGroundState, SaveLoadRoundtrip) {
  const GroundStateProfile& g = shared_profile();
  const auto stem = std::filesystem::temp_directory_path() / "sbpp_profile_roundtrip";
  save_profile(g, stem);
  const GroundStateProfile h = load_profile(stem);
  EXPECT_TRUE(h.field == g.field);
  EXPECT_EQ(h.m_inf_estimate, g.m_inf_estimate);
  EXPECT_EQ(h.hwhm, g.hwhm);
  EXPECT_EQ(h.p, g.p);
  EXPECT_EQ(h.q, g.q);
  EXPECT_EQ(h.box_side, g.box_side);
  EXPECT_EQ(h.coupling, g.coupling);
  std::filesystem::remove(stem.string() + ".fld");
  std::filesystem::remove(stem.string() + ".meta");
}

TEST(CutoffChi, ShapeAndSmoothness) {
  const double r = 0.4;
  EXPECT_EQ(cutoff_chi(0.0, r), 1.0);
  EXPECT_EQ(cutoff_chi(0.2, r), 1.0);
  EXPECT_EQ(cutoff_chi(0.4, r), 0.0);
  EXPECT_NEAR(cutoff_chi(0.3, r), 0.5, 1e-15);
  const double h = 1e-5;
  for (double x : {0.2, 0.4}) {
    const double d1 = (cutoff_chi(x + h, r) - cutoff_chi(x - h, r)) / (2 * h);
    EXPECT_NEAR(d1, 0.0, 1e-6);
  }
}

TEST(BuildBump, CenterValueAndSupport) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 64);
  const double eps = 0.1, r = 0.3;
  const Vec3 c{0.25, 0.5, 0.625};
  const ScalarField w = build_bump({c, eps, r}, g, s);
  EXPECT_EQ(w.at(16, 32, 40), g.center_value());
  EXPECT_EQ(w.max(), w.at(16, 32, 40));
  for (std::size_t n = 0; n < w.size(); ++n) {
    const Index3 i = s.unravel(n);
    if (s.distance(s.position(i[0], i[1], i[2]), c) >= r) {
      EXPECT_LE(std::abs(w[n]), 1e-14);
    }
  }
}

TEST(BuildBump, WholeCellTranslationIsExact) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 64);
  const BumpSpec b{{0.3, 0.41, 0.77}, 0.1, 0.45};
  const ScalarField w = build_bump(b, g, s);
  const Index3 shift{5, -9, 20};
  BumpSpec moved = b;
  for (int a = 0; a < 3; ++a) moved.center[a] += shift[a] * s.spacing(a);
  EXPECT_TRUE(build_bump(moved, g, s) == circular_shift(w, shift));
}

TEST(BuildBump, RejectsUnresolvedScale) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 32);
  EXPECT_GT(core_cells(g, 0.2, s), kMinCoreCells);
  EXPECT_NO_THROW(build_bump({kMid, 0.2, 0.45}, g, s));
  EXPECT_LT(core_cells(g, 0.05, s), kMinCoreCells);
  EXPECT_THROW(build_bump({kMid, 0.05, 0.45}, g, s), InputError);
  EXPECT_THROW(build_bump({kMid, 0.2, 0.6}, g, s), InputError);
}

TEST(PsiMap, IdentitiesEquivarianceAndLevel) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 64);
  const ModelParams mp = acceptance_params(0.1);
  const NehariState a = psi_map({0.5, 0.5, 0.5}, mp, g, s);
  EXPECT_LE(energy_identities(a.u, mp).max_rel_deviation, 1e-8);
  EXPECT_LT(a.energy.total, 1.1 * g.m_inf_estimate);
  EXPECT_NEAR(a.t_u, 1.0, 0.05);
  const NehariState b = psi_map({0.5 + 7 * s.spacing(0), 0.5 - 3 * s.spacing(1), 0.5}, mp, g, s);
  EXPECT_LE(max_abs_diff(b.u, circular_shift(a.u, {7, -3, 0})), 1e-12 * a.u.max_abs());
}

TEST(PsiMap, ResolutionDoublingChangesEnergyByAtMostOnePercent) {
  const GroundStateProfile& g = shared_profile();
  for (auto [eps, n] : {std::pair{0.2, 48}, {0.1, 64}}) {
    const ModelParams mp = acceptance_params(eps);
    const double coarse = psi_map(kMid, mp, g, TorusSpec::cube(1.0, n)).energy.total;
    const double fine = psi_map(kMid, mp, g, TorusSpec::cube(1.0, 2 * n)).energy.total;
    EXPECT_LE(rel_diff(coarse, fine), 0.01) << "eps " << eps;
  }
}

TEST(ConePoint, EndpointsAndAverage) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 48);
  const ModelParams mp = acceptance_params(0.2);
  const ScalarField v = build_reference_bump({kMid, mp.eps, mp.cutoff_r}, g, s);
  const ScalarField w = build_bump({kMid, mp.eps, mp.cutoff_r}, g, s);
  EXPECT_TRUE(cone_point(1.0, kMid, v, mp, g, s) == v);
  EXPECT_TRUE(cone_point(0.0, kMid, v, mp, g, s) == w);
  const ScalarField half = cone_point(0.5, kMid, v, mp, g, s);
  for (std::size_t n = 0; n < half.size(); ++n) EXPECT_NEAR(half[n], 0.5 * (v[n] + w[n]), 1e-15);
  EXPECT_THROW(cone_point(1.5, kMid, v, mp, g, s), InputError);
  EXPECT_THROW(cone_point(-0.1, kMid, v, mp, g, s), InputError);
  for (double th : {0.0, 0.3, 1.0}) {
    const ScalarField u = cone_point(th, {0.2, 0.7, 0.4}, v, mp, g, s);
    EXPECT_GE(u.min(), -1e-12 * u.max());
    EXPECT_GT(norm_p_eps(positive_part(u), mp.p, mp), 0.0);
  }
}

TEST(HighEnergySearch, ConeMaximumDominatesPsiEnergies) {
  const GroundStateProfile& g = shared_profile();
  const TorusSpec s = TorusSpec::cube(1.0, 48);
  const ModelParams mp = acceptance_params(0.2);
  ConeGrid cone;
  cone.thetas = {0.0, 0.25, 0.5, 0.75, 1.0};
  cone.centers = {{0.5, 0.5, 0.5}, {0.25, 0.5, 0.5}, {0.5, 0.75, 0.25}};
  cone.xi0 = kMid;
  const HighEnergyResult r = high_energy_search(mp, g, s, cone);
  EXPECT_EQ(r.samples.size(), 15u);
  for (const auto& xi : cone.centers) EXPECT_GE(r.c_eps, psi_map(xi, mp, g, s).energy.total);
  EXPECT_EQ(r.outcome, SaddleOutcome::kNotRefined);
  EXPECT_LT(r.c_eps, constant_solution(mp, s.volume()).energy);
  EXPECT_THROW(high_energy_search(mp, g, s, ConeGrid{}), InputError);
}
