#include <gtest/gtest.h>

#include <cmath>

#include "darol/bayes.hpp"
#include "oracles.hpp"

using namespace darol;
using namespace darol::bayes;

namespace {

// 1-D reference model: uniform prior on [-1,1], Phi = (a - m)^2 / 2,
// measurements in [-1,1]. R = 2, M1 = 0, M2(t) = t + 1.
BayesModel quadratic_model() {
  BayesModel model;
  model.prior.kind = forward::PriorKind::uniform_box;
  model.prior.dimension = 1;
  model.prior.box_radius = 1.0;
  model.potential = [](const Vec& a, const Vec& m) {
    const double d = a[0] - m[0];
    return 0.5 * d * d;
  };
  model.m1 = [](double) { return 0.0; };
  model.m2 = [](double t) { return t + 1.0; };
  model.potential_sup = 2.0;
  model.measurement_dim = 1;
  model.measurement_radius = 1.0;
  return model;
}

BayesModel flat_model() {
  BayesModel model = quadratic_model();
  model.potential = [](const Vec&, const Vec&) { return 0.0; };
  model.m2 = [](double) { return 0.0; };
  model.potential_sup = 0.0;
  return model;
}

double phi_quadratic(double a, double m) { return 0.5 * (a - m) * (a - m); }

}  // namespace

TEST(ConditionalMean, FlatPotentialRecoversPriorMean) {
  const BayesModel model = flat_model();
  const CmResult r = conditional_mean(model, {0.3}, 20000, 1, 0.8);
  EXPECT_LE(std::abs(r.a_hat[0]), 3.0 * r.mc_std_error[0]);
  EXPECT_EQ(r.burn_in, 10000u);
  EXPECT_GE(r.acceptance_rate, 0.0);
  EXPECT_LE(r.acceptance_rate, 1.0);
}

TEST(ConditionalMean, SymmetricPotentialAtZero) {
  const BayesModel model = quadratic_model();
  const CmResult r = conditional_mean(model, {0.0}, 20000, 2, 0.8);
  EXPECT_LE(std::abs(r.a_hat[0]), 3.0 * r.mc_std_error[0]);
}

TEST(ConditionalMean, MatchesTrapezoidOracleOffCenter) {
  const BayesModel model = quadratic_model();
  const CmResult r = conditional_mean(model, {0.8}, 40000, 3, 0.8);
  const double oracle = oracles::trapezoid_cm_1d(phi_quadratic, 0.8, 1.0, 1000001);
  EXPECT_NEAR(oracle, 0.22559239159313438, 1e-9);  // frozen reference value
  EXPECT_LE(std::abs(r.a_hat[0] - oracle), 3.0 * r.mc_std_error[0]);
}

TEST(ConditionalMean, EstimateStaysInPriorHull) {
  const BayesModel model = quadratic_model();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CmResult r = conditional_mean(model, {0.9}, 2000, seed, 0.7);
    EXPECT_LE(std::abs(r.a_hat[0]), 1.0);
  }
}

TEST(ConditionalMean, DeterministicChains) {
  const BayesModel model = quadratic_model();
  const CmResult a = conditional_mean(model, {0.4}, 5000, 11, 0.8);
  const CmResult b = conditional_mean(model, {0.4}, 5000, 11, 0.8);
  EXPECT_EQ(a.a_hat, b.a_hat);  // bitwise
  EXPECT_EQ(a.acceptance_rate, b.acceptance_rate);
}

TEST(ConditionalMean, StdErrorShrinksAtRootTwoPerDoubling) {
  const BayesModel model = quadratic_model();
  const CmResult small = conditional_mean(model, {0.5}, 20000, 4, 0.8);
  const CmResult big = conditional_mean(model, {0.5}, 40000, 4, 0.8);
  const double factor = small.mc_std_error[0] / big.mc_std_error[0];
  EXPECT_GE(factor, 1.25);
  EXPECT_LE(factor, 1.6);
}

TEST(ConditionalMean, AcceptanceWarningAndErrors) {
  const BayesModel model = quadratic_model();
  // tiny proposal: acceptance near 1 -> warning
  const CmResult r = conditional_mean(model, {0.0}, 2000, 5, 1e-4);
  EXPECT_GT(r.acceptance_rate, 0.7);
  EXPECT_TRUE(r.acceptance_warning);
  // gigantic proposal: every move leaves the box -> hard error
  EXPECT_THROW(conditional_mean(model, {0.0}, 2000, 5, 1e9), NumericalError);
  EXPECT_THROW(conditional_mean(model, {0.0}, 10, 5, 0.5), std::invalid_argument);
  EXPECT_THROW(conditional_mean(model, {0.0}, 2000, 5, 0.0), std::invalid_argument);
}

TEST(TuneProposal, LandsInReasonableAcceptanceBand) {
  const BayesModel model = quadratic_model();
  const double tuned = tune_proposal_std(model, {0.2}, 9);
  const CmResult r = conditional_mean(model, {0.2}, 20000, 10, tuned);
  EXPECT_GE(r.acceptance_rate, 0.15);
  EXPECT_LE(r.acceptance_rate, 0.6);
}

TEST(QuadratureCm, FlatPotentialGivesPriorMean) {
  const BayesModel model = flat_model();
  const Vec cm = quadrature_cm(model, {0.5}, 2001);
  EXPECT_NEAR(cm[0], 0.0, 1e-12);
}

TEST(QuadratureCm, OddSymmetry) {
  const BayesModel model = quadratic_model();
  const Vec plus = quadrature_cm(model, {0.6}, 4001);
  const Vec minus = quadrature_cm(model, {-0.6}, 4001);
  EXPECT_NEAR(plus[0], -minus[0], 1e-12);
}

TEST(QuadratureCm, SelfConvergenceUnderRefinement) {
  const BayesModel model = quadratic_model();
  const Vec coarse = quadrature_cm(model, {0.8}, 1000);
  const Vec fine = quadrature_cm(model, {0.8}, 10000);
  EXPECT_LT(std::abs(coarse[0] - fine[0]), 1e-6);
}

TEST(QuadratureCm, RejectsHighDimension) {
  BayesModel model = quadratic_model();
  model.prior.dimension = 4;
  model.potential = [](const Vec& a, const Vec& m) {
    double s = 0.0;
    for (double v : a) s += (v - m[0]) * (v - m[0]);
    return 0.5 * s;
  };
  EXPECT_THROW(quadrature_cm(model, {0.0}, 100), std::invalid_argument);
}

TEST(LipschitzBound, FlatModelGivesZero) {
  const BayesModel model = flat_model();
  const BayesLipschitzBound bound = lipschitz_bound_bayes(model, 5001);
  EXPECT_NEAR(bound.proof_bound, 0.0, 1e-12);  // C2 = 0
  // empirical slope of a constant map is zero
  std::vector<Vec> grid;
  for (int i = 0; i < 20; ++i) grid.push_back({-1.0 + 0.1 * i});
  const double emp = empirical_lipschitz_map(
      [&](const Vec& m) { return quadrature_cm(model, m, 401); }, grid, 1000, 0);
  EXPECT_NEAR(emp, 0.0, 1e-12);
}

TEST(LipschitzBound, ReferenceModelConstants) {
  const BayesModel model = quadratic_model();
  const BayesLipschitzBound bound = lipschitz_bound_bayes(model, 100001);
  EXPECT_NEAR(bound.c1, 1.0, 1e-10);
  EXPECT_NEAR(bound.c2, 1.5, 1e-8);  // E|a| + 1 over U[-1,1]
  EXPECT_NEAR(bound.r, 2.0, 0.0);
  EXPECT_NEAR(bound.proof_bound, 163.7944500994327, 1e-6);
  EXPECT_NEAR(bound.stated_variant, 0.054946916666202536, 1e-9);
}

TEST(LipschitzBound, EmpiricalCmSlopeBelowProofBound) {
  const BayesModel model = quadratic_model();
  const BayesLipschitzBound bound = lipschitz_bound_bayes(model, 20001);
  std::vector<Vec> grid;
  for (int i = 0; i < 50; ++i) grid.push_back({-1.0 + 2.0 * i / 49.0});
  const double emp = empirical_lipschitz_map(
      [&](const Vec& m) { return quadrature_cm(model, m, 2001); }, grid,
      50 * 50, 0);
  EXPECT_LE(emp, bound.proof_bound);
  EXPECT_GT(emp, bound.stated_variant);  // the e^{-2R} variant is not a bound
}

TEST(LipschitzBound, RejectsModelsWithViolatedBounds) {
  BayesModel model = quadratic_model();
  model.m2 = [](double) { return 1e-3; };  // far too small
  EXPECT_THROW(lipschitz_bound_bayes(model, 1001), InvariantError);
  BayesModel model2 = quadratic_model();
  model2.potential_sup = 0.1;  // R too small
  EXPECT_THROW(lipschitz_bound_bayes(model2, 1001), InvariantError);
}

TEST(EmpiricalLipschitzMap, LinearAndConstantMaps) {
  std::vector<Vec> inputs;
  for (int i = 0; i < 10; ++i) inputs.push_back({0.1 * i, -0.2 * i});
  const double lin = empirical_lipschitz_map(
      [](const Vec& m) { return scale(m, 2.0); }, inputs, 1000, 0);
  EXPECT_NEAR(lin, 2.0, 1e-12);
  const double con = empirical_lipschitz_map(
      [](const Vec&) { return Vec{1.0, 1.0}; }, inputs, 1000, 0);
  EXPECT_NEAR(con, 0.0, 1e-12);
}

TEST(EmpiricalLipschitzMap, MatchesFiniteDifferencesOnCmMap) {
  const BayesModel model = quadratic_model();
  auto cm = [&](double m) { return quadrature_cm(model, {m}, 4001)[0]; };
  std::vector<Vec> grid;
  const int n = 41;
  for (int i = 0; i < n; ++i) grid.push_back({-0.9 + 1.8 * i / (n - 1.0)});
  const double emp = empirical_lipschitz_map(
      [&](const Vec& m) { return quadrature_cm(model, m, 4001); }, grid, n * n, 0);
  double fd_max = 0.0;
  const double h = 1e-5;
  for (const Vec& g : grid)
    fd_max = std::max(fd_max, std::abs(cm(g[0] + h) - cm(g[0] - h)) / (2.0 * h));
  EXPECT_NEAR(emp, fd_max, 0.05 * fd_max);
}

TEST(EmpiricalLipschitzMap, DegenerateInputsError) {
  EXPECT_THROW(
      empirical_lipschitz_map([](const Vec& m) { return m; }, {{1.0}}, 10, 0),
      std::invalid_argument);
  std::vector<Vec> same{{1.0}, {1.0}};
  EXPECT_THROW(
      empirical_lipschitz_map([](const Vec& m) { return m; }, same, 10, 0),
      NumericalError);
}

TEST(ValidateBounds, ReportsNonPositiveViolationsForGoodModel) {
  const BoundValidation v = validate_bounds(quadratic_model(), 4000, 1);
  EXPECT_TRUE(v.ok);
  EXPECT_LE(v.max_m1_violation, 0.0);
  EXPECT_LE(v.max_m2_violation, 1e-12);
  EXPECT_LE(v.max_r_violation, 0.0);
}
