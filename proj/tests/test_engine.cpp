#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <numbers>
#include <tuple>

#include "cbf/adapters.hpp"

using namespace cbf;

namespace {

PosteriorSpec gauss2(double a, double b, double va, double vb, double cov, double n) {
  Matrix s(2, 2);
  s << va, cov, cov, vb;
  return gaussian_spec({"a", "b"}, Eigen::Vector2d(a, b), s, n);
}

// Measures of a single-hypothesis system with an optional complement.
MeasureTable run_system(const PosteriorSpec& ps, const std::string& text, std::vector<double> weights = {},
                        std::size_t draws = 100000) {
  auto sys = add_complement(parse(text, space_of(ps)), space_of(ps));
  if (!weights.empty()) set_prior_weights(sys, weights);
  EngineOptions o;
  o.n_draws = draws;
  return confirmatory(ps, sys, o);
}

PosteriorSpec mean_test() {
  // x-bar = 4.392857, t = -1.9318 against 5, n = 28.
  const double n = 28, xbar = 4.392857, se = (xbar - 5.0) / -1.9318;
  return ttest_spec({{n, xbar, se * se * n}}, 5.0);
}

}  // namespace

TEST(Engine, EmptyConstraintsGiveUnitMeasures) {
  const auto ps = gauss2(0.3, -0.2, 1, 1, 0, 50);
  const auto row = measures_for_hypothesis(ps, ConstraintMatrices::empty(2), RandomStream(1), 1000);
  EXPECT_EQ(row.comp_E(), 1.0);
  EXPECT_EQ(row.fit_E(), 1.0);
  EXPECT_EQ(row.comp_O, 1.0);
  EXPECT_EQ(row.fit_O, 1.0);
}

TEST(Engine, StudentEqualityMatchesClosedForm) {
  // Independent oracle: prior Cauchy(5, SS/n), posterior t_{n-1}(x-bar, se^2), both at 5.
  const double n = 28, xbar = 4.392857, se = (xbar - 5.0) / -1.9318;
  const double ss = (n - 1) * se * se * n;
  const double prior_scale = std::sqrt(ss / n);
  const double comp_E = 1.0 / (std::numbers::pi * prior_scale);
  const boost::math::students_t_distribution<double> st(n - 1);
  const double fit_E = boost::math::pdf(st, (5.0 - xbar) / se) / se;
  const double fit_O = boost::math::cdf(boost::math::complement(st, (5.0 - xbar) / se));
  const auto t = run_system(mean_test(), "mu=5; mu>5", {0.5, 0.5, 0});
  EXPECT_NEAR(t.rows[0].comp_E(), comp_E, 1e-12);
  EXPECT_NEAR(t.rows[0].fit_E(), fit_E, 1e-12);
  EXPECT_NEAR(t.rows[1].fit_O, fit_O, 1e-12);
  EXPECT_EQ(t.rows[1].comp_O, 0.5);
  EXPECT_NEAR(t.rows[2].fit_O, 1.0 - fit_O, 1e-12);
}

TEST(Engine, MeanTestSpecificationTable) {
  const auto t = run_system(mean_test(), "mu=5; mu>5", {0.5, 0.5, 0});
  ASSERT_EQ(t.size(), 3u);
  EXPECT_NEAR(t.rows[0].comp_E(), 0.195, 0.0005);
  EXPECT_NEAR(t.rows[0].fit_E(), 0.205, 0.0005);
  EXPECT_NEAR(t.rows[1].fit_O, 0.032, 0.0005);
  EXPECT_NEAR(t.rows[2].fit_O, 0.968, 0.0005);
  EXPECT_NEAR(t.php[0], 0.943, 0.0005);
  EXPECT_NEAR(t.php[1], 0.057, 0.0005);
  EXPECT_EQ(t.php[2], 0.0);
  const Matrix e = evidence_matrix(t.log_bfs());
  EXPECT_NEAR(e(0, 1), 16.473, 16.473 * 0.01);
  EXPECT_NEAR(e(2, 1), 30.276, 30.276 * 0.01);
}

TEST(Engine, MeanTestExploratory) {
  const auto ex = exploratory(mean_test());
  ASSERT_EQ(ex.probs.rows(), 1);
  EXPECT_EQ(ex.columns[0], "Pr(=5)");
  EXPECT_NEAR(ex.probs(0, 0), 0.345, 0.0005);
  EXPECT_NEAR(ex.probs(0, 1), 0.634, 0.0005);
  EXPECT_NEAR(ex.probs(0, 2), 0.021, 0.0005);
}

// Fractional Bayes factor of theta = c from first principles: the likelihood L and the
// boundary-centred fractional prior L^b are integrated numerically.
TEST(Engine, SavageDickeyMatchesQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  for (const auto& [est, sd, n, c] : std::vector<std::tuple<double, double, double, double>>{
           {0.4, 0.2, 40, 0.0}, {-1.3, 0.5, 12, 0.5}, {2.0, 1.5, 200, 1.0}, {0.05, 0.01, 1000, 0.0}}) {
    const double b = 1.0 / n;
    auto logL = [&](double th) { return -0.5 * (est - th) * (est - th) / (sd * sd); };
    auto L = [&](double th) { return std::exp(logL(th)); };
    // b * log L rather than pow(L, b): L underflows in the tails long before L^b does.
    auto Lb = [&](double th) { return std::exp(b * logL(th + est - c)); };
    // Finite limits: adaptive quadrature on an infinite range misses very narrow or wide peaks.
    const double w = 40.0 * sd * std::sqrt(n);
    const double zL = gauss_kronrod<double, 61>::integrate(L, est - 40.0 * sd, est + 40.0 * sd, 15, 1e-13);
    const double zLb = gauss_kronrod<double, 61>::integrate(Lb, c - w, c + w, 15, 1e-13);
    const double bf_oracle = (L(c) / zL) / (Lb(c) / zLb);

    const auto ps = gaussian_spec({"t"}, Vector::Constant(1, est), Matrix::Constant(1, 1, sd * sd), n);
    auto h = parse(fmt::format("t = {}", c), space_of(ps))[0];
    const auto row = measures_for_hypothesis(ps, h, RandomStream(1), 1000);
    EXPECT_NEAR(row.bf_E(), bf_oracle, 1e-6 * std::max(1.0, bf_oracle)) << est << " " << sd;

    // Order part: posterior mass above c by quadrature.
    auto Ln = [&](double th) { return L(th) / zL; };
    const double above = gauss_kronrod<double, 61>::integrate(Ln, c, std::max(c, est + 40.0 * sd), 15, 1e-13);
    auto g = parse(fmt::format("t > {}", c), space_of(ps))[0];
    const auto ro = measures_for_hypothesis(ps, g, RandomStream(1), 1000);
    EXPECT_NEAR(ro.fit_O, above, 1e-6);
    EXPECT_EQ(ro.comp_O, 0.5);
  }
}

TEST(Engine, BoundaryCentredOneSidedPriorIsHalf) {
  const auto ps = gauss2(0.8, -0.4, 0.04, 0.09, 0.01, 60);
  for (const char* text : {"a > 1", "a - b > 0.3", "2*a + b > -1"}) {
    const auto t = run_system(ps, text);
    EXPECT_LT(std::abs(t.rows[0].comp_O - 0.5), 3.0 * t.rows[0].comp_O_se + 1e-12) << text;
  }
}

TEST(Engine, ExhaustiveDisjointOrdersSumToOne) {
  Matrix s(3, 3);
  s << 0.05, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.06;
  const auto ps = gaussian_spec({"a", "b", "c"}, Eigen::Vector3d(0.2, 0.1, 0.25), s, 80);
  const auto t = run_system(ps, "a>b>c; a>c>b; b>a>c; b>c>a; c>a>b; c>b>a");
  double fit = 0, comp = 0, fit_var = 0, comp_var = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    fit += t.rows[i].fit_O;
    comp += t.rows[i].comp_O;
    fit_var += t.rows[i].fit_O_se * t.rows[i].fit_O_se;
    comp_var += t.rows[i].comp_O_se * t.rows[i].comp_O_se;
  }
  EXPECT_LT(std::abs(fit - 1.0), 3.0 * std::sqrt(fit_var) + 1e-9);
  EXPECT_LT(std::abs(comp - 1.0), 3.0 * std::sqrt(comp_var) + 1e-9);
  // The six cones cover the space, so the complement has no prior mass and is dropped.
  EXPECT_EQ(t.size(), 6u);
  double w = 0;
  for (double x : t.prior_weights) w += x;
  EXPECT_NEAR(w, 1.0, 1e-12);
}

TEST(Engine, ComplementaryHalfSpacesSumToOne) {
  const auto ps = gauss2(0.1, 0.05, 0.02, 0.03, 0.004, 50);
  const auto t = run_system(ps, "a > b; b > a");
  EXPECT_LT(std::abs(t.rows[0].fit_O + t.rows[1].fit_O - 1.0), 3.0 * std::hypot(t.rows[0].fit_O_se, t.rows[1].fit_O_se) + 1e-12);
  EXPECT_EQ(t.size(), 2u);
}

TEST(Engine, ComplementOfDisjointConesWithKnownPriorMass) {
  // Prior probabilities 0.5 and 0.25 for the two cones, so the complement gets 0.25.
  const auto ps = gauss2(0.3, 0.4, 0.01, 0.01, 0.0, 30);
  const auto t = run_system(ps, "a > 0; a < 0 & b > 0");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.texts[2], "complement");
  EXPECT_LT(std::abs(t.rows[2].comp_O - 0.25), 3.0 * t.rows[2].comp_O_se + 1e-12);
  // Posterior union probability in closed form (independent coordinates).
  const boost::math::normal_distribution<double> na(0.3, 0.1), nb(0.4, 0.1);
  const double p_union = boost::math::cdf(boost::math::complement(na, 0.0)) +
                         boost::math::cdf(na, 0.0) * boost::math::cdf(boost::math::complement(nb, 0.0));
  EXPECT_LT(std::abs(t.rows[2].fit_O - (1.0 - p_union)), 3.0 * t.rows[2].fit_O_se + 1e-9);
}

TEST(Engine, OverlappingConesUseMembershipMonteCarlo) {
  const auto ps = gauss2(0.3, 0.2, 0.04, 0.04, 0.0, 30);
  const auto t = run_system(ps, "a > 0; b > 0");
  // Prior: P(a > 0 or b > 0) = 3/4 under an independent centred prior.
  ASSERT_EQ(t.size(), 3u);
  EXPECT_LT(std::abs(t.rows[2].comp_O - 0.25), 3.0 * t.rows[2].comp_O_se + 1e-12);
  const boost::math::normal_distribution<double> na(0.3, 0.2), nb(0.2, 0.2);
  const double both_neg = boost::math::cdf(na, 0.0) * boost::math::cdf(nb, 0.0);
  EXPECT_LT(std::abs(t.rows[2].fit_O - both_neg), 3.0 * t.rows[2].fit_O_se + 1e-9);
}

TEST(Engine, PhpNormalisedAndEvidenceReciprocal) {
  const auto ps = gauss2(0.2, -0.1, 0.02, 0.02, 0.005, 100);
  const auto t = run_system(ps, "a = b; a > b; a > 0 & b < 0");
  double total = 0;
  for (double p : t.php) total += p;
  EXPECT_NEAR(total, 1.0, 1e-10);
  const Matrix e = evidence_matrix(t.log_bfs());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    EXPECT_EQ(e(i, i), 1.0);
    for (Eigen::Index j = 0; j < e.cols(); ++j) EXPECT_NEAR(e(i, j) * e(j, i), 1.0, 1e-10);
  }
}

TEST(Engine, ScalingWeightsLeavesPhpUnchanged) {
  const std::vector<double> lbf{0.3, -1.2, 2.0};
  const auto a = posterior_probs(lbf, {1, 2, 3});
  const auto b = posterior_probs(lbf, {10, 20, 30});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
  EXPECT_EQ(posterior_probs({0.0}, {1.0})[0], 1.0);
  EXPECT_THROW(posterior_probs(lbf, {0, 0, 0}), DataError);
}

TEST(Engine, LogDomainSurvivesExtremeBayesFactors) {
  const auto p = posterior_probs({800.0, 0.0, -800.0}, {1, 1, 1});
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_GE(p[2], 0.0);
  const Matrix e = evidence_matrix({800.0, 790.0});
  EXPECT_NEAR(e(0, 1), std::exp(10.0), 1e-6);
}

TEST(Engine, SymmetricPosteriorGivesEqualSides) {
  const auto ps = gaussian_spec({"x"}, Vector::Zero(1), Matrix::Constant(1, 1, 0.04), 50);
  const auto ex = exploratory(ps);
  EXPECT_NEAR(ex.probs(0, 1), ex.probs(0, 2), 1e-12);
}

TEST(Engine, Deterministic) {
  const auto ps = gaussian_spec({"a", "b", "c"}, Eigen::Vector3d(0.1, 0.2, 0.3), Matrix::Identity(3, 3) * 0.01, 40);
  const auto t1 = run_system(ps, "a < b < c & a > 0");
  const auto t2 = run_system(ps, "a < b < c & a > 0");
  for (std::size_t i = 0; i < t1.size(); ++i) {
    EXPECT_EQ(t1.rows[i].fit_O, t2.rows[i].fit_O);
    EXPECT_EQ(t1.rows[i].comp_O, t2.rows[i].comp_O);
  }
}

TEST(Engine, EscalatesDrawsWhenStandardErrorTooLarge) {
  const auto ps = gaussian_spec({"a", "b", "c"}, Eigen::Vector3d(0.1, 0.2, 0.3), Matrix::Identity(3, 3) * 0.01, 40);
  const auto t = run_system(ps, "a < b < c & a > 0", {}, 2000);
  EXPECT_LE(t.rows[0].comp_O_se, 0.002 * 1.5);
}

TEST(Aggregation, IdenticalTablesAreIdempotent) {
  const auto t = run_system(mean_test(), "mu=5; mu>5", {0.5, 0.5, 0});
  const auto agg = aggregate_imputations(std::vector<MeasureTable>{t, t, t});
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(agg.rows[i].log_fit_E, t.rows[i].log_fit_E, 1e-12);
    EXPECT_NEAR(agg.rows[i].fit_O, t.rows[i].fit_O, 1e-15);
    EXPECT_NEAR(agg.php[i], t.php[i], 1e-12);
  }
}

TEST(Aggregation, ArithmeticMeanOfMeasures) {
  MeasureTable a;
  a.labels = {"H1", "H2"};
  a.texts = {"x>0", "complement"};
  a.prior_weights = {0.5, 0.5};
  a.rows = {MeasureRow{}, MeasureRow{}};
  a.rows[0].fit_O = 0.2;
  a.rows[0].comp_O = 0.5;
  a.rows[0].log_fit_E = std::log(2.0);
  MeasureTable b = a;
  b.rows[0].fit_O = 0.4;
  b.rows[0].log_fit_E = std::log(4.0);
  finalize(a);
  finalize(b);
  const auto agg = aggregate_imputations(std::vector<MeasureTable>{a, b});
  EXPECT_NEAR(agg.rows[0].fit_O, 0.3, 1e-15);
  EXPECT_NEAR(agg.rows[0].fit_E(), 3.0, 1e-12);
  MeasureTable c = a;
  c.texts[0] = "x<0";
  EXPECT_THROW(aggregate_imputations(std::vector<MeasureTable>{a, c}), DataError);
}

TEST(GroupedEffect, SumsToOneAndDetectsLargeEffects) {
  const auto ps = gaussian_spec({"a", "b", "c"}, Eigen::Vector3d(0.01, 0.9, -0.02), Matrix::Identity(3, 3) * 0.01, 400);
  const auto [p0, p1] = grouped_effect_test(ps, {0, 2});
  EXPECT_NEAR(p0 + p1, 1.0, 1e-12);
  EXPECT_GT(p0, 0.5);
  const auto [q0, q1] = grouped_effect_test(ps, {1});
  EXPECT_LT(q0, 1e-6);
  EXPECT_THROW(grouped_effect_test(ps, {}), DataError);
}

TEST(GroupedEffect, NullDataConvergesToNull) {
  // Estimates drawn under the null with n = 10^4.
  RandomStream s(3);
  const double n = 10000, sd = 1.0 / std::sqrt(n);
  const auto ps = gaussian_spec({"a", "b"}, Eigen::Vector2d(sd * s.normal(), sd * s.normal()), Matrix::Identity(2, 2) * sd * sd, n);
  EXPECT_GT(grouped_effect_test(ps, {0, 1}).first, 0.95);
}
