#include <gtest/gtest.h>

#include <random>

#include "cbf/constrained_spaces.hpp"
#include "cbf/hypothesis.hpp"

using namespace cbf;

namespace {

// theta^E = R^E theta, theta^O = R^O theta from the first rows of T.
bool member_transformed(const ConstraintMatrices& h, const Transformation& tr, const Vector& theta) {
  const Eigen::Index qE = h.RE.rows(), qO = h.RO.rows();
  if (!tr.reduced) {
    const Vector z = tr.T * theta;
    if (qE && ((z.head(qE) - h.rE).cwiseAbs().array() > 1e-9).any()) return false;
    return qO == 0 || ((z.segment(qE, qO) - h.rO).array() > 0.0).all();
  }
  if (qE && ((h.RE * theta - h.rE).cwiseAbs().array() > 1e-9).any()) return false;
  return qO == 0 || ((tr.RO_tilde * tr.reduce(theta) - tr.rO_tilde).array() > 0.0).all();
}

}  // namespace

TEST(Transformation, IsInvertibleForFullRankConstraints) {
  const ParameterSpace s({"a", "b", "c", "d"});
  const auto h = parse("a = b & c > d", s)[0];
  const auto tr = build_transformation(h, 4);
  ASSERT_FALSE(tr.reduced);
  EXPECT_EQ(tr.T.rows(), 4);
  EXPECT_GT(std::abs(tr.T.determinant()), 1e-9);
  // D rows are orthogonal to the constraint rows.
  EXPECT_LT((h.stacked() * tr.D.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Transformation, ReducedWhenOrderBlockIsRankDeficient) {
  const ParameterSpace s({"a", "b", "c"});
  // Three order rows on a two-dimensional difference space.
  const auto h = parse("a > b & b > c & a > c - 1", s)[0];
  const auto tr = build_transformation(h, 3);
  EXPECT_TRUE(tr.reduced);
  EXPECT_EQ(tr.D_tilde.rows(), 3);
}

TEST(Transformation, RedundantEqualitiesRejected) {
  ConstraintMatrices h = ConstraintMatrices::empty(2);
  h.RE = Matrix(2, 2);
  h.RE << 1, -1, 2, -2;
  h.rE = Vector::Zero(2);
  EXPECT_THROW(build_transformation(h, 2), HypothesisError);
}

TEST(Transformation, MembershipEquivalenceRandomized) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  const ParameterSpace s({"a", "b", "c", "d"});
  const std::vector<std::string> hyps{"a > b > c > d", "a = b > c & d > 0", "a > b & b > c & a > c - 1",
                                      "a + b = 2*c & c > d", "a > (b, c) > d", "a = b = c > d"};
  for (const auto& text : hyps) {
    const auto h = parse(text, s)[0];
    const auto tr = build_transformation(h, 4);
    const auto bp = boundary_point(h, 4);
    int agree = 0;
    for (int i = 0; i < 10000; ++i) {
      Vector theta(4);
      for (int k = 0; k < 4; ++k) theta(k) = z(rng);
      // Half the points are projected onto the equality hyperplane so both
      // branches of the equivalence are exercised.
      if (h.RE.rows() && (i % 2 == 0)) {
        const Matrix Dt = tr.D_tilde;
        theta = bp.theta0 + Dt.transpose() * (Dt * (theta - bp.theta0));
      }
      agree += h.satisfied_by(theta, 1e-9) == member_transformed(h, tr, theta);
    }
    EXPECT_EQ(agree, 10000) << text;
  }
}

TEST(BoundaryPoint, SatisfiesAllRowsWithEquality) {
  const ParameterSpace s({"a", "b", "c"});
  const auto h = parse("a = 1 & b > a & c > 2", s)[0];
  const auto bp = boundary_point(h, 3);
  EXPECT_TRUE(bp.exact);
  EXPECT_LT((h.stacked() * bp.theta0 - h.stacked_rhs()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundaryPoint, InconsistentOrderBoundsUseLeastSquares) {
  const ParameterSpace s({"a", "b"});
  const auto h = parse("a > 0 & a > 1", s)[0];
  const auto bp = boundary_point(h, 2);
  EXPECT_FALSE(bp.exact);
  EXPECT_NEAR(bp.theta0(0), 0.5, 1e-12);
}
