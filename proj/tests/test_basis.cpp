#include <ahofm/basis.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace ahofm;

namespace {

std::vector<double> uniform_draws(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    return x;
}

} // namespace

TEST(BuildBasis, LinearQuantileKnotsOnEvenGrid)
{
    std::vector<double> x;
    for (int i = 0; i <= 300; ++i) x.push_back(i / 300.0);
    const SplineBasis b = build_basis(x, 4, 1);
    ASSERT_EQ(b.num_interior(), 2u);
    const std::vector<double> expected{0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0};
    ASSERT_EQ(b.knots.size(), expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(b.knots[k], expected[k], 1e-15);
}

TEST(BuildBasis, CubicKnotMultiplicity)
{
    const auto x = uniform_draws(100, 3);
    const SplineBasis b = build_basis(x, 10, 3);
    EXPECT_EQ(b.num_interior(), 6u);
    ASSERT_EQ(b.knots.size(), 14u);
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(b.knots[static_cast<std::size_t>(k)], b.lo);
        EXPECT_EQ(b.knots[b.knots.size() - 1 - static_cast<std::size_t>(k)], b.hi);
    }
    for (std::size_t k = 4; k < 10; ++k) {
        EXPECT_GT(b.knots[k], b.lo);
        EXPECT_LT(b.knots[k], b.hi);
        EXPECT_GE(b.knots[k], b.knots[k - 1]);
    }
    EXPECT_EQ(b.num_basis, b.num_interior() + 3 + 1);
}

TEST(BuildBasis, ConstantColumnIsDegenerate)
{
    const std::vector<double> x(50, 2.5);
    try {
        build_basis(x, 10, 3, 4);
        FAIL() << "expected an error";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate feature"), std::string::npos);
    }
}

TEST(BuildBasis, TooFewBasisFunctions)
{
    const auto x = uniform_draws(20, 1);
    EXPECT_THROW(build_basis(x, 4, 3), InvalidArgument);
    EXPECT_NO_THROW(build_basis(x, 5, 3));
}

TEST(BuildBasis, HeavyTiesFallBackToEqualSpacing)
{
    std::vector<double> x(100, 0.0);
    x[98] = 0.5;
    x[99] = 1.0;
    const SplineBasis b = build_basis(x, 6, 3);
    EXPECT_NEAR(b.knots[4], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(b.knots[5], 2.0 / 3.0, 1e-15);
}

TEST(EvalBasis, HandRunRecursionOnFixedKnots)
{
    SplineBasis b;
    b.knots = {0, 0, 0, 0, 0.5, 1, 1, 1, 1};
    b.spline_degree = 3;
    b.num_basis = 5;
    b.lo = 0.0;
    b.hi = 1.0;
    for (double x : {0.0, 0.1, 0.25, 0.5, 0.77, 1.0}) {
        const Eigen::VectorXd v = eval_basis(b, x);
        const auto ref = oracle::bspline_row(b.knots, 3, x);
        for (std::size_t m = 0; m < 5; ++m) EXPECT_NEAR(v(static_cast<Eigen::Index>(m)), static_cast<double>(ref[m]), 1e-15) << "x=" << x;
    }
    // Hand-run values at x = 0.25: (1/8, 19/32, 1/4, 1/32, 0).
    const Eigen::VectorXd v = eval_basis(b, 0.25);
    EXPECT_NEAR(v(0), 0.125, 1e-15);
    EXPECT_NEAR(v(1), 19.0 / 32.0, 1e-15);
    EXPECT_NEAR(v(2), 1.0 / 4.0, 1e-15);
    EXPECT_NEAR(v(3), 1.0 / 32.0, 1e-15);
    EXPECT_EQ(v(4), 0.0);
}

TEST(EvalBasis, DegreeZeroAtLowerBoundIsIndicator)
{
    const auto x = uniform_draws(50, 2);
    const SplineBasis b = build_basis(x, 4, 0);
    const Eigen::VectorXd v = eval_basis(b, b.lo);
    EXPECT_EQ(v(0), 1.0);
    for (Eigen::Index m = 1; m < v.size(); ++m) EXPECT_EQ(v(m), 0.0);
}

TEST(EvalBasis, NonFiniteArgumentThrows)
{
    const SplineBasis b = build_basis(uniform_draws(30, 5), 6, 3);
    EXPECT_THROW(eval_basis(b, std::nan("")), InvalidArgument);
    EXPECT_THROW(eval_basis(b, INFINITY), InvalidArgument);
}

TEST(EvalBasis, OutOfDomainIsClamped)
{
    const SplineBasis b = build_basis(uniform_draws(80, 6), 8, 3);
    EXPECT_EQ(eval_basis(b, b.lo - 3.0), eval_basis(b, b.lo));
    EXPECT_EQ(eval_basis(b, b.hi + 7.0), eval_basis(b, b.hi));
}

TEST(EvalBasis, PropertyPartitionUnityLocalSupportAgreesWithOracle)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int degree = static_cast<int>(rng() % 4);
        const std::size_t m = static_cast<std::size_t>(degree) + 2 + rng() % 8;
        const auto x = uniform_draws(200, 100 + static_cast<std::uint64_t>(trial));
        const SplineBasis b = build_basis(x, m, degree);
        std::uniform_real_distribution<double> u(b.lo, b.hi);
        for (int k = 0; k < 50; ++k) {
            const double z = k == 0 ? b.lo : (k == 1 ? b.hi : u(rng));
            const Eigen::VectorXd v = eval_basis(b, z);
            EXPECT_LT(std::abs(v.sum() - 1.0), 1e-12);
            EXPECT_GE(v.minCoeff(), 0.0);
            Eigen::Index first = -1;
            Eigen::Index last = -1;
            for (Eigen::Index t = 0; t < v.size(); ++t) {
                if (v(t) != 0.0) {
                    if (first < 0) first = t;
                    last = t;
                }
            }
            EXPECT_LE(last - first + 1, degree + 1);
            const auto ref = oracle::bspline_row(b.knots, degree, z);
            for (std::size_t t = 0; t < m; ++t) EXPECT_NEAR(v(static_cast<Eigen::Index>(t)), static_cast<double>(ref[t]), 1e-13);
        }
    }
}

TEST(EvalDesign, RowsMatchPointwiseEvaluation)
{
    const auto x = uniform_draws(100, 9);
    const SplineBasis b = build_basis(x, 10, 3);
    const DesignMatrix d = eval_design(b, x);
    ASSERT_EQ(d.rows(), 100);
    ASSERT_EQ(d.cols(), 10);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        EXPECT_EQ(Eigen::VectorXd(d.row(i).transpose()), eval_basis(b, x[static_cast<std::size_t>(i)]));
        EXPECT_LT(std::abs(d.row(i).sum() - 1.0), 1e-12);
    }
    const std::vector<double> one{x[3]};
    const DesignMatrix d1 = eval_design(b, one);
    ASSERT_EQ(d1.rows(), 1);
    EXPECT_EQ(Eigen::VectorXd(d1.row(0).transpose()), eval_basis(b, x[3]));
}

TEST(EvalDesign, StorageIsNpM)
{
    std::size_t total = 0;
    for (std::size_t j = 0; j < 5; ++j) {
        const auto x = uniform_draws(100, 20 + j);
        total += static_cast<std::size_t>(eval_design(build_basis(x, 10, 3, j), x).size());
    }
    EXPECT_EQ(total, 5000u);
}

TEST(EvalDesign, CountsClampedValues)
{
    const auto x = uniform_draws(60, 4);
    const SplineBasis b = build_basis(x, 6, 3);
    const std::vector<double> probe{b.lo - 1.0, 0.5, b.hi + 1.0, b.hi};
    std::size_t clamped = 0;
    eval_design(b, probe, &clamped);
    EXPECT_EQ(clamped, 2u);
}

TEST(DifferencePenalty, FirstOrderByHand)
{
    const PenaltyMatrix p = difference_penalty(3, 1);
    Eigen::MatrixXd expected(3, 3);
    expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
    EXPECT_EQ(p.matrix, expected);
}

TEST(DifferencePenalty, SecondOrderByHand)
{
    const PenaltyMatrix p = difference_penalty(4, 2);
    Eigen::MatrixXd expected(4, 4);
    expected << 1, -2, 1, 0, -2, 5, -4, 1, 1, -4, 5, -2, 0, 1, -2, 1;
    EXPECT_EQ(p.matrix, expected);
}

TEST(DifferencePenalty, OrderMustBeBelowM)
{
    EXPECT_THROW(difference_penalty(3, 3), InvalidArgument);
    EXPECT_THROW(difference_penalty(2, 4), InvalidArgument);
}

TEST(DifferencePenalty, PropertyStructure)
{
    std::mt19937_64 rng(5);
    for (std::size_t m = 3; m <= 20; ++m) {
        for (int order : {1, 2}) {
            const PenaltyMatrix p = difference_penalty(m, order);
            const Eigen::MatrixXd d = oracle::difference_by_hand(m, order);
            EXPECT_LT((p.matrix - d.transpose() * d).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_EQ(p.matrix, p.matrix.transpose());
            EXPECT_EQ(oracle::near_zero_eigenvalues(p.matrix, 1e-10), static_cast<std::size_t>(order));
            for (int k = 0; k < 20; ++k) {
                const auto v = oracle::normal_vector(rng, m);
                const Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(m));
                EXPECT_GE(vv.dot(p.matrix * vv), -1e-12);
            }
            const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
            const Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(m), 1.0, static_cast<double>(m));
            EXPECT_LT((p.matrix * ones).cwiseAbs().maxCoeff(), 1e-12);
            if (order == 2) {
                EXPECT_LT((p.matrix * ramp).cwiseAbs().maxCoeff(), 1e-12);
            }
        }
    }
}
