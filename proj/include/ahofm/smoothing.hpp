#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <ahofm/basis.hpp>
#include <ahofm/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace ahofm {

/// Demmler-Reinsch spectrum of one feature's smoother.
struct DROResult {
    std::size_t feature_index = 0;
    Eigen::VectorXd singular_values; ///< descending, tiny values clamped to 0
    bool ridge_added = false;        ///< B^T B needed a diagonal ridge

    std::size_t num_zero() const
    {
        return static_cast<std::size_t>((singular_values.array() == 0.0).count());
    }
};

/// Smoothing parameters for every (degree, feature).
///
/// Degree 1 holds the univariate (beta) terms. lambda(d, j) is shared by
/// every latent factor f of degree d.
struct SmoothingPlan {
    std::vector<double> df_targets;            ///< index d - 1
    std::vector<std::vector<double>> lambdas;  ///< [d - 1][j]
    /// tr(2H - H^T H) at the calibrated lambda, [d - 1][j]; NaN when the
    /// smoother is numerically singular. Calibration itself matches tr(H).
    std::vector<std::vector<double>> exact_df;
    std::vector<Eigen::VectorXd> singular_values; ///< per feature
    std::size_t dro_evaluations = 0;
    std::vector<std::string> warnings;

    int max_degree() const { return static_cast<int>(lambdas.size()); }
    double lambda(int d, std::size_t j) const { return lambdas.at(static_cast<std::size_t>(d - 1)).at(j); }
};

/// Degrees-of-freedom targets: one per degree, optionally overridden for
/// individual features (anisotropic smoothing).
struct DfTargets {
    std::vector<double> per_degree;                 ///< index d - 1
    std::map<std::size_t, double> feature_overrides;
};

namespace detail {

inline constexpr double kDfTolerance = 1e-8;
inline constexpr double kLambdaLo = 1e-12;
inline constexpr double kLambdaHi = 1e12;
inline constexpr int kRootMaxIter = 200;

} // namespace detail

/// tr(H) with H = B (B^T B + lambda P)^-1 B^T, via the M x M inner system.
inline double trace_hat(const DesignMatrix& design, const PenaltyMatrix& penalty, double lambda)
{
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::MatrixXd a = gram + lambda * penalty.matrix;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("singular smoother");
    return llt.solve(gram).trace();
}

/// tr(2H - H^T H) for the penalized smoother, without forming the n x n H.
///
/// With G = B^T B and A = G + lambda P: tr(H) = tr(A^-1 G) and
/// tr(H^T H) = tr(A^-1 G A^-1 G).
inline double degrees_of_freedom_exact(const DesignMatrix& design, const PenaltyMatrix& penalty, double lambda)
{
    detail::require(lambda >= 0.0, "lambda must be nonnegative");
    detail::require(design.cols() == penalty.matrix.rows(), "design/penalty dimension mismatch");
    const Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::MatrixXd a = gram + lambda * penalty.matrix;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("singular smoother");
    // Guard against LLT accepting a numerically singular matrix.
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    if (diag.minCoeff() <= 1e-6 * std::sqrt(std::max(a.diagonal().maxCoeff(), 1e-300))) {
        throw NumericError("singular smoother");
    }
    const Eigen::MatrixXd k = llt.solve(gram);
    return 2.0 * k.trace() - (k * k).trace();
}

/// Cholesky of B^T B followed by the SVD of R^-T P R^-1.
inline DROResult dro(const DesignMatrix& design, const PenaltyMatrix& penalty, std::size_t feature_index = 0)
{
    detail::require(design.cols() == penalty.matrix.rows(), "design/penalty dimension mismatch");
    const Eigen::Index m = design.cols();
    Eigen::MatrixXd gram = design.transpose() * design;

    DROResult out;
    out.feature_index = feature_index;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    auto degenerate = [&](const Eigen::LLT<Eigen::MatrixXd>& f) {
        if (f.info() != Eigen::Success) return true;
        const Eigen::VectorXd diag = f.matrixL().toDenseMatrix().diagonal();
        return !(diag.minCoeff() > 1e-7 * std::sqrt(gram.diagonal().maxCoeff()));
    };
    if (degenerate(llt)) {
        const double ridge = 1e-10 * gram.trace() / static_cast<double>(m);
        gram.diagonal().array() += ridge;
        llt.compute(gram);
        out.ridge_added = true;
        if (llt.info() != Eigen::Success || !(ridge > 0.0)) {
            throw NumericError("DRO: B^T B is singular for feature " + std::to_string(feature_index));
        }
    }
    // C = R^-T P R^-1 with R^T R = G, i.e. R^T = L.
    const auto l = llt.matrixL();
    Eigen::MatrixXd c = l.solve(penalty.matrix);            // L^-1 P
    c = l.solve(c.transpose()).transpose().eval();          // L^-1 P L^-T
    c = (0.5 * (c + c.transpose())).eval();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    Eigen::VectorXd s = svd.singularValues();
    const double smax = s.size() > 0 ? s.maxCoeff() : 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) <= 1e-10 * smax) s(k) = 0.0;
    }
    std::sort(s.data(), s.data() + s.size(), std::greater<>());
    out.singular_values = std::move(s);
    return out;
}

/// Trace of the smoother as a function of lambda: sum_k 1 / (1 + lambda s_k).
inline double dffun(const Eigen::VectorXd& s, double lambda)
{
    double acc = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) acc += 1.0 / (1.0 + lambda * s(k));
    return acc;
}

/// Smoothing parameter whose dffun equals `df_target`.
///
/// Bisection in log(lambda) on [1e-12, 1e12]; the lower end drops to 0
/// when the target sits between dffun(1e-12) and M.
inline double sv2la(const Eigen::VectorXd& s, double df_target)
{
    const auto m = static_cast<double>(s.size());
    std::size_t nullity = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) == 0.0) ++nullity;
    }
    const double lo_df = static_cast<double>(nullity);
    if (!(df_target > lo_df && df_target <= m)) {
        std::ostringstream msg;
        msg << "df target infeasible: " << df_target << " not in (" << lo_df << ", " << m << "]";
        throw NumericError(msg.str());
    }
    if (df_target == m) return 0.0;

    auto excess = [&](double lambda) { return dffun(s, lambda) - df_target; };
    const double tight = 1e-3 * detail::kDfTolerance;

    if (excess(detail::kLambdaLo) < 0.0) {
        double a = 0.0;
        double b = detail::kLambdaLo;
        for (int it = 0; it < detail::kRootMaxIter; ++it) {
            const double mid = 0.5 * (a + b);
            (excess(mid) > 0.0 ? a : b) = mid;
        }
        return 0.5 * (a + b);
    }
    if (excess(detail::kLambdaHi) > 0.0) {
        if (excess(detail::kLambdaHi) <= detail::kDfTolerance) return detail::kLambdaHi;
        std::ostringstream msg;
        msg << "df target infeasible: " << df_target << " not reachable below lambda = " << detail::kLambdaHi
            << " (feasible interval (" << lo_df << ", " << m << "])";
        throw NumericError(msg.str());
    }

    double a = std::log(detail::kLambdaLo);
    double b = std::log(detail::kLambdaHi);
    double mid = 0.5 * (a + b);
    for (int it = 0; it < detail::kRootMaxIter; ++it) {
        mid = 0.5 * (a + b);
        const double e = excess(std::exp(mid));
        if (std::abs(e) <= tight) break;
        (e > 0.0 ? a : b) = mid;
    }
    const double lambda = std::exp(mid);
    if (std::abs(excess(lambda)) > detail::kDfTolerance) {
        throw NumericError("sv2la: root search did not reach tolerance");
    }
    return lambda;
}

/// One DRO per feature, then one lambda per (degree, feature).
///
/// Targets above M are clipped to M (no penalty) and reported as warnings.
inline SmoothingPlan homogeneous_smoothing(std::span<const DesignMatrix> designs,
                                           std::span<const PenaltyMatrix> penalties, const DfTargets& targets)
{
    detail::require(designs.size() == penalties.size(), "one penalty per design matrix required");
    detail::require(!targets.per_degree.empty(), "at least one df target required");
    const std::size_t p = designs.size();
    const std::size_t degrees = targets.per_degree.size();

    SmoothingPlan plan;
    plan.df_targets = targets.per_degree;
    plan.lambdas.assign(degrees, std::vector<double>(p, 0.0));
    plan.exact_df.assign(degrees, std::vector<double>(p, std::numeric_limits<double>::quiet_NaN()));
    plan.singular_values.resize(p);

    for (std::size_t j = 0; j < p; ++j) {
        const DROResult res = dro(designs[j], penalties[j], j);
        ++plan.dro_evaluations;
        if (res.ridge_added) {
            plan.warnings.push_back("feature " + std::to_string(j) + ": ridge added to B^T B");
        }
        const auto m = static_cast<double>(res.singular_values.size());
        for (std::size_t d = 0; d < degrees; ++d) {
            double target = targets.per_degree[d];
            if (auto it = targets.feature_overrides.find(j); it != targets.feature_overrides.end()) {
                target = it->second;
            }
            if (target > m) {
                std::ostringstream msg;
                msg << "feature " << j << ", degree " << d + 1 << ": df " << target << " clipped to M = " << m;
                plan.warnings.push_back(msg.str());
                target = m;
            }
            try {
                plan.lambdas[d][j] = sv2la(res.singular_values, target);
            } catch (const NumericError& e) {
                throw NumericError("feature " + std::to_string(j) + ", degree " + std::to_string(d + 1) + ": " +
                                   e.what());
            }
            try {
                plan.exact_df[d][j] = degrees_of_freedom_exact(designs[j], penalties[j], plan.lambdas[d][j]);
            } catch (const NumericError&) {
            }
        }
        plan.singular_values[j] = res.singular_values;
    }
    return plan;
}

} // namespace ahofm
