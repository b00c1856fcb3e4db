#pragma once

#include <Eigen/Core>

#include <ahofm/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

/// Row-major so that one observation's basis row is contiguous.
using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Clamped B-spline basis for a single feature.
///
/// The knot vector repeats each boundary `spline_degree + 1` times, so the
/// basis is interpolating at the domain ends and every point of [lo, hi]
/// is covered by exactly `spline_degree + 1` (possibly zero) basis values.
struct SplineBasis {
    std::size_t feature_index = 0;
    std::vector<double> knots;
    int spline_degree = 3;
    std::size_t num_basis = 0;
    double lo = 0.0;
    double hi = 1.0;

    std::size_t num_interior() const { return num_basis - static_cast<std::size_t>(spline_degree) - 1; }
    double clamp(double x) const { return std::clamp(x, lo, hi); }
};

/// Squared difference penalty `D^T D` of a given order.
struct PenaltyMatrix {
    int order = 2;
    Eigen::MatrixXd matrix;
};

namespace detail {

// Type-7 (linear interpolation) sample quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double q)
{
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

// Index i with knots[i] <= x < knots[i+1], restricted to the active range
// [degree, num_basis - 1]. The right boundary belongs to the last span.
inline std::size_t find_span(const SplineBasis& b, double x)
{
    const auto p = static_cast<std::size_t>(b.spline_degree);
    const std::size_t last = b.num_basis - 1;
    if (x >= b.knots[last + 1]) return last;
    if (x <= b.knots[p]) return p;
    const auto first = b.knots.begin() + static_cast<std::ptrdiff_t>(p);
    const auto end = b.knots.begin() + static_cast<std::ptrdiff_t>(last + 2);
    const auto it = std::upper_bound(first, end, x);
    return static_cast<std::size_t>(it - b.knots.begin()) - 1;
}

} // namespace detail

/// Places interior knots at empirical quantiles of `x_column`.
///
/// Falls back to equally spaced interior knots when heavy ties make the
/// quantiles collide with each other or with the boundary.
inline SplineBasis build_basis(std::span<const double> x_column, std::size_t num_basis,
                               int spline_degree = 3, std::size_t feature_index = 0)
{
    detail::require(spline_degree >= 0, "spline degree must be nonnegative");
    detail::require(num_basis >= static_cast<std::size_t>(spline_degree) + 2,
                    "num_basis must be at least spline_degree + 2 (got " + std::to_string(num_basis) + ")");
    detail::require(!x_column.empty(), "empty feature column");
    for (double v : x_column) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite value in feature column");
    }

    std::vector<double> sorted(x_column.begin(), x_column.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (!(hi > lo)) {
        throw InvalidArgument("degenerate feature " + std::to_string(feature_index) + ": constant column");
    }

    SplineBasis b;
    b.feature_index = feature_index;
    b.spline_degree = spline_degree;
    b.num_basis = num_basis;
    b.lo = lo;
    b.hi = hi;

    const std::size_t k = b.num_interior();
    std::vector<double> interior(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double q = static_cast<double>(i + 1) / static_cast<double>(k + 1);
        interior[i] = detail::sorted_quantile(sorted, q);
    }
    bool ok = true;
    for (std::size_t i = 0; i < k; ++i) {
        const double prev = i == 0 ? lo : interior[i - 1];
        if (!(interior[i] > prev)) ok = false;
    }
    if (k > 0 && !(interior.back() < hi)) ok = false;
    if (!ok) {
        for (std::size_t i = 0; i < k; ++i) {
            interior[i] = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(k + 1);
        }
    }

    const auto reps = static_cast<std::size_t>(spline_degree) + 1;
    b.knots.reserve(k + 2 * reps);
    b.knots.insert(b.knots.end(), reps, lo);
    b.knots.insert(b.knots.end(), interior.begin(), interior.end());
    b.knots.insert(b.knots.end(), reps, hi);
    return b;
}

/// Cox-de Boor evaluation into `out` (length num_basis). Out-of-domain
/// arguments are clamped to [lo, hi] first.
inline void eval_basis_into(const SplineBasis& b, double x, std::span<double> out)
{
    if (!std::isfinite(x)) throw InvalidArgument("non-finite argument to basis evaluation");
    detail::require(out.size() == b.num_basis, "basis output length mismatch");
    std::fill(out.begin(), out.end(), 0.0);

    x = b.clamp(x);
    const auto p = static_cast<std::size_t>(b.spline_degree);
    const std::size_t span = detail::find_span(b, x);
    const auto& t = b.knots;

    // Triangular scheme over the p + 1 nonzero functions on this span.
    double n[32];
    double left[32];
    double right[32];
    detail::require(p < 31, "spline degree too large");
    n[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double tmp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    for (std::size_t r = 0; r <= p; ++r) out[span - p + r] = n[r];
}

inline Eigen::VectorXd eval_basis(const SplineBasis& b, double x)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(b.num_basis));
    eval_basis_into(b, x, std::span<double>(v.data(), b.num_basis));
    return v;
}

/// Evaluates the basis once per observation; `clamped` (if given) receives
/// the number of values that fell outside [lo, hi].
inline DesignMatrix eval_design(const SplineBasis& b, std::span<const double> x_column,
                                std::size_t* clamped = nullptr)
{
    const auto n = static_cast<Eigen::Index>(x_column.size());
    DesignMatrix design(n, static_cast<Eigen::Index>(b.num_basis));
    std::size_t outside = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = x_column[static_cast<std::size_t>(i)];
        if (x < b.lo || x > b.hi) ++outside;
        eval_basis_into(b, x, std::span<double>(design.row(i).data(), b.num_basis));
    }
    if (clamped) *clamped = outside;
    return design;
}

/// Forward-difference operator of the given order, shape (M - order) x M.
inline Eigen::MatrixXd difference_operator(std::size_t num_basis, int order)
{
    detail::require(order >= 0, "difference order must be nonnegative");
    detail::require(static_cast<std::size_t>(order) < num_basis,
                    "difference order must be smaller than num_basis");
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(num_basis),
                                                  static_cast<Eigen::Index>(num_basis));
    for (int k = 0; k < order; ++k) {
        const Eigen::Index rows = d.rows() - 1;
        Eigen::MatrixXd next = d.bottomRows(rows) - d.topRows(rows);
        d = std::move(next);
    }
    return d;
}

inline PenaltyMatrix difference_penalty(std::size_t num_basis, int order)
{
    const Eigen::MatrixXd d = difference_operator(num_basis, order);
    PenaltyMatrix p;
    p.order = order;
    p.matrix = d.transpose() * d;
    // D^T D is symmetric in exact arithmetic; make it bitwise so.
    p.matrix = (0.5 * (p.matrix + p.matrix.transpose())).eval();
    return p;
}

} // namespace ahofm
