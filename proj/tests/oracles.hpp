#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numerical routines.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Textbook recursive Cox-de Boor definition in extended precision.
/// The last nonzero-width interval is closed on the right.
inline long double bspline(const std::vector<double>& t, int degree, std::size_t i, long double x)
{
    if (degree == 0) {
        const long double a = t[i];
        const long double b = t[i + 1];
        if (a < b && a <= x && x < b) return 1.0L;
        // Right end of the domain belongs to the last nonempty interval.
        if (a < b && x == b && b == static_cast<long double>(t.back())) {
            std::size_t k = i + 1;
            while (k + 1 < t.size() && t[k] == t[k + 1]) ++k;
            if (k + 1 == t.size()) return 1.0L;
        }
        return 0.0L;
    }
    long double left = 0.0L;
    long double right = 0.0L;
    const long double d1 = static_cast<long double>(t[i + degree]) - t[i];
    const long double d2 = static_cast<long double>(t[i + degree + 1]) - t[i + 1];
    if (d1 > 0.0L) left = (x - t[i]) / d1 * bspline(t, degree - 1, i, x);
    if (d2 > 0.0L) right = (static_cast<long double>(t[i + degree + 1]) - x) / d2 * bspline(t, degree - 1, i + 1, x);
    return left + right;
}

inline std::vector<long double> bspline_row(const std::vector<double>& t, int degree, long double x)
{
    const std::size_t m = t.size() - static_cast<std::size_t>(degree) - 1;
    std::vector<long double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = bspline(t, degree, i, x);
    return out;
}

/// Sum over k < l of v_k v_l by a double loop.
inline long double pair_sum(const std::vector<double>& v)
{
    long double s = 0.0L;
    for (std::size_t k = 0; k < v.size(); ++k) {
        for (std::size_t l = k + 1; l < v.size(); ++l) s += static_cast<long double>(v[k]) * v[l];
    }
    return s;
}

/// Elementary symmetric polynomial via bitmask enumeration of subsets.
inline long double esp_bitmask(const std::vector<double>& v, int d)
{
    const std::size_t p = v.size();
    long double s = 0.0L;
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask) {
        if (__builtin_popcount(mask) != d) continue;
        long double prod = 1.0L;
        for (std::size_t k = 0; k < p; ++k) {
            if (mask & (1u << k)) prod *= v[k];
        }
        s += prod;
    }
    return s;
}

/// Same sum with absolute values: the natural magnitude scale of e_d.
inline long double esp_abs_scale(const std::vector<double>& v, int d)
{
    std::vector<double> a(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) a[k] = std::abs(v[k]);
    return esp_bitmask(a, d);
}

inline LMatrix to_long(const Eigen::MatrixXd& m) { return m.cast<long double>(); }

/// Dense n x n hat matrix H = B (B^T B + lambda P)^-1 B^T in extended precision.
inline LMatrix hat_matrix(const Eigen::MatrixXd& b, const Eigen::MatrixXd& p, double lambda)
{
    const LMatrix bl = to_long(b);
    const LMatrix a = bl.transpose() * bl + static_cast<long double>(lambda) * to_long(p);
    const LMatrix ainv = a.fullPivLu().inverse();
    return bl * ainv * bl.transpose();
}

inline long double trace_h(const Eigen::MatrixXd& b, const Eigen::MatrixXd& p, double lambda)
{
    return hat_matrix(b, p, lambda).trace();
}

inline long double trace_2h_minus_hth(const Eigen::MatrixXd& b, const Eigen::MatrixXd& p, double lambda)
{
    const LMatrix h = hat_matrix(b, p, lambda);
    return 2.0L * h.trace() - (h.transpose() * h).trace();
}

/// Number of eigenvalues of a symmetric matrix below tol * max |eigenvalue|.
inline std::size_t near_zero_eigenvalues(const Eigen::MatrixXd& s, double tol)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
    const double mx = ev.maxCoeff();
    std::size_t c = 0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (ev(k) <= tol * mx) ++c;
    }
    return c;
}

/// Explicit forward differences of order k applied to the identity.
inline Eigen::MatrixXd difference_by_hand(std::size_t m, int order)
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m - order), static_cast<Eigen::Index>(m));
    // Row r holds the binomial coefficients (-1)^(order-k) C(order, k) at column r + k.
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        long double c = 1.0L;
        for (int k = 0; k <= order; ++k) {
            const double sign = ((order - k) % 2 == 0) ? 1.0 : -1.0;
            d(r, r + k) = sign * static_cast<double>(c);
            c = c * (order - k) / (k + 1);
        }
    }
    return d;
}

inline std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double sd = 1.0)
{
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

} // namespace oracle
