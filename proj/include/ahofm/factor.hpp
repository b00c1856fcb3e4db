#pragma once

#include <Eigen/Core>

#include <ahofm/basis.hpp>
#include <ahofm/error.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

/// Latent coefficients of one interaction degree, shape M x p x F.
///
/// Mode-1 fibers (the M coefficients of feature j in factor f) are stored
/// contiguously, i.e. the buffer is row-major over the shape (F, p, M).
class FactorTensor {
public:
    FactorTensor() = default;
    FactorTensor(int degree, std::size_t num_basis, std::size_t num_features, std::size_t num_factors)
        : degree_(degree), m_(num_basis), p_(num_features), f_(num_factors),
          values_(num_basis * num_features * num_factors, 0.0)
    {
        detail::require(degree >= 2, "factor tensors exist for degrees >= 2 only");
    }

    int degree() const { return degree_; }
    std::size_t num_basis() const { return m_; }
    std::size_t num_features() const { return p_; }
    std::size_t num_factors() const { return f_; }
    std::size_t size() const { return values_.size(); }

    std::span<double> fiber(std::size_t j, std::size_t f) { return {values_.data() + offset(j, f), m_}; }
    std::span<const double> fiber(std::size_t j, std::size_t f) const { return {values_.data() + offset(j, f), m_}; }

    double& operator()(std::size_t m, std::size_t j, std::size_t f) { return values_[offset(j, f) + m]; }
    double operator()(std::size_t m, std::size_t j, std::size_t f) const { return values_[offset(j, f) + m]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t offset(std::size_t j, std::size_t f) const { return (f * p_ + j) * m_; }

    int degree_ = 2;
    std::size_t m_ = 0;
    std::size_t p_ = 0;
    std::size_t f_ = 0;
    std::vector<double> values_;
};

/// Intercept and univariate spline coefficients; column j of `betas` is beta_j.
struct MainEffects {
    double alpha0 = 0.0;
    Eigen::MatrixXd betas;

    MainEffects() = default;
    MainEffects(std::size_t num_basis, std::size_t num_features)
        : betas(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_basis),
                                      static_cast<Eigen::Index>(num_features))) {}
};

/// Counts multiply-adds spent inside the predictor.
struct OpCounter {
    std::uint64_t flops = 0;
};

inline double phi(std::span<const double> design_row, std::span<const double> gamma_fiber)
{
    if (design_row.size() != gamma_fiber.size()) {
        throw InvalidArgument("phi: basis row has " + std::to_string(design_row.size()) +
                              " entries but fiber has " + std::to_string(gamma_fiber.size()));
    }
    double s = 0.0;
    for (std::size_t m = 0; m < design_row.size(); ++m) s += design_row[m] * gamma_fiber[m];
    return s;
}

/// Sum over all pairs k < l of phi_k * phi_l, via the squared-sum identity.
inline double afm_pairwise(std::span<const double> phis)
{
    double sum = 0.0;
    double sq = 0.0;
    for (double v : phis) {
        sum += v;
        sq += v * v;
    }
    return 0.5 * (sum * sum - sq);
}

/// Degree-d elementary symmetric polynomial by explicit enumeration of all
/// strictly increasing index tuples. Exponential cost; reference use only.
inline double ahot_naive(std::span<const double> phis, int d)
{
    detail::require(d >= 0, "degree must be nonnegative");
    const auto du = static_cast<std::size_t>(d);
    if (du == 0) return 1.0;
    if (du > phis.size()) return 0.0;

    std::vector<std::size_t> idx(du);
    for (std::size_t t = 0; t < du; ++t) idx[t] = t;
    const std::size_t p = phis.size();
    double total = 0.0;
    while (true) {
        double prod = 1.0;
        for (std::size_t t : idx) prod *= phis[t];
        total += prod;
        // Next combination in lexicographic order.
        std::size_t pos = du;
        while (pos > 0 && idx[pos - 1] == p - du + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t t = pos; t < du; ++t) idx[t] = idx[t - 1] + 1;
    }
    return total;
}

namespace detail {

// Power sums sum_j phi_j^t for t = 1..d, stored at sums[t].
inline void power_sums_into(std::span<const double> phis, std::size_t d, double* sums)
{
    for (std::size_t t = 1; t <= d; ++t) sums[t] = 0.0;
    for (double v : phis) {
        double pw = 1.0;
        for (std::size_t t = 1; t <= d; ++t) {
            pw *= v;
            sums[t] += pw;
        }
    }
}

// Differentiates the Newton recursion with respect to one phi value x.
inline double ahot_partial_from_sums(const double* sums, std::span<const double> byproducts, double x,
                                     std::size_t d)
{
    double dphi[32];
    dphi[0] = 0.0;
    for (std::size_t k = 1; k <= d; ++k) {
        double acc = 0.0;
        double xpow = 1.0; // x^(t-1)
        for (std::size_t t = 1; t <= k; ++t) {
            const double term = dphi[k - t] * sums[t] + byproducts[k - t] * static_cast<double>(t) * xpow;
            acc += (t % 2 == 1) ? term : -term;
            xpow *= x;
        }
        dphi[k] = acc / static_cast<double>(k);
    }
    return dphi[d];
}

} // namespace detail

/// Newton-identity recursion: fills out[k] = Phi^(k) for k = 0..d.
///
/// Degrees above the number of features are set to exactly zero.
inline void ahot_recursive_into(std::span<const double> phis, int d, std::span<double> out,
                                OpCounter* counter = nullptr)
{
    detail::require(d >= 0, "degree must be nonnegative");
    const auto du = static_cast<std::size_t>(d);
    detail::require(out.size() >= du + 1, "ahot output buffer too small");

    double power_sums[32];
    detail::require(du < 32, "interaction degree too large");
    detail::power_sums_into(phis, du, power_sums);
    out[0] = 1.0;
    for (std::size_t k = 1; k <= du; ++k) {
        if (k > phis.size()) {
            out[k] = 0.0;
            continue;
        }
        double acc = 0.0;
        for (std::size_t t = 1; t <= k; ++t) {
            const double term = out[k - t] * power_sums[t];
            acc += (t % 2 == 1) ? term : -term;
        }
        out[k] = acc / static_cast<double>(k);
    }
    if (counter) counter->flops += phis.size() * du + du * (du + 1) / 2;
}

/// All Phi^(0..d); the last entry is the degree-d term.
inline std::vector<double> ahot_recursive(std::span<const double> phis, int d)
{
    std::vector<double> out(static_cast<std::size_t>(d) + 1);
    ahot_recursive_into(phis, d, out);
    return out;
}

/// d Phi^(d) / d phi_j by differentiating the recursion term by term.
///
/// `byproducts` must hold Phi^(0..d) for the same `phis`.
inline double ahot_partial(std::span<const double> phis, std::span<const double> byproducts,
                           std::size_t j, int d)
{
    const auto du = static_cast<std::size_t>(d);
    detail::require(j < phis.size(), "feature index out of range");
    detail::require(byproducts.size() >= du + 1, "missing lower-degree ahot values");
    detail::require(du < 32, "interaction degree too large");
    if (du == 0 || du > phis.size()) return 0.0;
    double sums[32];
    detail::power_sums_into(phis, du, sums);
    return detail::ahot_partial_from_sums(sums, byproducts, phis[j], du);
}

/// Phi^(k) of all features except j for k = 0..d, obtained from the full
/// values by peeling off feature j: Phi_{-j}^(k) = Phi^(k) - phi_j Phi_{-j}^(k-1).
inline std::vector<double> ahot_excluding(std::span<const double> byproducts, double phi_j, int d)
{
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> out(du + 1);
    out[0] = 1.0;
    for (std::size_t k = 1; k <= du; ++k) out[k] = byproducts[k] - phi_j * out[k - 1];
    return out;
}

/// Phi^(d)(all) - [Phi^(d)(without j) + phi_j Phi^(d-1)(without j)], each
/// term computed from scratch by the recursion.
inline double multilinearity_residual(std::span<const double> phis, int d, std::size_t j)
{
    detail::require(j < phis.size(), "feature index out of range");
    detail::require(d >= 1, "multilinearity needs degree >= 1");
    std::vector<double> rest;
    rest.reserve(phis.size() - 1);
    for (std::size_t k = 0; k < phis.size(); ++k) {
        if (k != j) rest.push_back(phis[k]);
    }
    const auto all = ahot_recursive(phis, d);
    const auto without = ahot_recursive(rest, d);
    const auto du = static_cast<std::size_t>(d);
    return all[du] - (without[du] + phis[j] * without[du - 1]);
}

/// AHOFM predictor for a single observation.
///
/// `rows[j]` is the basis row of feature j; `factors[d - 2]` is the degree-d
/// tensor. The univariate part sums over all basis functions of each feature.
inline double predictor(std::span<const std::span<const double>> rows, const MainEffects& main,
                        std::span<const FactorTensor> factors, OpCounter* counter = nullptr)
{
    const std::size_t p = rows.size();
    if (static_cast<std::size_t>(main.betas.cols()) != p) {
        throw InvalidArgument("predictor: main effects cover " + std::to_string(main.betas.cols()) +
                              " features, got " + std::to_string(p) + " rows");
    }
    double eta = main.alpha0;
    for (std::size_t j = 0; j < p; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        eta += phi(rows[j], {main.betas.col(col).data(), static_cast<std::size_t>(main.betas.rows())});
        if (counter) counter->flops += rows[j].size();
    }

    std::vector<double> phis(p);
    std::vector<double> byproducts;
    for (const FactorTensor& g : factors) {
        if (g.num_features() != p) throw InvalidArgument("predictor: factor tensor feature count mismatch");
        const int d = g.degree();
        byproducts.assign(static_cast<std::size_t>(d) + 1, 0.0);
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            for (std::size_t j = 0; j < p; ++j) {
                phis[j] = phi(rows[j], g.fiber(j, f));
                if (counter) counter->flops += rows[j].size();
            }
            ahot_recursive_into(phis, d, byproducts, counter);
            eta += byproducts.back();
        }
    }
    return eta;
}

/// Reference tensor-product spline evaluation: the row-wise Kronecker
/// product of the marginal basis rows dotted with `beta`.
///
/// `beta` is laid out row-major over (M_1, ..., M_|J|), the last feature's
/// basis index varying fastest. Limited to small problems.
inline double naive_tps_oracle(std::span<const std::span<const double>> rows, std::span<const double> beta)
{
    const std::size_t k = rows.size();
    detail::require(k >= 1, "naive oracle needs at least one feature");
    std::size_t total = 1;
    for (const auto& r : rows) total *= r.size();
    if (k > 4 || total > 10000) {
        throw InvalidArgument("naive oracle too large: " + std::to_string(k) + " features, " +
                              std::to_string(total) + " coefficients");
    }
    detail::require(beta.size() == total, "naive oracle: coefficient count mismatch");

    std::vector<std::size_t> idx(k, 0);
    double acc = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        double prod = beta[flat];
        for (std::size_t t = 0; t < k; ++t) prod *= rows[t][idx[t]];
        acc += prod;
        for (std::size_t t = k; t-- > 0;) {
            if (++idx[t] < rows[t].size()) break;
            idx[t] = 0;
        }
    }
    return acc;
}

/// phi values and recursion by-products for every observation and factor.
///
/// For degree d: phi[(i * F + f) * p + j] and ahot[(i * F + f) * (d + 1) + k].
struct PhiCache {
    struct Degree {
        int degree = 2;
        std::size_t num_factors = 0;
        std::vector<double> phi;
        std::vector<double> ahot;
    };
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<Degree> degrees;

    std::span<const double> phis(std::size_t deg_slot, std::size_t i, std::size_t f) const
    {
        const auto& dc = degrees[deg_slot];
        return {dc.phi.data() + (i * dc.num_factors + f) * p, p};
    }
    std::span<const double> ahots(std::size_t deg_slot, std::size_t i, std::size_t f) const
    {
        const auto& dc = degrees[deg_slot];
        const auto w = static_cast<std::size_t>(dc.degree) + 1;
        return {dc.ahot.data() + (i * dc.num_factors + f) * w, w};
    }
};

/// Row views of one observation across all per-feature design matrices.
inline std::vector<std::span<const double>> basis_rows(std::span<const DesignMatrix> designs, std::size_t i)
{
    std::vector<std::span<const double>> rows(designs.size());
    for (std::size_t j = 0; j < designs.size(); ++j) {
        const auto& b = designs[j];
        rows[j] = {b.data() + static_cast<std::size_t>(b.cols()) * i, static_cast<std::size_t>(b.cols())};
    }
    return rows;
}

inline void refresh_observation(PhiCache& cache, std::span<const DesignMatrix> designs,
                                std::span<const FactorTensor> factors, std::size_t i)
{
    const auto rows = basis_rows(designs, i);
    for (std::size_t s = 0; s < factors.size(); ++s) {
        const FactorTensor& g = factors[s];
        auto& dc = cache.degrees[s];
        const auto w = static_cast<std::size_t>(dc.degree) + 1;
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            double* ph = dc.phi.data() + (i * dc.num_factors + f) * cache.p;
            for (std::size_t j = 0; j < cache.p; ++j) ph[j] = phi(rows[j], g.fiber(j, f));
            ahot_recursive_into({ph, cache.p}, dc.degree,
                                {dc.ahot.data() + (i * dc.num_factors + f) * w, w});
        }
    }
}

inline PhiCache build_phi_cache(std::span<const DesignMatrix> designs, std::span<const FactorTensor> factors)
{
    PhiCache cache;
    cache.p = designs.size();
    cache.n = designs.empty() ? 0 : static_cast<std::size_t>(designs[0].rows());
    for (const FactorTensor& g : factors) {
        PhiCache::Degree dc;
        dc.degree = g.degree();
        dc.num_factors = g.num_factors();
        dc.phi.assign(cache.n * dc.num_factors * cache.p, 0.0);
        dc.ahot.assign(cache.n * dc.num_factors * (static_cast<std::size_t>(dc.degree) + 1), 0.0);
        cache.degrees.push_back(std::move(dc));
    }
    for (std::size_t i = 0; i < cache.n; ++i) refresh_observation(cache, designs, factors, i);
    return cache;
}

/// Predictor for every row of the design matrices.
inline Eigen::VectorXd predict_eta(std::span<const DesignMatrix> designs, const MainEffects& main,
                                   std::span<const FactorTensor> factors)
{
    const auto n = designs.empty() ? Eigen::Index{0} : designs[0].rows();
    Eigen::VectorXd eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto rows = basis_rows(designs, static_cast<std::size_t>(i));
        eta(i) = predictor(rows, main, factors);
    }
    return eta;
}

} // namespace ahofm
