#pragma once

#include <Eigen/Core>

#include <ahofm/basis.hpp>
#include <ahofm/data.hpp>
#include <ahofm/error.hpp>
#include <ahofm/factor.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

/// Synthetic interaction data: standard normal features, a random
/// tensor-product spline surface for every feature subset of the chosen
/// degree, Gaussian noise calibrated to a signal-to-noise ratio.
struct SimSpec {
    std::size_t n = 2000;
    std::size_t p = 5;
    double snr = 0.5;
    std::uint64_t seed = 1;
    int interaction_degree = 2;
    std::size_t basis_dim = 10; ///< per-feature basis size of the true surfaces
    int spline_degree = 3;

    void validate() const
    {
        detail::require(snr > 0.0, "SNR must be positive");
        detail::require(interaction_degree == 2 || interaction_degree == 3, "interaction degree must be 2 or 3");
        detail::require(p >= static_cast<std::size_t>(interaction_degree), "need at least as many features as the interaction degree");
        detail::require(n >= 2, "need at least two observations");
        detail::require(basis_dim >= static_cast<std::size_t>(spline_degree) + 2, "basis_dim too small for the spline degree");
    }
};

struct TrueSurface {
    std::vector<std::size_t> features;
    std::vector<double> coefficients; ///< row-major over (M, ..., M)
};

struct SimulatedData {
    SimSpec spec;
    Dataset data;
    Eigen::VectorXd signal;
    double noise_variance = 0.0;
    std::vector<SplineBasis> bases; ///< generation bases, one per feature
    std::vector<TrueSurface> surfaces;

    /// Value of true surface `s` at one point (one coordinate per feature of the subset).
    double evaluate(std::size_t s, std::span<const double> point) const
    {
        const auto& surf = surfaces.at(s);
        detail::require(point.size() == surf.features.size(), "point dimension mismatch");
        std::vector<Eigen::VectorXd> rows;
        std::vector<std::span<const double>> views;
        rows.reserve(point.size());
        for (std::size_t a = 0; a < point.size(); ++a) {
            rows.push_back(eval_basis(bases[surf.features[a]], point[a]));
            views.emplace_back(rows.back().data(), static_cast<std::size_t>(rows.back().size()));
        }
        return naive_tps_oracle(views, surf.coefficients);
    }

    /// Generation metadata for self-describing study output.
    std::string describe() const
    {
        return "features ~ N(0,1); one cubic B-spline tensor-product surface per feature subset of size " +
               std::to_string(spec.interaction_degree) + " with " + std::to_string(spec.basis_dim) +
               " quantile-knot basis functions per feature and N(0,1) coefficients; Gaussian noise with "
               "Var(signal)/sigma^2 = " + format_double(spec.snr);
    }
};

/// All index subsets of {0..p-1} of size k, lexicographic.
inline std::vector<std::vector<std::size_t>> subsets_of_size(std::size_t p, std::size_t k)
{
    std::vector<std::vector<std::size_t>> out;
    if (k == 0 || k > p) return out;
    std::vector<std::size_t> idx(k);
    for (std::size_t t = 0; t < k; ++t) idx[t] = t;
    while (true) {
        out.push_back(idx);
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == p - k + pos - 1) --pos;
        if (pos == 0) break;
        ++idx[pos - 1];
        for (std::size_t t = pos; t < k; ++t) idx[t] = idx[t - 1] + 1;
    }
    return out;
}

inline SimulatedData simulate(const SimSpec& spec)
{
    spec.validate();
    SimulatedData sim;
    sim.spec = spec;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto p = static_cast<Eigen::Index>(spec.p);
    Dataset& ds = sim.data;
    ds.x.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) ds.x(i, j) = normal(rng);
    }
    for (std::size_t j = 0; j < spec.p; ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));
    ds.target_name = "y";

    std::vector<DesignMatrix> designs;
    for (std::size_t j = 0; j < spec.p; ++j) {
        sim.bases.push_back(build_basis(ds.column(j), spec.basis_dim, spec.spline_degree, j));
        designs.push_back(eval_design(sim.bases.back(), ds.column(j)));
    }

    const auto k = static_cast<std::size_t>(spec.interaction_degree);
    std::size_t ncoef = 1;
    for (std::size_t t = 0; t < k; ++t) ncoef *= spec.basis_dim;
    for (auto& subset : subsets_of_size(spec.p, k)) {
        TrueSurface s;
        s.features = std::move(subset);
        s.coefficients.resize(ncoef);
        for (double& c : s.coefficients) c = normal(rng);
        sim.surfaces.push_back(std::move(s));
    }

    sim.signal = Eigen::VectorXd::Zero(n);
    std::vector<std::span<const double>> views(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto rows = basis_rows(designs, static_cast<std::size_t>(i));
        double total = 0.0;
        for (const auto& s : sim.surfaces) {
            for (std::size_t t = 0; t < k; ++t) views[t] = rows[s.features[t]];
            total += naive_tps_oracle(views, s.coefficients);
        }
        sim.signal(i) = total;
    }

    const double mean = sim.signal.mean();
    const double var = (sim.signal.array() - mean).square().sum() / static_cast<double>(n);
    sim.noise_variance = var / spec.snr;
    const double sd = std::sqrt(sim.noise_variance);
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) ds.y(i) = sim.signal(i) + sd * normal(rng);
    return sim;
}

} // namespace ahofm
