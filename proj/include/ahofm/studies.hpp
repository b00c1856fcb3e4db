#pragma once

#include <Eigen/Core>

#include <ahofm/data.hpp>
#include <ahofm/error.hpp>
#include <ahofm/model.hpp>
#include <ahofm/simulate.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace ahofm {

inline double median(std::vector<double> v)
{
    detail::require(!v.empty(), "median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------------------
// Scaling benchmark
// ---------------------------------------------------------------------------

/// Stored basis evaluations plus latent coefficients: n p M + sum_d p M F_d.
inline std::uint64_t memory_count(std::size_t n, std::size_t p, std::size_t basis_dim,
                                  const std::vector<std::size_t>& factors)
{
    std::uint64_t total = static_cast<std::uint64_t>(n) * p * basis_dim;
    for (std::size_t f : factors) total += static_cast<std::uint64_t>(p) * basis_dim * f;
    return total;
}

/// Entries a naive all-pairs tensor-product model stores: n C(p,2) M^2.
inline std::uint64_t naive_pairwise_memory_count(std::size_t n, std::size_t p, std::size_t basis_dim)
{
    return static_cast<std::uint64_t>(n) * (p * (p - 1) / 2) * basis_dim * basis_dim;
}

struct ScalingRow {
    std::size_t p = 0;
    std::size_t n = 0;
    std::vector<double> seconds;
    double median_seconds = 0.0;
    std::uint64_t memory = 0;
    std::uint64_t naive_memory = 0;
};

/// Times all-pairs fits with a fixed epoch budget. Data generation is not
/// timed; basis construction and design evaluation are.
inline std::vector<ScalingRow> benchmark_scaling(const std::vector<std::size_t>& p_list,
                                                 const std::vector<std::size_t>& n_list, std::size_t repetitions,
                                                 ModelConfig model, TrainConfig train, std::uint64_t seed = 1)
{
    detail::require(!p_list.empty() && !n_list.empty(), "benchmark needs nonempty p and n lists");
    detail::require(repetitions >= 1, "benchmark needs at least one repetition");
    model.degree = 2;
    model.normalize();
    train.early_stopping = false;

    std::vector<ScalingRow> rows;
    for (std::size_t n : n_list) {
        for (std::size_t p : p_list) {
            SimSpec spec;
            spec.n = n;
            spec.p = p;
            spec.seed = seed;
            const SimulatedData sim = simulate(spec);
            ScalingRow row;
            row.p = p;
            row.n = n;
            row.memory = memory_count(n, p, model.basis_dim, model.factors);
            row.naive_memory = naive_pairwise_memory_count(n, p, model.basis_dim);
            for (std::size_t r = 0; r < repetitions; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const FittedModel fitted = fit(sim.data, model, train);
                const auto t1 = std::chrono::steady_clock::now();
                (void)fitted;
                row.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
            }
            row.median_seconds = median(row.seconds);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Estimation study
// ---------------------------------------------------------------------------

/// Subtracts row and column means (uniform weights over the grid), leaving
/// the pure interaction part of a bivariate surface.
inline std::vector<double> double_center(const std::vector<double>& v, std::size_t rows, std::size_t cols)
{
    std::vector<double> rmean(rows, 0.0);
    std::vector<double> cmean(cols, 0.0);
    double grand = 0.0;
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            const double x = v[a * cols + b];
            rmean[a] += x / static_cast<double>(cols);
            cmean[b] += x / static_cast<double>(rows);
            grand += x;
        }
    }
    grand /= static_cast<double>(rows * cols);
    std::vector<double> out(v.size());
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) out[a * cols + b] = v[a * cols + b] - rmean[a] - cmean[b] + grand;
    }
    return out;
}

struct StudyConfig {
    SimSpec sim;
    std::vector<std::size_t> factor_list{1, 5, 15};
    std::size_t replications = 5;
    std::size_t grid_resolution = 20;
    /// The common grid spans the [q, 1 - q] quantiles of N(0, 1).
    double grid_quantile = 0.05;
    ModelConfig model;
    TrainConfig train;
};

struct StudyRow {
    std::size_t replication = 0;
    std::uint64_t seed = 0;
    std::size_t factors = 0;
    std::size_t feature_a = 0;
    std::size_t feature_b = 0;
    double mse = 0.0;
    double truth_variance = 0.0;
};

struct StudyResult {
    std::vector<StudyRow> rows;
    std::vector<std::size_t> factor_list;
    std::vector<double> median_mse; ///< parallel to factor_list
    std::string metadata;
};

/// Fits an all-pairs model per (replication, F) and scores every estimated
/// pair surface against the true one on a common grid.
///
/// Both surfaces are double-centered before comparison: without centering
/// constraints only the pure interaction part of a pair term is identified.
inline StudyResult run_estimation_study(const StudyConfig& cfg)
{
    detail::require(cfg.sim.interaction_degree == 2, "the estimation study uses pairwise interactions");
    detail::require(!cfg.factor_list.empty(), "factor list must be nonempty");
    detail::require(cfg.replications >= 1, "at least one replication required");
    detail::require(cfg.grid_resolution >= 2, "grid resolution must be >= 2");
    detail::require(cfg.grid_quantile > 0.0 && cfg.grid_quantile < 0.5, "grid quantile must lie in (0, 0.5)");

    // Inverse normal CDF via bisection on erfc.
    auto norm_quantile = [](double q) {
        double a = -10.0;
        double b = 10.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (0.5 * std::erfc(-mid / std::sqrt(2.0)) < q ? a : b) = mid;
        }
        return 0.5 * (a + b);
    };
    const double edge = -norm_quantile(cfg.grid_quantile);
    std::vector<double> grid(cfg.grid_resolution);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        grid[k] = -edge + 2.0 * edge * static_cast<double>(k) / static_cast<double>(grid.size() - 1);
    }
    const std::size_t g = grid.size();

    StudyResult out;
    out.factor_list = cfg.factor_list;
    std::vector<std::vector<double>> per_factor(cfg.factor_list.size());

    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        SimSpec spec = cfg.sim;
        spec.seed = cfg.sim.seed + rep;
        const SimulatedData sim = simulate(spec);
        if (rep == 0) out.metadata = sim.describe();

        // True pure-interaction surfaces on the grid.
        std::vector<std::vector<double>> truth;
        for (std::size_t s = 0; s < sim.surfaces.size(); ++s) {
            std::vector<double> vals(g * g);
            for (std::size_t a = 0; a < g; ++a) {
                for (std::size_t b = 0; b < g; ++b) {
                    const double pt[2] = {grid[a], grid[b]};
                    vals[a * g + b] = sim.evaluate(s, pt);
                }
            }
            truth.push_back(double_center(vals, g, g));
        }

        for (std::size_t fi = 0; fi < cfg.factor_list.size(); ++fi) {
            ModelConfig mc = cfg.model;
            mc.degree = 2;
            mc.factors = {cfg.factor_list[fi]};
            TrainConfig tc = cfg.train;
            tc.seed = cfg.train.seed + rep;
            const FittedModel model = fit(sim.data, mc, tc);

            for (std::size_t s = 0; s < sim.surfaces.size(); ++s) {
                const auto& feats = sim.surfaces[s].features;
                const EffectSurface est = effect_surface(model, feats, {grid, grid});
                const auto centered = double_center(est.values, g, g);
                double mse = 0.0;
                double tvar = 0.0;
                for (std::size_t k = 0; k < g * g; ++k) {
                    const double diff = centered[k] - truth[s][k];
                    mse += diff * diff;
                    tvar += truth[s][k] * truth[s][k];
                }
                mse /= static_cast<double>(g * g);
                tvar /= static_cast<double>(g * g);
                out.rows.push_back({rep, spec.seed, cfg.factor_list[fi], feats[0], feats[1], mse, tvar});
                per_factor[fi].push_back(mse);
            }
        }
    }
    for (const auto& v : per_factor) out.median_mse.push_back(median(v));
    out.metadata += "; surfaces double-centered on a " + std::to_string(g) + "x" + std::to_string(g) +
                    " grid over [" + format_double(-edge) + ", " + format_double(edge) + "]";
    return out;
}

// ---------------------------------------------------------------------------
// Interaction gain on held-out data
// ---------------------------------------------------------------------------

struct SplitComparison {
    std::size_t split = 0;
    double mse_additive = 0.0;    ///< degree-1 model
    double mse_interaction = 0.0; ///< configured model
    double reduction = 0.0;       ///< 1 - mse_interaction / mse_additive
};

/// Test MSE of `model` against the same configuration without interactions
/// over seeded random train/test splits.
inline std::vector<SplitComparison> compare_interactions(const Dataset& data, std::size_t splits,
                                                         std::uint64_t seed, double test_fraction,
                                                         const ModelConfig& model, const TrainConfig& train)
{
    detail::require(data.p() >= 2, "interaction comparison needs at least two features");
    detail::require(splits >= 1, "at least one split required");
    detail::require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
    const std::size_t n = data.n();
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n))), 1, n - 1);

    std::vector<SplitComparison> out;
    for (std::size_t s = 0; s < splits; ++s) {
        std::mt19937_64 rng(seed + s);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
        const std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
        const Dataset tr = data.subset(rest);
        const Dataset te = data.subset(test);

        auto test_mse = [&](ModelConfig mc) {
            TrainConfig tc = train;
            tc.seed = train.seed + s;
            const FittedModel m = fit(tr, mc, tc);
            const Prediction pr = predict(m, te.x);
            return (pr.response - te.y).squaredNorm() / static_cast<double>(te.n());
        };
        ModelConfig additive = model;
        additive.degree = 1;
        SplitComparison row;
        row.split = s;
        row.mse_additive = test_mse(additive);
        row.mse_interaction = test_mse(model);
        row.reduction = 1.0 - row.mse_interaction / row.mse_additive;
        out.push_back(row);
    }
    return out;
}

} // namespace ahofm
