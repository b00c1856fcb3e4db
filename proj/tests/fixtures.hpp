#pragma once

#include <ahofm/ahofm.hpp>

#include <random>
#include <vector>

namespace fixture {

struct Instance {
    ahofm::Objective obj;
    ahofm::TrainState state;
    std::vector<std::size_t> factors;
    Eigen::MatrixXd x;
};

/// Small random problem: standard normal features, cubic bases with
/// quantile knots, second-order penalties calibrated to `df`.
inline Instance small_instance(std::size_t n, std::size_t p, std::size_t m, int degree, std::size_t num_factors,
                               std::uint64_t seed, ahofm::LossKind loss = ahofm::LossKind::squared_error,
                               double df = 3.5, double init_scale = 0.5)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Instance inst;
    inst.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < inst.x.size(); ++k) inst.x.data()[k] = nd(rng);
    inst.obj.loss = loss;
    inst.obj.y.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < inst.obj.y.size(); ++i) {
        const double z = nd(rng) + std::sin(2.0 * inst.x(i, 0));
        inst.obj.y(i) = loss == ahofm::LossKind::squared_error ? z : (z > 0.0 ? 1.0 : 0.0);
    }
    for (std::size_t j = 0; j < p; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        std::span<const double> c(inst.x.col(col).data(), n);
        const auto b = ahofm::build_basis(c, m, 3, j);
        inst.obj.designs.push_back(ahofm::eval_design(b, c));
        inst.obj.penalties.push_back(ahofm::difference_penalty(m, 2));
    }
    inst.obj.plan = ahofm::homogeneous_smoothing(
        inst.obj.designs, inst.obj.penalties,
        ahofm::DfTargets{std::vector<double>(static_cast<std::size_t>(degree), df), {}});
    inst.factors.assign(static_cast<std::size_t>(degree - 1), num_factors);
    ahofm::TrainConfig tc;
    tc.seed = seed;
    tc.init_scale = init_scale;
    inst.state = ahofm::init(inst.obj, inst.factors, tc);
    // Nonzero univariate terms so every gradient block is exercised.
    for (Eigen::Index k = 0; k < inst.state.coef.main.betas.size(); ++k) {
        inst.state.coef.main.betas.data()[k] = 0.3 * nd(rng);
    }
    inst.state.eta = ahofm::predict_eta(inst.obj.designs, inst.state.coef.main, inst.state.coef.factors);
    inst.state.cache = ahofm::build_phi_cache(inst.obj.designs, inst.state.coef.factors);
    return inst;
}

inline std::vector<double> flatten(ahofm::Coefficients c)
{
    std::vector<double> out;
    for (auto b : c.blocks()) out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline void set_flat(ahofm::Coefficients& c, const std::vector<double>& v)
{
    std::size_t k = 0;
    for (auto b : c.blocks()) {
        for (double& x : b) x = v[k++];
    }
}

/// Max over components of |analytic - fd| / max(|fd|, 1e-3 * max|fd|).
inline double gradient_relative_error(const ahofm::Coefficients& coef, const ahofm::Objective& obj,
                                      double step = 1e-5)
{
    std::vector<std::size_t> all(obj.n());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto analytic = flatten(ahofm::full_gradient(coef, obj, all));
    const auto base = flatten(coef);
    std::vector<double> fd(base.size());
    ahofm::Coefficients work = coef;
    for (std::size_t k = 0; k < base.size(); ++k) {
        auto v = base;
        v[k] = base[k] + step;
        set_flat(work, v);
        const double fp = ahofm::objective_value(work, obj);
        v[k] = base[k] - step;
        set_flat(work, v);
        const double fm = ahofm::objective_value(work, obj);
        fd[k] = (fp - fm) / (2.0 * step);
    }
    double scale = 0.0;
    for (double v : fd) scale = std::max(scale, std::abs(v));
    double worst = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
        const double denom = std::max(std::abs(fd[k]), 1e-3 * scale);
        worst = std::max(worst, std::abs(analytic[k] - fd[k]) / denom);
    }
    return worst;
}

} // namespace fixture
