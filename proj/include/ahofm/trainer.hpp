#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <ahofm/basis.hpp>
#include <ahofm/error.hpp>
#include <ahofm/factor.hpp>
#include <ahofm/smoothing.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ahofm {

enum class LossKind { squared_error, logistic };
enum class OptimizerKind { sgd, bcd };

/// All trainable coefficients. Gradients use the same shape.
struct Coefficients {
    MainEffects main;
    std::vector<FactorTensor> factors; ///< factors[d - 2] holds degree d

    Coefficients() = default;
    Coefficients(std::size_t num_basis, std::size_t num_features, std::span<const std::size_t> factors_per_degree)
        : main(num_basis, num_features)
    {
        for (std::size_t s = 0; s < factors_per_degree.size(); ++s) {
            factors.emplace_back(static_cast<int>(s) + 2, num_basis, num_features, factors_per_degree[s]);
        }
    }

    int max_degree() const { return static_cast<int>(factors.size()) + 1; }
    std::size_t num_features() const { return static_cast<std::size_t>(main.betas.cols()); }
    std::size_t num_basis() const { return static_cast<std::size_t>(main.betas.rows()); }

    /// Contiguous parameter blocks: intercept, betas, one per factor tensor.
    std::vector<std::span<double>> blocks()
    {
        std::vector<std::span<double>> out;
        out.emplace_back(&main.alpha0, 1);
        out.emplace_back(main.betas.data(), static_cast<std::size_t>(main.betas.size()));
        for (auto& g : factors) out.emplace_back(g.values());
        return out;
    }

    std::size_t num_parameters() const
    {
        std::size_t n = 1 + static_cast<std::size_t>(main.betas.size());
        for (const auto& g : factors) n += g.size();
        return n;
    }

    void set_zero()
    {
        for (auto b : blocks()) std::fill(b.begin(), b.end(), 0.0);
    }
};

/// The penalized problem: data, penalties and smoothing parameters.
///
/// `designs[j]` doubles as the cache of d phi_{j,f} / d gamma_{j,f}, which
/// is the basis row itself.
struct Objective {
    LossKind loss = LossKind::squared_error;
    SmoothingPlan plan;
    std::vector<DesignMatrix> designs;
    std::vector<PenaltyMatrix> penalties;
    Eigen::VectorXd y;

    std::size_t n() const { return static_cast<std::size_t>(y.size()); }
    std::size_t p() const { return designs.size(); }
};

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::sgd;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_epochs = 1000;
    double validation_fraction = 0.10;
    int patience = 50;
    /// When false, SGD trains on all rows for exactly max_epochs.
    bool early_stopping = true;
    std::uint64_t seed = 42;
    double init_scale = 0.01;
    int bcd_max_sweeps = 200;
    double bcd_tolerance = 1e-8;

    void validate() const
    {
        detail::require(batch_size >= 1, "batch_size must be >= 1");
        detail::require(validation_fraction > 0.0 && validation_fraction < 1.0,
                        "validation_fraction must lie in (0, 1)");
        detail::require(max_epochs >= 1, "max_epochs must be >= 1");
        detail::require(patience >= 1, "patience must be >= 1");
        detail::require(learning_rate > 0.0, "learning_rate must be positive");
        detail::require(init_scale >= 0.0, "init_scale must be nonnegative");
    }
};

struct HistoryRow {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double objective = 0.0;
};

struct TrainState {
    Coefficients coef;
    PhiCache cache;
    Eigen::VectorXd eta;
};

struct TrainResult {
    Coefficients coef;
    std::vector<HistoryRow> history;
    int epochs_run = 0;
    int best_epoch = 0;
    double best_validation_loss = std::numeric_limits<double>::quiet_NaN();
    /// BCD only: objective after every block update, starting value first.
    std::vector<double> block_objectives;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace detail {

inline double softplus(double z)
{
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Logistic labels may be given as {0, 1} or {-1, +1}.
inline double signed_label(double y) { return y > 0.0 ? 1.0 : -1.0; }

} // namespace detail

inline double loss_value(LossKind kind, double y, double eta)
{
    if (kind == LossKind::squared_error) {
        const double r = y - eta;
        return r * r;
    }
    return detail::softplus(-detail::signed_label(y) * eta);
}

/// d loss / d eta.
inline double loss_derivative(LossKind kind, double y, double eta)
{
    if (kind == LossKind::squared_error) return -2.0 * (y - eta);
    const double s = detail::signed_label(y);
    return -s * detail::sigmoid(-s * eta);
}

/// Response function h: identity or logistic sigmoid.
inline double response(LossKind kind, double eta)
{
    return kind == LossKind::squared_error ? eta : detail::sigmoid(eta);
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

inline double quadratic_form(const PenaltyMatrix& p, std::span<const double> v)
{
    const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
    return x.dot(p.matrix * x);
}

/// sum_j lambda_j beta_j^T P_j beta_j + sum_{d,f,j} lambda_{j}^(d) gamma^T P_j gamma.
inline double penalty_value(const Coefficients& coef, const SmoothingPlan& plan,
                            std::span<const PenaltyMatrix> penalties)
{
    const std::size_t p = coef.num_features();
    const auto m = coef.num_basis();
    detail::require(penalties.size() == p, "one penalty per feature required");
    detail::require(plan.max_degree() >= coef.max_degree(), "smoothing plan does not cover all degrees");
    double total = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        const double lam = plan.lambda(1, j);
        if (lam != 0.0) {
            total += lam * quadratic_form(penalties[j], {coef.main.betas.col(static_cast<Eigen::Index>(j)).data(), m});
        }
    }
    for (const FactorTensor& g : coef.factors) {
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            for (std::size_t j = 0; j < p; ++j) {
                const double lam = plan.lambda(g.degree(), j);
                if (lam != 0.0) total += lam * quadratic_form(penalties[j], g.fiber(j, f));
            }
        }
    }
    return total;
}

inline double loss_sum(LossKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& eta)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!std::isfinite(eta(i))) {
            throw NumericError("non-finite predictor at observation " + std::to_string(i));
        }
        total += loss_value(kind, y(i), eta(i));
    }
    return total;
}

/// sum_i loss(y_i, eta_i) + penalty / 2.
inline double objective_value(const Coefficients& coef, const Objective& obj)
{
    const Eigen::VectorXd eta = predict_eta(obj.designs, coef.main, coef.factors);
    return loss_sum(obj.loss, obj.y, eta) + 0.5 * penalty_value(coef, obj.plan, obj.penalties);
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// d phi_{j,f}(x) / d gamma_{j,f}: the basis row.
inline Eigen::VectorXd grad_phi(std::span<const double> design_row)
{
    return Eigen::Map<const Eigen::VectorXd>(design_row.data(), static_cast<Eigen::Index>(design_row.size()));
}

/// d Phi_f^(d)(x) / d gamma_{j,f}^(d) = (d Phi^(d) / d phi_j) * B_j(x).
inline Eigen::VectorXd grad_ahot(std::span<const double> phis, std::span<const double> byproducts,
                                 std::span<const double> design_row, std::size_t j, int d)
{
    return ahot_partial(phis, byproducts, j, d) * grad_phi(design_row);
}

/// Gradient of the objective restricted to `batch`.
///
/// The penalty gradient lambda P gamma is scaled by `penalty_fraction`
/// (1 / batches-per-epoch for minibatches) so that one pass over all
/// batches accumulates the exact full gradient.
inline Coefficients full_gradient(const Coefficients& coef, const Objective& obj,
                                  std::span<const std::size_t> batch, double penalty_fraction = 1.0)
{
    detail::require(!batch.empty(), "minibatch must be nonempty");
    const std::size_t p = coef.num_features();
    const std::size_t m = coef.num_basis();

    Coefficients grad = coef;
    grad.set_zero();

    // Per-observation scratch: phi values and by-products for every
    // (degree, factor) slot, laid out consecutively.
    std::vector<std::size_t> phi_off;
    std::vector<std::size_t> ahot_off;
    std::size_t phi_len = 0;
    std::size_t ahot_len = 0;
    for (const FactorTensor& g : coef.factors) {
        phi_off.push_back(phi_len);
        ahot_off.push_back(ahot_len);
        phi_len += g.num_factors() * p;
        ahot_len += g.num_factors() * (static_cast<std::size_t>(g.degree()) + 1);
    }
    std::vector<double> phi_buf(phi_len);
    std::vector<double> ahot_buf(ahot_len);
    double sums[32];

    for (std::size_t i : batch) {
        const auto rows = basis_rows(obj.designs, i);

        double eta = coef.main.alpha0;
        for (std::size_t j = 0; j < p; ++j) {
            eta += phi(rows[j], {coef.main.betas.col(static_cast<Eigen::Index>(j)).data(), m});
        }
        for (std::size_t s = 0; s < coef.factors.size(); ++s) {
            const FactorTensor& g = coef.factors[s];
            const auto w = static_cast<std::size_t>(g.degree()) + 1;
            for (std::size_t f = 0; f < g.num_factors(); ++f) {
                double* ph = phi_buf.data() + phi_off[s] + f * p;
                double* ah = ahot_buf.data() + ahot_off[s] + f * w;
                for (std::size_t j = 0; j < p; ++j) ph[j] = phi(rows[j], g.fiber(j, f));
                ahot_recursive_into({ph, p}, g.degree(), {ah, w});
                eta += ah[w - 1];
            }
        }
        if (!std::isfinite(eta)) throw NumericError("non-finite predictor at observation " + std::to_string(i));
        const double dl = loss_derivative(obj.loss, obj.y(static_cast<Eigen::Index>(i)), eta);

        grad.main.alpha0 += dl;
        for (std::size_t j = 0; j < p; ++j) {
            double* gb = grad.main.betas.col(static_cast<Eigen::Index>(j)).data();
            for (std::size_t k = 0; k < m; ++k) gb[k] += dl * rows[j][k];
        }
        for (std::size_t s = 0; s < coef.factors.size(); ++s) {
            FactorTensor& gg = grad.factors[s];
            const auto d = static_cast<std::size_t>(gg.degree());
            if (d > p) continue;
            for (std::size_t f = 0; f < gg.num_factors(); ++f) {
                const double* ph = phi_buf.data() + phi_off[s] + f * p;
                const std::span<const double> ah(ahot_buf.data() + ahot_off[s] + f * (d + 1), d + 1);
                detail::power_sums_into({ph, p}, d, sums);
                for (std::size_t j = 0; j < p; ++j) {
                    const double w = dl * detail::ahot_partial_from_sums(sums, ah, ph[j], d);
                    auto fib = gg.fiber(j, f);
                    for (std::size_t k = 0; k < m; ++k) fib[k] += w * rows[j][k];
                }
            }
        }
    }

    // Penalty part: d/dtheta of (1/2) lambda theta^T P theta = lambda P theta.
    for (std::size_t j = 0; j < p; ++j) {
        const double lam = obj.plan.lambda(1, j) * penalty_fraction;
        if (lam == 0.0) continue;
        const auto col = static_cast<Eigen::Index>(j);
        grad.main.betas.col(col) += lam * (obj.penalties[j].matrix * coef.main.betas.col(col));
    }
    for (std::size_t s = 0; s < coef.factors.size(); ++s) {
        const FactorTensor& g = coef.factors[s];
        FactorTensor& gg = grad.factors[s];
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            for (std::size_t j = 0; j < p; ++j) {
                const double lam = obj.plan.lambda(g.degree(), j) * penalty_fraction;
                if (lam == 0.0) continue;
                const auto src = g.fiber(j, f);
                Eigen::Map<const Eigen::VectorXd> x(src.data(), static_cast<Eigen::Index>(m));
                auto dst = gg.fiber(j, f);
                Eigen::Map<Eigen::VectorXd> out(dst.data(), static_cast<Eigen::Index>(m));
                out += lam * (obj.penalties[j].matrix * x);
            }
        }
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Random latent factors, zero betas, intercept at the response's base level.
inline TrainState init(const Objective& obj, std::span<const std::size_t> factors_per_degree,
                       const TrainConfig& config)
{
    detail::require(obj.p() >= 1, "at least one feature required");
    detail::require(obj.n() >= 1, "at least one observation required");
    detail::require(obj.plan.max_degree() >= static_cast<int>(factors_per_degree.size()) + 1,
                    "smoothing plan must be built before initialization");
    const auto m = static_cast<std::size_t>(obj.designs[0].cols());

    TrainState st;
    st.coef = Coefficients(m, obj.p(), factors_per_degree);

    if (obj.loss == LossKind::squared_error) {
        st.coef.main.alpha0 = obj.y.mean();
    } else {
        double positives = 0.0;
        for (Eigen::Index i = 0; i < obj.y.size(); ++i) positives += obj.y(i) > 0.0 ? 1.0 : 0.0;
        const double rate = std::clamp(positives / static_cast<double>(obj.y.size()), 1e-6, 1.0 - 1e-6);
        st.coef.main.alpha0 = std::log(rate / (1.0 - rate));
    }

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (FactorTensor& g : st.coef.factors) {
        for (double& v : g.values()) v = config.init_scale * normal(rng);
    }

    st.cache = build_phi_cache(obj.designs, st.coef.factors);
    st.eta = predict_eta(obj.designs, st.coef.main, st.coef.factors);
    return st;
}

// ---------------------------------------------------------------------------
// Minibatch adaptive-moment descent
// ---------------------------------------------------------------------------

namespace detail {

inline double mean_loss(const Objective& obj, const Coefficients& coef, std::span<const std::size_t> rows)
{
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (std::size_t i : rows) {
        const auto r = basis_rows(obj.designs, i);
        const double eta = predictor(r, coef.main, coef.factors);
        if (!std::isfinite(eta)) return std::numeric_limits<double>::infinity();
        total += loss_value(obj.loss, obj.y(static_cast<Eigen::Index>(i)), eta);
    }
    return total / static_cast<double>(rows.size());
}

// Objective restricted to `rows` (the data the optimizer actually sees).
inline double objective_on(const Objective& obj, const Coefficients& coef, std::span<const std::size_t> rows)
{
    return mean_loss(obj, coef, rows) * static_cast<double>(rows.size()) +
           0.5 * penalty_value(coef, obj.plan, obj.penalties);
}

} // namespace detail

inline TrainResult fit_sgd(const Objective& obj, TrainState state, const TrainConfig& config)
{
    config.validate();
    const std::size_t n = obj.n();
    detail::require(n >= 2, "need at least two observations");

    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
    if (config.early_stopping) {
        auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
        train_rows.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
        val_rows.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    } else {
        train_rows.resize(n);
        std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
    }

    const std::size_t bs = std::min(config.batch_size, train_rows.size());
    const std::size_t batches = (train_rows.size() + bs - 1) / bs;
    const double penalty_fraction = 1.0 / static_cast<double>(batches);

    Coefficients& coef = state.coef;
    auto param_blocks = coef.blocks();
    std::vector<std::vector<double>> m1;
    std::vector<std::vector<double>> m2;
    for (auto b : param_blocks) {
        m1.emplace_back(b.size(), 0.0);
        m2.emplace_back(b.size(), 0.0);
    }
    std::uint64_t step = 0;

    TrainResult result;
    result.coef = coef;
    double best = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(train_rows.begin(), train_rows.end(), rng);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * bs;
            const std::size_t hi = std::min(lo + bs, train_rows.size());
            std::span<const std::size_t> batch(train_rows.data() + lo, hi - lo);
            Coefficients grad;
            try {
                grad = full_gradient(coef, obj, batch, penalty_fraction);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            }
            auto grad_blocks = grad.blocks();

            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < param_blocks.size(); ++k) {
                auto& a = m1[k];
                auto& v = m2[k];
                auto x = param_blocks[k];
                auto g = grad_blocks[k];
                for (std::size_t t = 0; t < x.size(); ++t) {
                    a[t] = config.beta1 * a[t] + (1.0 - config.beta1) * g[t];
                    v[t] = config.beta2 * v[t] + (1.0 - config.beta2) * g[t] * g[t];
                    x[t] -= config.learning_rate * (a[t] / c1) / (std::sqrt(v[t] / c2) + config.epsilon);
                }
            }
        }

        HistoryRow row;
        row.epoch = epoch;
        row.train_loss = detail::mean_loss(obj, coef, train_rows);
        row.validation_loss = config.early_stopping ? detail::mean_loss(obj, coef, val_rows) : row.train_loss;
        row.objective = row.train_loss * static_cast<double>(train_rows.size()) +
                        0.5 * penalty_value(coef, obj.plan, obj.penalties);
        if (!std::isfinite(row.train_loss) || !std::isfinite(row.objective)) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch));
        }
        result.history.push_back(row);
        result.epochs_run = epoch;

        if (!config.early_stopping) {
            result.best_epoch = epoch;
            result.best_validation_loss = row.validation_loss;
            continue;
        }
        if (row.validation_loss < best) {
            best = row.validation_loss;
            result.best_epoch = epoch;
            result.best_validation_loss = best;
            result.coef = coef;
        } else if (epoch - result.best_epoch >= config.patience) {
            break;
        }
    }
    if (!config.early_stopping) result.coef = coef;
    return result;
}

// ---------------------------------------------------------------------------
// Block coordinate descent
// ---------------------------------------------------------------------------

namespace detail {

// Solves H delta = -g for a symmetric PSD block Hessian, adding a ridge
// when the factorization fails.
inline Eigen::VectorXd newton_step(Eigen::MatrixXd hess, const Eigen::VectorXd& grad, bool& ridged)
{
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    auto bad = [&] {
        if (llt.info() != Eigen::Success) return true;
        const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
        return !(diag.minCoeff() > 1e-7 * std::sqrt(std::max(hess.diagonal().maxCoeff(), 1e-300)));
    };
    if (bad()) {
        const double ridge = 1e-8 * std::max(hess.trace() / static_cast<double>(hess.rows()), 1e-12);
        hess.diagonal().array() += ridge;
        llt.compute(hess);
        ridged = true;
        if (llt.info() != Eigen::Success) throw NumericError("BCD: block Hessian is singular");
    }
    return -llt.solve(grad);
}

} // namespace detail

/// Cycles exact Newton updates over the main effects (one block) and each
/// latent fiber gamma_{j,f}^(d). Squared-error loss only.
///
/// After a fiber update the predictor is synchronized through
/// multi-linearity: eta_i changes by (d Phi / d phi_j) * B_j(x_i)^T delta.
inline TrainResult fit_bcd(const Objective& obj, TrainState state, const TrainConfig& config)
{
    if (obj.loss != LossKind::squared_error) {
        throw InvalidArgument("block coordinate descent supports squared-error loss only");
    }
    const std::size_t n = obj.n();
    const std::size_t p = obj.p();
    Coefficients& coef = state.coef;
    const std::size_t m = coef.num_basis();
    const auto mi = static_cast<Eigen::Index>(m);
    Eigen::VectorXd& eta = state.eta;

    TrainResult result;
    bool ridged = false;

    double loss = loss_sum(obj.loss, obj.y, eta);
    double pen = penalty_value(coef, obj.plan, obj.penalties);
    double current = loss + 0.5 * pen;
    result.block_objectives.push_back(current);

    auto record = [&](double pen_delta) {
        loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = obj.y(static_cast<Eigen::Index>(i)) - eta(static_cast<Eigen::Index>(i));
            loss += r * r;
        }
        pen += pen_delta;
        current = loss + 0.5 * pen;
        result.block_objectives.push_back(current);
    };

    // Design and penalty of the joint (alpha0, beta_1..beta_p) block.
    const auto main_dim = static_cast<Eigen::Index>(1 + p * m);
    Eigen::MatrixXd main_x(static_cast<Eigen::Index>(n), main_dim);
    Eigen::MatrixXd main_pen = Eigen::MatrixXd::Zero(main_dim, main_dim);
    main_x.col(0).setOnes();
    for (std::size_t j = 0; j < p; ++j) {
        const auto off = static_cast<Eigen::Index>(1 + j * m);
        main_x.middleCols(off, mi) = obj.designs[j];
        main_pen.block(off, off, mi, mi) = obj.plan.lambda(1, j) * obj.penalties[j].matrix;
    }
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> main_solver(
        2.0 * (main_x.transpose() * main_x) + main_pen);

    Eigen::VectorXd zeta(static_cast<Eigen::Index>(n));
    double sums[32];

    for (int sweep = 1; sweep <= config.bcd_max_sweeps; ++sweep) {
        const double start = current;

        // Intercept and univariate terms as one closed-form block. The
        // intercept is collinear with every B_j (partition of unity), so the
        // minimum-norm solution of the singular system is used.
        {
            const Eigen::VectorXd resid = obj.y - eta;
            Eigen::VectorXd theta(main_dim);
            theta(0) = coef.main.alpha0;
            theta.tail(main_dim - 1) = Eigen::Map<const Eigen::VectorXd>(coef.main.betas.data(), main_dim - 1);
            Eigen::VectorXd grad = -2.0 * (main_x.transpose() * resid) + main_pen * theta;
            const Eigen::VectorXd delta = -main_solver.solve(grad);
            const double old_pen = theta.dot(main_pen * theta);
            theta += delta;
            coef.main.alpha0 = theta(0);
            Eigen::Map<Eigen::VectorXd>(coef.main.betas.data(), main_dim - 1) = theta.tail(main_dim - 1);
            eta += main_x * delta;
            record(theta.dot(main_pen * theta) - old_pen);
        }

        // Latent fibers.
        for (std::size_t s = 0; s < coef.factors.size(); ++s) {
            FactorTensor& g = coef.factors[s];
            const int d = g.degree();
            const auto du = static_cast<std::size_t>(d);
            auto& dc = state.cache.degrees[s];
            for (std::size_t f = 0; f < g.num_factors(); ++f) {
                for (std::size_t j = 0; j < p; ++j) {
                    const DesignMatrix& b = obj.designs[j];
                    const double lam = obj.plan.lambda(d, j);
                    const Eigen::MatrixXd& pm = obj.penalties[j].matrix;

                    for (std::size_t i = 0; i < n; ++i) {
                        const auto ph = state.cache.phis(s, i, f);
                        const auto ah = state.cache.ahots(s, i, f);
                        if (du > p) {
                            zeta(static_cast<Eigen::Index>(i)) = 0.0;
                            continue;
                        }
                        detail::power_sums_into(ph, du, sums);
                        zeta(static_cast<Eigen::Index>(i)) = detail::ahot_partial_from_sums(sums, ah, ph[j], du);
                    }

                    // eta is affine in this fiber: eta_i = c_i + zeta_i B_i^T gamma.
                    const Eigen::MatrixXd bz = zeta.asDiagonal() * b;
                    const Eigen::VectorXd resid = obj.y - eta;
                    auto fib = g.fiber(j, f);
                    Eigen::Map<Eigen::VectorXd> gamma(fib.data(), mi);
                    const Eigen::VectorXd old = gamma;
                    const Eigen::MatrixXd hess = 2.0 * (bz.transpose() * bz) + lam * pm;
                    const Eigen::VectorXd grad = -2.0 * (bz.transpose() * resid) + lam * (pm * old);
                    const Eigen::VectorXd delta = detail::newton_step(hess, grad, ridged);
                    gamma += delta;
                    eta += bz * delta;

                    // Refresh phi_j and the recursion by-products for (d, f).
                    const Eigen::VectorXd dphi = b * delta;
                    const auto w = du + 1;
                    for (std::size_t i = 0; i < n; ++i) {
                        double* ph = dc.phi.data() + (i * dc.num_factors + f) * p;
                        ph[j] += dphi(static_cast<Eigen::Index>(i));
                        ahot_recursive_into({ph, p}, d, {dc.ahot.data() + (i * dc.num_factors + f) * w, w});
                    }
                    const Eigen::VectorXd now = gamma;
                    record(lam * (now.dot(pm * now) - old.dot(pm * old)));
                }
            }
        }

        result.history.push_back({sweep, loss / static_cast<double>(n), loss / static_cast<double>(n), current});
        result.epochs_run = sweep;
        if (!std::isfinite(current)) throw NumericError("BCD diverged at sweep " + std::to_string(sweep));
        const double rel = (start - current) / std::max(std::abs(start), 1e-300);
        if (rel < config.bcd_tolerance) break;
    }

    if (ridged) result.warnings.push_back("BCD: ridge added to a singular block Hessian");
    result.best_epoch = result.epochs_run;
    result.best_validation_loss = loss / static_cast<double>(n);
    result.coef = coef;
    return result;
}

} // namespace ahofm
