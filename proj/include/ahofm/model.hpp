#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <ahofm/basis.hpp>
#include <ahofm/data.hpp>
#include <ahofm/error.hpp>
#include <ahofm/factor.hpp>
#include <ahofm/smoothing.hpp>
#include <ahofm/trainer.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace ahofm {

/// Structure of the model: degree, latent dimensions, bases, smoothing.
struct ModelConfig {
    int degree = 2;                          ///< D; 1 means a plain additive model
    std::vector<std::size_t> factors{5};     ///< F_2..F_D (a single value is broadcast)
    std::size_t basis_dim = 10;              ///< M
    int spline_degree = 3;
    int penalty_order = 2;
    LossKind loss = LossKind::squared_error;
    std::vector<double> df{15.0};            ///< df^(1..D) (a single value is broadcast)
    std::map<std::size_t, double> df_overrides;

    /// Broadcasts single values and checks consistency.
    void normalize()
    {
        detail::require(degree >= 1, "degree must be >= 1");
        const auto nd = static_cast<std::size_t>(degree);
        if (degree == 1) {
            factors.clear();
        } else if (factors.size() == 1 && nd > 2) {
            factors.assign(nd - 1, factors.front());
        }
        detail::require(factors.size() == nd - 1, "need one factor count per interaction degree (got " +
                                                      std::to_string(factors.size()) + " for degree " +
                                                      std::to_string(degree) + ")");
        for (auto f : factors) detail::require(f >= 1, "factor counts must be >= 1");
        if (df.size() == 1 && nd > 1) df.assign(nd, df.front());
        detail::require(df.size() == nd, "need one df target per degree");
        for (double v : df) detail::require(v > 0.0, "df targets must be positive");
        detail::require(penalty_order == 1 || penalty_order == 2, "penalty order must be 1 or 2");
    }
};

struct TrainingMetadata {
    std::uint64_t seed = 0;
    std::string optimizer = "sgd";
    int epochs_run = 0;
    int best_epoch = 0;
    double best_validation_loss = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_train = 0;
};

/// Everything needed to predict and explain. Treat as immutable after fit.
///
/// No sum-to-zero constraints are imposed, so level shifts move freely
/// between the intercept, the univariate terms and the interaction terms;
/// individual effect exports are identified only up to such shifts.
struct FittedModel {
    ModelConfig config;
    std::vector<SplineBasis> bases;
    Coefficients coef;
    std::vector<double> df_targets;
    std::vector<std::vector<double>> lambdas; ///< [d - 1][j]
    std::vector<std::string> feature_names;
    std::string target_name = "y";
    TrainingMetadata training;

    std::size_t p() const { return bases.size(); }
};

struct FitReport {
    TrainResult train;
    SmoothingPlan plan;
    Eigen::VectorXd fitted_eta;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<DesignMatrix> designs_for(const std::vector<SplineBasis>& bases, const Eigen::MatrixXd& x,
                                             std::size_t* clamped = nullptr)
{
    std::vector<DesignMatrix> out;
    out.reserve(bases.size());
    std::size_t total = 0;
    for (std::size_t j = 0; j < bases.size(); ++j) {
        std::size_t c = 0;
        const auto col = static_cast<Eigen::Index>(j);
        out.push_back(eval_design(bases[j], {x.col(col).data(), static_cast<std::size_t>(x.rows())}, &c));
        total += c;
    }
    if (clamped) *clamped = total;
    return out;
}

} // namespace detail

/// Bases, homogeneous smoothing, initialization and optimization in one go.
inline FittedModel fit(const Dataset& data, ModelConfig config, const TrainConfig& train,
                       FitReport* report = nullptr)
{
    config.normalize();
    train.validate();
    const std::size_t n = data.n();
    const std::size_t p = data.p();
    detail::require(n >= 20, "at least 20 observations required (got " + std::to_string(n) + ")");
    detail::require(p >= 1, "at least one feature required");
    detail::require(static_cast<std::size_t>(data.y.size()) == n, "response length does not match feature rows");
    if (static_cast<std::size_t>(config.degree) > p) {
        throw InvalidArgument("degree exceeds feature count (" + std::to_string(config.degree) + " > " +
                              std::to_string(p) + ")");
    }
    for (Eigen::Index i = 0; i < data.y.size(); ++i) {
        if (!std::isfinite(data.y(i))) throw InvalidArgument("non-finite response at row " + std::to_string(i));
    }

    FittedModel model;
    model.config = config;
    model.feature_names = data.feature_names;
    if (model.feature_names.size() != p) {
        model.feature_names.clear();
        for (std::size_t j = 0; j < p; ++j) model.feature_names.push_back("x" + std::to_string(j + 1));
    }
    model.target_name = data.target_name;

    Objective obj;
    obj.loss = config.loss;
    obj.y = data.y;
    for (std::size_t j = 0; j < p; ++j) {
        model.bases.push_back(build_basis(data.column(j), config.basis_dim, config.spline_degree, j));
        obj.designs.push_back(eval_design(model.bases.back(), data.column(j)));
        obj.penalties.push_back(difference_penalty(config.basis_dim, config.penalty_order));
    }
    DfTargets targets{config.df, config.df_overrides};
    obj.plan = homogeneous_smoothing(obj.designs, obj.penalties, targets);

    TrainState state = init(obj, config.factors, train);
    TrainResult result = train.optimizer == OptimizerKind::sgd ? fit_sgd(obj, std::move(state), train)
                                                               : fit_bcd(obj, std::move(state), train);

    model.coef = result.coef;
    model.df_targets = obj.plan.df_targets;
    model.lambdas = obj.plan.lambdas;
    model.training.seed = train.seed;
    model.training.optimizer = train.optimizer == OptimizerKind::sgd ? "sgd" : "bcd";
    model.training.epochs_run = result.epochs_run;
    model.training.best_epoch = result.best_epoch;
    model.training.best_validation_loss = result.best_validation_loss;
    model.training.n_train = n;

    if (report) {
        report->fitted_eta = predict_eta(obj.designs, model.coef.main, model.coef.factors);
        report->warnings = obj.plan.warnings;
        report->warnings.insert(report->warnings.end(), result.warnings.begin(), result.warnings.end());
        report->train = std::move(result);
        report->plan = std::move(obj.plan);
    }
    return model;
}

struct Prediction {
    Eigen::VectorXd eta;
    Eigen::VectorXd response;      ///< h(eta)
    std::size_t clamped_values = 0; ///< cells outside the training domain
};

inline Prediction predict(const FittedModel& model, const Eigen::MatrixXd& x)
{
    if (static_cast<std::size_t>(x.cols()) != model.p()) {
        throw InvalidArgument("expected " + std::to_string(model.p()) + " feature columns, got " +
                              std::to_string(x.cols()));
    }
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (!x.row(i).allFinite()) bad.push_back(i);
    }
    if (!bad.empty()) {
        std::string msg = "non-finite feature cells in rows";
        for (std::size_t k = 0; k < bad.size() && k < 20; ++k) msg += " " + std::to_string(bad[k]);
        if (bad.size() > 20) msg += " ...";
        throw InvalidArgument(msg);
    }
    Prediction out;
    const auto designs = detail::designs_for(model.bases, x, &out.clamped_values);
    out.eta = predict_eta(designs, model.coef.main, model.coef.factors);
    out.response = out.eta.unaryExpr([&](double e) { return response(model.config.loss, e); });
    return out;
}

// ---------------------------------------------------------------------------
// Interpretability exports
// ---------------------------------------------------------------------------

/// Additive pieces of the predictor at one point.
struct PredictorTerms {
    double intercept = 0.0;
    std::vector<double> univariate;                ///< B_j(x_j)^T beta_j per feature
    std::vector<std::vector<double>> interactions; ///< [d - 2][f]: Phi_f^(d)(x)

    double total() const
    {
        double t = intercept;
        for (double v : univariate) t += v;
        for (const auto& deg : interactions) {
            for (double v : deg) t += v;
        }
        return t;
    }
};

inline PredictorTerms decompose(const FittedModel& model, std::span<const double> x)
{
    detail::require(x.size() == model.p(), "point dimension does not match the feature count");
    const std::size_t p = model.p();
    const std::size_t m = model.config.basis_dim;
    std::vector<double> rows(p * m);
    for (std::size_t j = 0; j < p; ++j) {
        detail::require(std::isfinite(x[j]), "non-finite feature value");
        eval_basis_into(model.bases[j], x[j], {rows.data() + j * m, m});
    }
    PredictorTerms out;
    out.intercept = model.coef.main.alpha0;
    for (std::size_t j = 0; j < p; ++j) {
        out.univariate.push_back(phi({rows.data() + j * m, m}, {model.coef.main.betas.col(static_cast<Eigen::Index>(j)).data(), m}));
    }
    std::vector<double> phis(p);
    for (const FactorTensor& g : model.coef.factors) {
        std::vector<double> terms;
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            for (std::size_t j = 0; j < p; ++j) phis[j] = phi({rows.data() + j * m, m}, g.fiber(j, f));
            terms.push_back(ahot_recursive(phis, g.degree()).back());
        }
        out.interactions.push_back(std::move(terms));
    }
    return out;
}


/// Values of one interaction (or univariate) term on a tensor grid.
///
/// `values` is row-major over the grids: the last feature varies fastest.
struct EffectSurface {
    std::vector<std::size_t> features;
    std::vector<std::vector<double>> grids;
    std::vector<double> values;
    /// Always true: terms carry no centering constraint (see FittedModel).
    bool level_shift_caveat = true;

    std::vector<std::size_t> shape() const
    {
        std::vector<std::size_t> s;
        for (const auto& g : grids) s.push_back(g.size());
        return s;
    }
};

inline std::vector<double> domain_grid(const SplineBasis& b, std::size_t resolution)
{
    detail::require(resolution >= 2, "grid resolution must be >= 2");
    std::vector<double> g(resolution);
    for (std::size_t k = 0; k < resolution; ++k) {
        g[k] = b.lo + (b.hi - b.lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
    }
    g.back() = b.hi;
    return g;
}

/// phi^(d)_{j,f} on a set of points.
inline std::vector<double> latent_curve(const FittedModel& model, int d, std::size_t f, std::size_t j,
                                        std::span<const double> points)
{
    const FactorTensor& g = model.coef.factors.at(static_cast<std::size_t>(d - 2));
    std::vector<double> out(points.size());
    Eigen::VectorXd row(static_cast<Eigen::Index>(model.config.basis_dim));
    for (std::size_t k = 0; k < points.size(); ++k) {
        eval_basis_into(model.bases[j], points[k], {row.data(), static_cast<std::size_t>(row.size())});
        out[k] = phi({row.data(), static_cast<std::size_t>(row.size())}, g.fiber(j, f));
    }
    return out;
}

/// sum_f prod_{j in J} phi^(|J|)_{j,f} on the tensor grid spanned by `grids`.
/// A single feature yields its univariate spline term B_j^T beta_j.
inline EffectSurface effect_surface(const FittedModel& model, const std::vector<std::size_t>& features,
                                    const std::vector<std::vector<double>>& grids)
{
    const std::size_t k = features.size();
    detail::require(k >= 1, "effect surface needs at least one feature");
    detail::require(grids.size() == k, "one grid per feature required");
    if (static_cast<int>(k) > model.config.degree) {
        throw InvalidArgument("subset size " + std::to_string(k) + " exceeds model degree " +
                              std::to_string(model.config.degree));
    }
    for (std::size_t a = 0; a < k; ++a) {
        detail::require(features[a] < model.p(), "feature index out of range");
        detail::require(!grids[a].empty(), "empty grid");
        for (std::size_t b = a + 1; b < k; ++b) detail::require(features[a] != features[b], "duplicate feature");
    }

    EffectSurface out;
    out.features = features;
    out.grids = grids;
    std::size_t total = 1;
    for (const auto& g : grids) total *= g.size();
    out.values.assign(total, 0.0);

    if (k == 1) {
        const std::size_t j = features[0];
        const auto m = model.config.basis_dim;
        Eigen::VectorXd row(static_cast<Eigen::Index>(m));
        for (std::size_t t = 0; t < grids[0].size(); ++t) {
            eval_basis_into(model.bases[j], grids[0][t], {row.data(), m});
            out.values[t] = row.dot(model.coef.main.betas.col(static_cast<Eigen::Index>(j)));
        }
        return out;
    }

    const int d = static_cast<int>(k);
    const std::size_t nf = model.coef.factors.at(k - 2).num_factors();
    // curves[a][f] = phi^(d)_{features[a], f} on grids[a]
    std::vector<std::vector<std::vector<double>>> curves(k, std::vector<std::vector<double>>(nf));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t f = 0; f < nf; ++f) curves[a][f] = latent_curve(model, d, f, features[a], grids[a]);
    }
    std::vector<std::size_t> idx(k, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        double acc = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            double prod = 1.0;
            for (std::size_t a = 0; a < k; ++a) prod *= curves[a][f][idx[a]];
            acc += prod;
        }
        out.values[flat] = acc;
        for (std::size_t a = k; a-- > 0;) {
            if (++idx[a] < grids[a].size()) break;
            idx[a] = 0;
        }
    }
    return out;
}

/// Equally spaced grid over each feature's training domain.
inline EffectSurface effect_surface(const FittedModel& model, const std::vector<std::size_t>& features,
                                    std::size_t resolution)
{
    std::vector<std::vector<double>> grids;
    for (std::size_t j : features) {
        detail::require(j < model.p(), "feature index out of range");
        grids.push_back(domain_grid(model.bases[j], resolution));
    }
    return effect_surface(model, features, grids);
}

/// Marginal average of a surface along one feature, with the min-max range
/// over the remaining dimensions at each grid point.
struct MarginalEffect {
    std::size_t axis_feature = 0;
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> min;
    std::vector<double> max;

    double spread(std::size_t k) const { return max[k] - min[k]; }
};

inline MarginalEffect marginal_from_surface(const EffectSurface& s, std::size_t axis_feature)
{
    const auto it = std::find(s.features.begin(), s.features.end(), axis_feature);
    detail::require(it != s.features.end(), "axis feature is not part of the subset");
    const auto axis = static_cast<std::size_t>(it - s.features.begin());
    const auto shape = s.shape();

    MarginalEffect out;
    out.axis_feature = axis_feature;
    out.grid = s.grids[axis];
    const std::size_t len = shape[axis];
    out.mean.assign(len, 0.0);
    out.min.assign(len, std::numeric_limits<double>::infinity());
    out.max.assign(len, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> counts(len, 0);

    std::vector<std::size_t> idx(shape.size(), 0);
    for (double v : s.values) {
        const std::size_t a = idx[axis];
        out.mean[a] += v;
        out.min[a] = std::min(out.min[a], v);
        out.max[a] = std::max(out.max[a], v);
        ++counts[a];
        for (std::size_t t = shape.size(); t-- > 0;) {
            if (++idx[t] < shape[t]) break;
            idx[t] = 0;
        }
    }
    for (std::size_t a = 0; a < len; ++a) out.mean[a] /= static_cast<double>(counts[a]);
    return out;
}

inline MarginalEffect marginal_effect(const FittedModel& model, const std::vector<std::size_t>& features,
                                      std::size_t axis_feature, std::size_t resolution)
{
    return marginal_from_surface(effect_surface(model, features, resolution), axis_feature);
}

/// Every feature's latent curve phi^(d)_{j,f} on its domain grid.
struct LatentCurves {
    int degree = 2;
    std::size_t factor = 0;
    std::vector<std::vector<double>> grids;  ///< per feature
    std::vector<std::vector<double>> values; ///< per feature
};

inline LatentCurves univariate_latents(const FittedModel& model, int d, std::size_t f, std::size_t resolution)
{
    if (d < 2 || d > model.config.degree) {
        throw InvalidArgument("no latent factors of degree " + std::to_string(d));
    }
    const FactorTensor& g = model.coef.factors[static_cast<std::size_t>(d - 2)];
    if (f >= g.num_factors()) throw InvalidArgument("factor index out of range");
    LatentCurves out;
    out.degree = d;
    out.factor = f;
    for (std::size_t j = 0; j < model.p(); ++j) {
        out.grids.push_back(domain_grid(model.bases[j], resolution));
        out.values.push_back(latent_curve(model, d, f, j, out.grids.back()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kModelFormat = "ahofm-model";

namespace detail {

inline std::string fnv1a64(const std::string& text)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return "fnv1a64:" + os.str();
}

inline nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline double from_nullable(const nlohmann::json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline const char* loss_name(LossKind k) { return k == LossKind::squared_error ? "squared_error" : "logistic"; }

inline LossKind parse_loss(const std::string& s)
{
    if (s == "squared_error" || s == "squared" || s == "gaussian") return LossKind::squared_error;
    if (s == "logistic" || s == "binomial") return LossKind::logistic;
    throw InvalidArgument("unknown loss '" + s + "' (expected squared_error or logistic)");
}

inline nlohmann::json model_payload(const FittedModel& m)
{
    using nlohmann::json;
    const std::size_t p = m.p();
    const std::size_t mb = m.config.basis_dim;

    json overrides = json::object();
    for (const auto& [j, v] : m.config.df_overrides) overrides[std::to_string(j)] = v;
    json cfg = {{"degree", m.config.degree},
                {"factors", m.config.factors},
                {"basis_dim", mb},
                {"spline_degree", m.config.spline_degree},
                {"penalty_order", m.config.penalty_order},
                {"loss", loss_name(m.config.loss)},
                {"df", m.config.df},
                {"df_overrides", overrides}};

    json features = json::array();
    for (std::size_t j = 0; j < p; ++j) {
        const auto& b = m.bases[j];
        features.push_back({{"name", m.feature_names[j]},
                            {"spline_degree", b.spline_degree},
                            {"num_basis", b.num_basis},
                            {"lo", b.lo},
                            {"hi", b.hi},
                            {"knots", b.knots}});
    }

    const auto& betas = m.coef.main.betas;
    std::vector<double> beta_data(betas.data(), betas.data() + betas.size());
    json factors = json::array();
    for (const auto& g : m.coef.factors) {
        factors.push_back({{"degree", g.degree()},
                           {"layout", "row-major over [F, p, M]"},
                           {"shape", {g.num_factors(), g.num_features(), g.num_basis()}},
                           {"data", g.values()}});
    }
    std::vector<double> lam_data;
    for (const auto& row : m.lambdas) lam_data.insert(lam_data.end(), row.begin(), row.end());

    return {{"config", cfg},
            {"features", features},
            {"target", m.target_name},
            {"main", {{"alpha0", m.coef.main.alpha0},
                      {"betas", {{"layout", "row-major over [p, M]"}, {"shape", {p, mb}}, {"data", beta_data}}}}},
            {"factors", factors},
            {"smoothing", {{"df_targets", m.df_targets},
                           {"lambdas", {{"layout", "row-major over [D, p]"},
                                        {"shape", {m.lambdas.size(), p}},
                                        {"data", lam_data}}}}},
            {"training", {{"seed", m.training.seed},
                          {"optimizer", m.training.optimizer},
                          {"epochs_run", m.training.epochs_run},
                          {"best_epoch", m.training.best_epoch},
                          {"best_validation_loss", nullable(m.training.best_validation_loss)},
                          {"n_train", m.training.n_train}}}};
}

inline std::vector<std::size_t> shape_of(const nlohmann::json& j) { return j.at("shape").get<std::vector<std::size_t>>(); }

inline FittedModel model_from_payload(const nlohmann::json& pl)
{
    FittedModel m;
    const auto& cfg = pl.at("config");
    m.config.degree = cfg.at("degree").get<int>();
    m.config.factors = cfg.at("factors").get<std::vector<std::size_t>>();
    m.config.basis_dim = cfg.at("basis_dim").get<std::size_t>();
    m.config.spline_degree = cfg.at("spline_degree").get<int>();
    m.config.penalty_order = cfg.at("penalty_order").get<int>();
    m.config.loss = parse_loss(cfg.at("loss").get<std::string>());
    m.config.df = cfg.at("df").get<std::vector<double>>();
    for (const auto& [k, v] : cfg.at("df_overrides").items()) m.config.df_overrides[std::stoul(k)] = v.get<double>();
    m.config.normalize();

    std::size_t j = 0;
    for (const auto& fj : pl.at("features")) {
        SplineBasis b;
        b.feature_index = j++;
        b.spline_degree = fj.at("spline_degree").get<int>();
        b.num_basis = fj.at("num_basis").get<std::size_t>();
        b.lo = fj.at("lo").get<double>();
        b.hi = fj.at("hi").get<double>();
        b.knots = fj.at("knots").get<std::vector<double>>();
        if (b.knots.size() != b.num_basis + static_cast<std::size_t>(b.spline_degree) + 1 ||
            b.num_basis != m.config.basis_dim) {
            throw FormatError("model file: inconsistent knot vector for feature " + std::to_string(j - 1));
        }
        m.feature_names.push_back(fj.at("name").get<std::string>());
        m.bases.push_back(std::move(b));
    }
    m.target_name = pl.at("target").get<std::string>();
    const std::size_t p = m.bases.size();
    const std::size_t mb = m.config.basis_dim;

    m.coef = Coefficients(mb, p, m.config.factors);
    m.coef.main.alpha0 = pl.at("main").at("alpha0").get<double>();
    const auto& bj = pl.at("main").at("betas");
    const auto beta_data = bj.at("data").get<std::vector<double>>();
    if (shape_of(bj) != std::vector<std::size_t>{p, mb} || beta_data.size() != p * mb) {
        throw FormatError("model file: beta shape mismatch");
    }
    std::copy(beta_data.begin(), beta_data.end(), m.coef.main.betas.data());

    const auto& fac = pl.at("factors");
    if (fac.size() != m.coef.factors.size()) throw FormatError("model file: factor tensor count mismatch");
    for (std::size_t s = 0; s < fac.size(); ++s) {
        auto& g = m.coef.factors[s];
        const auto data = fac[s].at("data").get<std::vector<double>>();
        if (fac[s].at("degree").get<int>() != g.degree() ||
            shape_of(fac[s]) != std::vector<std::size_t>{g.num_factors(), p, mb} || data.size() != g.size()) {
            throw FormatError("model file: factor tensor shape mismatch at degree " + std::to_string(g.degree()));
        }
        g.values() = data;
    }

    const auto& sm = pl.at("smoothing");
    m.df_targets = sm.at("df_targets").get<std::vector<double>>();
    const auto lam = sm.at("lambdas").at("data").get<std::vector<double>>();
    const auto lshape = shape_of(sm.at("lambdas"));
    if (lshape.size() != 2 || lshape[1] != p || lam.size() != lshape[0] * p) {
        throw FormatError("model file: lambda shape mismatch");
    }
    for (std::size_t d = 0; d < lshape[0]; ++d) {
        m.lambdas.emplace_back(lam.begin() + static_cast<std::ptrdiff_t>(d * p),
                               lam.begin() + static_cast<std::ptrdiff_t>((d + 1) * p));
    }

    const auto& tr = pl.at("training");
    m.training.seed = tr.at("seed").get<std::uint64_t>();
    m.training.optimizer = tr.at("optimizer").get<std::string>();
    m.training.epochs_run = tr.at("epochs_run").get<int>();
    m.training.best_epoch = tr.at("best_epoch").get<int>();
    m.training.best_validation_loss = from_nullable(tr.at("best_validation_loss"));
    m.training.n_train = tr.at("n_train").get<std::size_t>();
    return m;
}

} // namespace detail

/// Self-describing JSON document with a checksum over the payload.
inline std::string serialize(const FittedModel& model)
{
    const nlohmann::json payload = detail::model_payload(model);
    const nlohmann::json doc = {{"format", kModelFormat},
                                {"schema_version", kModelSchemaVersion},
                                {"checksum", detail::fnv1a64(payload.dump())},
                                {"payload", payload}};
    return doc.dump(1) + "\n";
}

inline FittedModel deserialize(const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file is corrupted (unparseable): ") + e.what());
    }
    try {
        if (!doc.is_object() || doc.value("format", std::string()) != kModelFormat) {
            throw FormatError("not an ahofm model file");
        }
        const int version = doc.at("schema_version").get<int>();
        if (version != kModelSchemaVersion) {
            throw FormatError("unsupported model schema version " + std::to_string(version) + " (expected " +
                              std::to_string(kModelSchemaVersion) + ")");
        }
        const auto& payload = doc.at("payload");
        if (detail::fnv1a64(payload.dump()) != doc.at("checksum").get<std::string>()) {
            throw FormatError("model file checksum mismatch");
        }
        return detail::model_from_payload(payload);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file is malformed: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("model file is malformed: ") + e.what());
    }
}

inline void save(const FittedModel& model, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write model file: " + path);
    out << serialize(model);
    if (!out) throw InvalidArgument("failed writing model file: " + path);
}

inline FittedModel load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

} // namespace ahofm
