// Command-line front end: fit, predict, simulate, effects, benchmark, study, compare.

#include <ahofm/ahofm.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity from AHOFM_LOG: error, warn (default), info or debug.
Level log_level()
{
    const char* env = std::getenv("AHOFM_LOG");
    const std::string v = env ? env : "";
    if (v == "error" || v == "quiet") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
}

void log(Level level, const std::string& msg)
{
    static const Level threshold = log_level();
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (level <= threshold) std::cerr << "ahofm [" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

/// JSON config files: a flat object whose keys are long flag names of the
/// invoked subcommand. Scalars become one value, arrays several, booleans
/// toggle flags.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override
    {
        nlohmann::json out = nlohmann::json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const std::string name = opt->get_lnames().front();
            if (opt->count() > 0) {
                const auto& res = opt->results();
                out[name] = res.size() == 1 ? nlohmann::json(res.front()) : nlohmann::json(res);
            } else if (default_also && !opt->get_default_str().empty()) {
                out[name] = opt->get_default_str();
            }
        }
        return out.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
    {
        nlohmann::json doc;
        try {
            input >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : doc.items()) {
            CLI::ConfigItem item;
            if (!subcommand_.empty()) item.parents = {subcommand_};
            item.name = key;
            auto text = [](const nlohmann::json& v) {
                if (v.is_string()) return v.get<std::string>();
                if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
                return v.dump();
            };
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(text(v));
            } else {
                item.inputs.push_back(text(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    std::string subcommand_;
};

void add_config(CLI::App* sub) { sub->fallthrough(); }

std::string fmt(double v) { return ahofm::format_double(v); }

/// Opens `path` for writing, or returns stdout for "-" / empty.
class Output {
public:
    explicit Output(const std::string& path)
    {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw ahofm::InvalidArgument("cannot write output file: " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

char delimiter_of(const std::string& d)
{
    if (d == "\\t" || d == "tab") return '\t';
    if (d.size() != 1) throw ahofm::InvalidArgument("delimiter must be a single character");
    return d[0];
}

/// Resolves feature tokens: a feature name, or a 1-based position.
std::vector<std::size_t> resolve_features(const std::vector<std::string>& tokens,
                                          const std::vector<std::string>& names)
{
    std::vector<std::size_t> out;
    for (const auto& t : tokens) {
        const auto it = std::find(names.begin(), names.end(), t);
        if (it != names.end()) {
            out.push_back(static_cast<std::size_t>(it - names.begin()));
            continue;
        }
        std::size_t pos = 0;
        std::size_t idx = 0;
        try {
            idx = std::stoul(t, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size() || idx < 1 || idx > names.size()) {
            throw ahofm::InvalidArgument("unknown feature '" + t + "' (use a name or a 1-based position)");
        }
        out.push_back(idx - 1);
    }
    return out;
}

// Shared model and training flags.
struct ModelFlags {
    int degree = 2;
    std::vector<std::size_t> factors{5};
    std::vector<double> df{15.0};
    std::size_t basis_dim = 10;
    int penalty_order = 2;
    std::string loss = "squared";
    std::string optimizer = "sgd";
    std::uint64_t seed = 42;
    int epochs = 1000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    int patience = 50;
    double validation_fraction = 0.1;
    bool no_early_stopping = false;
    double init_scale = 0.01;
    int max_sweeps = 200;
    double bcd_tolerance = 1e-8;

    void add(CLI::App* sub, bool with_structure = true)
    {
        if (with_structure) {
            sub->add_option("--degree", degree, "Maximum interaction degree D (1 = additive)")->capture_default_str();
            sub->add_option("--factors", factors, "Latent dimensions F_2[,F_3,...]; one value is broadcast")
                ->delimiter(',')
                ->capture_default_str();
        }
        sub->add_option("--df", df, "Effective degrees of freedom per degree; one value is broadcast")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--basis-dim", basis_dim, "B-spline basis functions per feature (M)")->capture_default_str();
        sub->add_option("--penalty-order", penalty_order, "Difference penalty order (1 or 2)")->capture_default_str();
        sub->add_option("--loss", loss, "squared or logistic")
            ->check(CLI::IsMember({"squared", "logistic"}))
            ->capture_default_str();
        sub->add_option("--optimizer", optimizer, "sgd or bcd")
            ->check(CLI::IsMember({"sgd", "bcd"}))
            ->capture_default_str();
        sub->add_option("--seed", seed, "Random seed")->capture_default_str();
        sub->add_option("--epochs", epochs, "Maximum SGD epochs")->capture_default_str();
        sub->add_option("--batch-size", batch_size, "Minibatch size")->capture_default_str();
        sub->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
        sub->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
        sub->add_option("--validation-fraction", validation_fraction, "Held-out share for early stopping")
            ->capture_default_str();
        sub->add_flag("--no-early-stopping", no_early_stopping, "Run the full epoch budget on all data");
        sub->add_option("--init-scale", init_scale, "Standard deviation of initial latent factors")
            ->capture_default_str();
        sub->add_option("--max-sweeps", max_sweeps, "Maximum block coordinate descent sweeps")->capture_default_str();
        sub->add_option("--bcd-tolerance", bcd_tolerance, "Relative objective decrease that stops BCD")
            ->capture_default_str();
    }

    ahofm::ModelConfig model() const
    {
        ahofm::ModelConfig mc;
        mc.degree = degree;
        mc.factors = factors;
        mc.df = df;
        mc.basis_dim = basis_dim;
        mc.penalty_order = penalty_order;
        mc.loss = loss == "logistic" ? ahofm::LossKind::logistic : ahofm::LossKind::squared_error;
        return mc;
    }

    ahofm::TrainConfig train() const
    {
        ahofm::TrainConfig tc;
        tc.optimizer = optimizer == "bcd" ? ahofm::OptimizerKind::bcd : ahofm::OptimizerKind::sgd;
        tc.seed = seed;
        tc.max_epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.patience = patience;
        tc.validation_fraction = validation_fraction;
        tc.early_stopping = !no_early_stopping;
        tc.init_scale = init_scale;
        tc.bcd_max_sweeps = max_sweeps;
        tc.bcd_tolerance = bcd_tolerance;
        return tc;
    }
};

struct DataFlags {
    std::string path;
    std::string target;
    std::string delimiter = ",";
    std::vector<std::string> log10;

    void add(CLI::App* sub)
    {
        sub->add_option("--data", path, "Delimited input file with a header row")->required();
        sub->add_option("--target", target, "Response column name")->required();
        sub->add_option("--delimiter", delimiter, "Field delimiter (',' by default, 'tab' for tabs)");
        sub->add_option("--log10", log10, "Columns to log10-transform")->delimiter(',');
    }

    ahofm::Dataset load() const
    {
        return ahofm::ingest_csv(path, target, delimiter_of(delimiter),
                                 std::set<std::string>(log10.begin(), log10.end()));
    }
};

// ---------------------------------------------------------------------------

int run_fit(const DataFlags& data, const ModelFlags& flags, const std::string& out)
{
    const ahofm::Dataset ds = data.load();
    log(Level::info, "loaded " + std::to_string(ds.n()) + " rows, " + std::to_string(ds.p()) + " features");
    ahofm::FitReport report;
    const ahofm::FittedModel model = ahofm::fit(ds, flags.model(), flags.train(), &report);
    for (const auto& w : report.warnings) log(Level::warn, w);
    for (std::size_t d = 0; d < model.lambdas.size(); ++d) {
        std::string line = "degree " + std::to_string(d + 1) + " lambdas:";
        for (double l : model.lambdas[d]) line += " " + fmt(l);
        log(Level::debug, line);
    }
    for (std::size_t d = 0; d < report.plan.exact_df.size(); ++d) {
        std::string line = "degree " + std::to_string(d + 1) + " df target " + fmt(report.plan.df_targets[d]) +
                           ", tr(2H - H^T H):";
        for (double v : report.plan.exact_df[d]) line += " " + fmt(v);
        log(Level::info, line);
    }
    ahofm::save(model, out);
    std::cout << "model: " << out << '\n'
              << "optimizer: " << model.training.optimizer << '\n'
              << "epochs_run: " << model.training.epochs_run << '\n'
              << "best_epoch: " << model.training.best_epoch << '\n';
    if (!report.train.history.empty()) {
        std::cout << "final_objective: " << fmt(report.train.history.back().objective) << '\n';
    }
    return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& delim,
                const std::string& out)
{
    const ahofm::FittedModel model = ahofm::load(model_path);
    const Eigen::MatrixXd x = ahofm::ingest_features(data_path, model.feature_names, delimiter_of(delim));
    const ahofm::Prediction pr = ahofm::predict(model, x);
    if (pr.clamped_values > 0) {
        log(Level::warn, std::to_string(pr.clamped_values) + " feature values outside the training domain were clamped");
    }
    Output o(out);
    o.stream() << "eta,response\n";
    for (Eigen::Index i = 0; i < pr.eta.size(); ++i) o.stream() << fmt(pr.eta(i)) << ',' << fmt(pr.response(i)) << '\n';
    return 0;
}

int run_simulate(ahofm::SimSpec spec, const std::string& out, const std::string& truth_out, std::size_t grid)
{
    const ahofm::SimulatedData sim = ahofm::simulate(spec);
    {
        Output o(out);
        ahofm::write_csv(o.stream(), sim.data);
    }
    log(Level::info, sim.describe());
    if (!truth_out.empty()) {
        // True surfaces on a grid spanning the central 90% of N(0,1).
        const double edge = 1.6448536269514722;
        std::vector<double> g(grid);
        for (std::size_t k = 0; k < grid; ++k) {
            g[k] = -edge + 2.0 * edge * static_cast<double>(k) / static_cast<double>(grid - 1);
        }
        const std::size_t deg = static_cast<std::size_t>(spec.interaction_degree);
        Output o(truth_out);
        o.stream() << "surface,features";
        for (std::size_t a = 0; a < deg; ++a) o.stream() << ",z" << a + 1;
        o.stream() << ",value\n";
        std::size_t cells = 1;
        for (std::size_t a = 0; a < deg; ++a) cells *= grid;
        std::vector<double> pt(deg);
        for (std::size_t s = 0; s < sim.surfaces.size(); ++s) {
            std::string label;
            for (std::size_t f : sim.surfaces[s].features) {
                label += (label.empty() ? "" : ":") + sim.data.feature_names[f];
            }
            for (std::size_t flat = 0; flat < cells; ++flat) {
                std::size_t rem = flat;
                for (std::size_t a = deg; a-- > 0;) {
                    pt[a] = g[rem % grid];
                    rem /= grid;
                }
                o.stream() << s + 1 << ',' << label;
                for (double v : pt) o.stream() << ',' << fmt(v);
                o.stream() << ',' << fmt(sim.evaluate(s, pt)) << '\n';
            }
        }
    }
    std::cout << "data: " << (out.empty() ? "-" : out) << '\n'
              << "noise_variance: " << fmt(sim.noise_variance) << '\n';
    return 0;
}

int run_effects(const std::string& model_path, const std::vector<std::string>& feature_tokens,
                std::size_t grid, const std::string& mode, const std::string& axis, int latent_degree,
                std::size_t factor, const std::string& out)
{
    const ahofm::FittedModel model = ahofm::load(model_path);
    const auto& names = model.feature_names;
    Output o(out);
    auto& s = o.stream();
    if (mode == "latents") {
        const ahofm::LatentCurves lc = ahofm::univariate_latents(model, latent_degree, factor - 1, grid);
        s << "feature,x,value\n";
        for (std::size_t j = 0; j < lc.grids.size(); ++j) {
            for (std::size_t k = 0; k < lc.grids[j].size(); ++k) {
                s << names[j] << ',' << fmt(lc.grids[j][k]) << ',' << fmt(lc.values[j][k]) << '\n';
            }
        }
        return 0;
    }
    if (feature_tokens.empty()) throw ahofm::InvalidArgument("--features is required for surface and marginal output");
    const auto features = resolve_features(feature_tokens, names);
    const ahofm::EffectSurface surf = ahofm::effect_surface(model, features, grid);
    if (mode == "marginal") {
        const std::size_t axis_feature =
            axis.empty() ? features.front() : resolve_features({axis}, names).front();
        const ahofm::MarginalEffect me = ahofm::marginal_from_surface(surf, axis_feature);
        s << names[axis_feature] << ",mean,min,max\n";
        for (std::size_t k = 0; k < me.grid.size(); ++k) {
            s << fmt(me.grid[k]) << ',' << fmt(me.mean[k]) << ',' << fmt(me.min[k]) << ',' << fmt(me.max[k]) << '\n';
        }
        return 0;
    }
    for (std::size_t a = 0; a < features.size(); ++a) s << names[features[a]] << ',';
    s << "value\n";
    const auto shape = surf.shape();
    std::vector<std::size_t> idx(shape.size(), 0);
    for (double v : surf.values) {
        for (std::size_t a = 0; a < idx.size(); ++a) s << fmt(surf.grids[a][idx[a]]) << ',';
        s << fmt(v) << '\n';
        for (std::size_t a = idx.size(); a-- > 0;) {
            if (++idx[a] < shape[a]) break;
            idx[a] = 0;
        }
    }
    return 0;
}

int run_benchmark(const std::vector<std::size_t>& p_list, const std::vector<std::size_t>& n_list, std::size_t reps,
                  const ModelFlags& flags, const std::string& out)
{
    ahofm::TrainConfig tc = flags.train();
    const auto rows = ahofm::benchmark_scaling(p_list, n_list, reps, flags.model(), tc, flags.seed);
    Output o(out);
    o.stream() << "p,n,repetitions,median_seconds,min_seconds,max_seconds,memory_count,naive_pairwise_memory_count\n";
    for (const auto& r : rows) {
        const auto [lo, hi] = std::minmax_element(r.seconds.begin(), r.seconds.end());
        o.stream() << r.p << ',' << r.n << ',' << r.seconds.size() << ',' << fmt(r.median_seconds) << ',' << fmt(*lo)
                   << ',' << fmt(*hi) << ',' << r.memory << ',' << r.naive_memory << '\n';
        log(Level::info, "p=" + std::to_string(r.p) + " n=" + std::to_string(r.n) +
                             " median " + fmt(r.median_seconds) + " s");
    }
    return 0;
}

int run_study(ahofm::StudyConfig cfg, const std::string& out)
{
    const ahofm::StudyResult res = ahofm::run_estimation_study(cfg);
    Output o(out);
    o.stream() << "replication,seed,factors,feature_a,feature_b,mse,truth_variance\n";
    for (const auto& r : res.rows) {
        o.stream() << r.replication + 1 << ',' << r.seed << ',' << r.factors << ",x" << r.feature_a + 1 << ",x"
                   << r.feature_b + 1 << ',' << fmt(r.mse) << ',' << fmt(r.truth_variance) << '\n';
    }
    std::cout << "generation: " << res.metadata << '\n';
    for (std::size_t k = 0; k < res.factor_list.size(); ++k) {
        std::cout << "median_mse[F=" << res.factor_list[k] << "]: " << fmt(res.median_mse[k]) << '\n';
    }
    return 0;
}

int run_compare(const DataFlags& data, const ModelFlags& flags, std::size_t splits, double test_fraction,
                const std::string& out)
{
    const ahofm::Dataset ds = data.load();
    const auto rows = ahofm::compare_interactions(ds, splits, flags.seed, test_fraction, flags.model(), flags.train());
    Output o(out);
    o.stream() << "split,mse_additive,mse_interaction,reduction\n";
    for (const auto& r : rows) {
        o.stream() << r.split + 1 << ',' << fmt(r.mse_additive) << ',' << fmt(r.mse_interaction) << ','
                   << fmt(r.reduction) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Additive higher-order factorization machines"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ahofm 1.0.0");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a model to a delimited data file");
    DataFlags fit_data;
    ModelFlags fit_flags;
    std::string fit_out;
    fit_data.add(fit);
    fit_flags.add(fit);
    fit->add_option("--out", fit_out, "Model file to write")->required();
    add_config(fit);

    // predict
    auto* pred = app.add_subcommand("predict", "Predict with a saved model");
    std::string pred_model;
    std::string pred_data;
    std::string pred_delim = ",";
    std::string pred_out;
    pred->add_option("--model", pred_model, "Model file")->required();
    pred->add_option("--data", pred_data, "Delimited feature file; columns matched by name")->required();
    pred->add_option("--delimiter", pred_delim, "Field delimiter");
    pred->add_option("--out", pred_out, "Prediction file (stdout if omitted)");
    add_config(pred);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate synthetic interaction data");
    ahofm::SimSpec spec;
    std::string sim_out;
    std::string sim_truth;
    std::size_t sim_grid = 20;
    sim->add_option("--n", spec.n, "Observations")->capture_default_str();
    sim->add_option("--p", spec.p, "Features")->capture_default_str();
    sim->add_option("--snr", spec.snr, "Var(signal) / noise variance")->capture_default_str();
    sim->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
    sim->add_option("--interaction-degree", spec.interaction_degree, "2 or 3")->capture_default_str();
    sim->add_option("--basis-dim", spec.basis_dim, "Basis functions per feature for the true surfaces")
        ->capture_default_str();
    sim->add_option("--out", sim_out, "Data file (stdout if omitted)");
    sim->add_option("--truth-out", sim_truth, "Long-format table of true surfaces on a grid");
    sim->add_option("--grid", sim_grid, "Grid points per axis for --truth-out")->capture_default_str();
    add_config(sim);

    // effects
    auto* eff = app.add_subcommand("effects", "Export interaction surfaces, marginals or latent curves");
    std::string eff_model;
    std::vector<std::string> eff_features;
    std::size_t eff_grid = 20;
    std::string eff_mode = "surface";
    std::string eff_axis;
    int eff_latent_degree = 2;
    std::size_t eff_factor = 1;
    std::string eff_out;
    eff->add_option("--model", eff_model, "Model file")->required();
    eff->add_option("--features", eff_features, "Feature names or 1-based positions")->delimiter(',');
    eff->add_option("--grid", eff_grid, "Grid points per feature")->capture_default_str();
    eff->add_option("--mode", eff_mode, "surface, marginal or latents")
        ->check(CLI::IsMember({"surface", "marginal", "latents"}))
        ->capture_default_str();
    eff->add_option("--axis", eff_axis, "Axis feature for marginal output (first feature by default)");
    eff->add_option("--latent-degree", eff_latent_degree, "Degree d for latent curves")->capture_default_str();
    eff->add_option("--factor", eff_factor, "1-based factor index for latent curves")->capture_default_str();
    eff->add_option("--out", eff_out, "Output table (stdout if omitted)");
    add_config(eff);

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Time all-pairs fits across feature and sample counts");
    std::vector<std::size_t> bench_p{3, 6, 9, 12};
    std::vector<std::size_t> bench_n{6000};
    std::size_t bench_reps = 3;
    ModelFlags bench_flags;
    bench_flags.epochs = 5;
    std::string bench_out;
    bench->add_option("--p-list", bench_p, "Feature counts")->delimiter(',')->capture_default_str();
    bench->add_option("--n-list", bench_n, "Sample sizes")->delimiter(',')->capture_default_str();
    bench->add_option("--repetitions", bench_reps, "Timed fits per cell")->capture_default_str();
    bench_flags.add(bench);
    bench->add_option("--out", bench_out, "Output table (stdout if omitted)");
    add_config(bench);

    // study
    auto* study = app.add_subcommand("study", "Estimation study: true versus estimated pair surfaces");
    ahofm::StudyConfig study_cfg;
    ModelFlags study_flags;
    std::string study_out;
    study->add_option("--n", study_cfg.sim.n, "Observations")->capture_default_str();
    study->add_option("--p", study_cfg.sim.p, "Features")->capture_default_str();
    study->add_option("--snr", study_cfg.sim.snr, "Signal-to-noise ratio")->capture_default_str();
    study->add_option("--sim-basis-dim", study_cfg.sim.basis_dim, "Basis functions per feature for true surfaces")
        ->capture_default_str();
    study->add_option("--factor-list", study_cfg.factor_list, "Latent dimensions to compare")
        ->delimiter(',')
        ->capture_default_str();
    study->add_option("--replications", study_cfg.replications, "Replications")->capture_default_str();
    study->add_option("--grid", study_cfg.grid_resolution, "Grid points per axis")->capture_default_str();
    study_flags.add(study, false);
    study->add_option("--out", study_out, "Per-surface MSE table (stdout if omitted)");
    add_config(study);

    // compare
    auto* cmp = app.add_subcommand("compare", "Held-out MSE of the model versus its additive counterpart");
    DataFlags cmp_data;
    ModelFlags cmp_flags;
    std::size_t cmp_splits = 3;
    double cmp_test_fraction = 0.2;
    std::string cmp_out;
    cmp_data.add(cmp);
    cmp_flags.add(cmp);
    cmp->add_option("--splits", cmp_splits, "Seeded random train/test splits")->capture_default_str();
    cmp->add_option("--test-fraction", cmp_test_fraction, "Test share per split")->capture_default_str();
    cmp->add_option("--out", cmp_out, "Output table (stdout if omitted)");
    add_config(cmp);

    std::string invoked;
    for (int k = 1; k < argc && invoked.empty(); ++k) {
        for (const CLI::App* sub : app.get_subcommands({})) {
            if (sub->get_name() == argv[k]) invoked = argv[k];
        }
    }
    app.set_config("--config", "", "JSON file of flag values for the subcommand; explicit flags take precedence");
    app.config_formatter(std::make_shared<JsonConfig>(invoked));
    app.allow_config_extras(CLI::config_extras_mode::error);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*fit) return run_fit(fit_data, fit_flags, fit_out);
        if (*pred) return run_predict(pred_model, pred_data, pred_delim, pred_out);
        if (*sim) return run_simulate(spec, sim_out, sim_truth, sim_grid);
        if (*eff) {
            return run_effects(eff_model, eff_features, eff_grid, eff_mode, eff_axis, eff_latent_degree, eff_factor,
                               eff_out);
        }
        if (*bench) return run_benchmark(bench_p, bench_n, bench_reps, bench_flags, bench_out);
        if (*study) {
            study_cfg.sim.seed = study_flags.seed;
            study_cfg.model = study_flags.model();
            study_cfg.train = study_flags.train();
            return run_study(study_cfg, study_out);
        }
        if (*cmp) return run_compare(cmp_data, cmp_flags, cmp_splits, cmp_test_fraction, cmp_out);
    } catch (const ahofm::InvalidArgument& e) {
        log(Level::error, e.what());
        return 1;
    } catch (const ahofm::FormatError& e) {
        log(Level::error, e.what());
        return 1;
    } catch (const ahofm::NumericError& e) {
        log(Level::error, e.what());
        return 2;
    } catch (const std::exception& e) {
        log(Level::error, e.what());
        return 2;
    }
    return 1;
}
