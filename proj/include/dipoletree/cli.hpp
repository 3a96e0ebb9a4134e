#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"
#include "dipoletree/metrics.hpp"
#include "dipoletree/model_io.hpp"
#include "dipoletree/pipeline.hpp"
#include "dipoletree/sim.hpp"

namespace dipoletree {

namespace clidetail {

// Shortest-exact float text keeps emitted CSVs byte-stable across runs.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            std::sscanf(shorter, "%lf", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    return out;
}

// Reorder raw covariate columns to the model's layout by name.
inline Dataset align_to_model(const Dataset& raw, const std::vector<std::string>& names) {
    Dataset out = raw;
    out.x.resize(raw.n(), static_cast<Eigen::Index>(names.size()));
    out.covariate_names = names;
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto it =
            std::find(raw.covariate_names.begin(), raw.covariate_names.end(), names[j]);
        if (it == raw.covariate_names.end())
            throw DataError("evaluate: covariate '" + names[j] + "' missing from input");
        out.x.col(static_cast<Eigen::Index>(j)) =
            raw.x.col(it - raw.covariate_names.begin());
    }
    return out;
}

inline void apply_standardization(Dataset& d, const Standardization& s) {
    for (Eigen::Index j = 0; j < d.x.cols(); ++j)
        d.x.col(j) = (d.x.col(j).array() - s.mean(j)) / s.sd(j);
    d.standardization = s;
}

inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) out.push_back(std::stod(cell));
    }
    if (out.empty()) throw DataError("tune: empty eta grid '" + text + "'");
    return out;
}

}  // namespace clidetail

struct CommonArgs {
    std::string kernel = "linear";
    double kappa = 1.0;
    std::optional<double> eta;  // overrides kappa when set
    double epsilon = 1.0;
    double zeta1 = 0.3;
    double zeta2 = 0.6;
    int min_node = 15;
    int min_child = 5;
    double alpha_c = 3.0;
    int bootstrap = 25;
    double prune_fraction = 0.25;
    std::uint64_t seed = 0;
    std::string time_col = "time";
    std::string status_col = "status";
    std::vector<std::string> exclude;
    SolverConfig qp;

    FitConfig to_fit_config() const {
        FitConfig cfg;
        cfg.grow.kappa = eta.has_value() ? std::exp(*eta) : kappa;
        cfg.grow.epsilon = epsilon;
        cfg.grow.zeta1 = zeta1;
        cfg.grow.zeta2 = zeta2;
        cfg.grow.min_node = min_node;
        cfg.grow.min_child = min_child;
        cfg.grow.qp = qp;
        cfg.kernel_choice = parse_kernel(kernel);
        cfg.alpha_c = alpha_c;
        cfg.bootstrap = bootstrap;
        cfg.prune_fraction = prune_fraction;
        cfg.seed = seed;
        return cfg;
    }

    CsvSchema schema(bool standardize = true) const {
        return CsvSchema{time_col, status_col, exclude, standardize};
    }
};

struct FitArgs {
    CommonArgs common;
    std::string input;
    std::string out = "model.json";
    std::string report_out;
};

inline void cmd_fit(const FitArgs& args) {
    if (!(args.common.alpha_c >= 2.0 && args.common.alpha_c <= 4.0))
        std::cerr << "warning: alpha-c " << args.common.alpha_c
                  << " outside the usual [2, 4] range\n";
    const Dataset train = load_csv(args.input, args.common.schema());
    FitConfig cfg = args.common.to_fit_config();
    const FitOutcome fit = fit_survival_tree(train, cfg);
    save_model(fit.tree, args.out, args.common.time_col, args.common.status_col);

    nlohmann::json report{{"nodes_grown", fit.report.nodes_grown},
                          {"nodes_selected", fit.report.nodes_selected},
                          {"internal_grown", fit.report.internal_grown},
                          {"internal_selected", fit.report.internal_selected},
                          {"alphas", fit.report.alphas}};
    nlohmann::json logranks = nlohmann::json::array();
    for (const auto& [id, lr] : fit.report.node_logranks)
        logranks.push_back({{"node", id}, {"logrank", lr}});
    report["node_logranks"] = logranks;
    if (!args.report_out.empty())
        clidetail::open_out(args.report_out) << report.dump(2) << "\n";
    std::cout << "fit: " << fit.report.nodes_grown << " nodes grown, "
              << fit.report.nodes_selected << " after pruning -> " << args.out << "\n";
}

struct PredictArgs {
    CommonArgs common;
    std::string model;
    std::string input;
    std::string out = "predictions.csv";
};

inline void cmd_predict(const PredictArgs& args) {
    const LoadedModel model = load_model(args.model);
    CsvSchema schema{model.time_col, model.status_col, args.common.exclude, false};
    Dataset data = clidetail::align_to_model(load_csv(args.input, schema),
                                             model.tree.covariate_names);
    clidetail::apply_standardization(data, model.tree.standardization);

    auto out = clidetail::open_out(args.out);
    out << "median\n";
    for (int i = 0; i < data.n(); ++i)
        out << clidetail::fmt(predict_median(model.tree, data.x.row(i).transpose())) << "\n";
    std::cout << "predict: " << data.n() << " rows -> " << args.out << "\n";
}

struct EvaluateArgs {
    CommonArgs common;
    std::string model;
    std::string input;
    std::string out = "evaluation.json";
    std::string curve_out;
};

inline void cmd_evaluate(const EvaluateArgs& args) {
    const LoadedModel model = load_model(args.model);
    CsvSchema schema{model.time_col, model.status_col, args.common.exclude, false};
    Dataset test = clidetail::align_to_model(load_csv(args.input, schema),
                                             model.tree.covariate_names);
    clidetail::apply_standardization(test, model.tree.standardization);

    const EvalReport rep = evaluate_tree(model.tree, test);
    nlohmann::json j{{"ibs", rep.ibs},
                     {"n_test", rep.n_test},
                     {"dropped_g_zero", rep.dropped_g_zero}};
    j["ci"] = rep.ci.has_value() ? nlohmann::json(*rep.ci) : nlohmann::json(nullptr);
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [t, bs] : rep.brier_curve) curve.push_back({t, bs});
    j["brier_curve"] = curve;
    clidetail::open_out(args.out) << j.dump(2) << "\n";

    if (!args.curve_out.empty()) {
        auto out = clidetail::open_out(args.curve_out);
        out << "t,brier\n";
        for (const auto& [t, bs] : rep.brier_curve)
            out << clidetail::fmt(t) << "," << clidetail::fmt(bs) << "\n";
    }
    std::cout << "evaluate: CI="
              << (rep.ci.has_value() ? clidetail::fmt(*rep.ci) : std::string("undefined"))
              << " IBS=" << clidetail::fmt(rep.ibs) << " -> " << args.out << "\n";
}

struct TuneArgs {
    CommonArgs common;
    std::string input;
    std::string eta_grid = "-4,-3,-2,-1,0,1,2,3,4";
    int folds = 5;
    std::string out = "tune.csv";
};

inline void cmd_tune(const TuneArgs& args) {
    const Dataset data = load_csv(args.input, args.common.schema());
    const std::vector<double> etas = clidetail::parse_grid(args.eta_grid);
    const TuneResult result = tune_kappa(data, etas, args.folds,
                                         args.common.to_fit_config(), args.common.seed);

    auto out = clidetail::open_out(args.out);
    out << "eta,kappa,mean_ci,mean_ibs,defined_folds\n";
    for (const TuneRow& row : result.table) {
        out << clidetail::fmt(row.eta) << "," << clidetail::fmt(row.kappa) << ","
            << (row.mean_ci.has_value() ? clidetail::fmt(*row.mean_ci) : std::string()) << ","
            << clidetail::fmt(row.mean_ibs) << "," << row.defined_folds << "\n";
    }
    std::cout << "tune: best eta=" << clidetail::fmt(result.best_eta)
              << " kappa=" << clidetail::fmt(result.best_kappa) << " -> " << args.out << "\n";
}

struct SimulateArgs {
    std::string preset_name = "planar";
    int p = 2;
    int n = 500;
    std::uint64_t seed = 0;
    std::string out = "simulated.csv";
};

inline void cmd_simulate(const SimulateArgs& args) {
    SimConfig cfg = preset(args.preset_name, args.p);
    cfg.n = args.n;
    cfg.seed = args.seed;
    const Dataset d = simulate(cfg);

    auto out = clidetail::open_out(args.out);
    for (int j = 0; j < d.p(); ++j) out << d.covariate_names[j] << ",";
    out << "time,status\n";
    int censored = 0;
    for (int i = 0; i < d.n(); ++i) {
        for (int j = 0; j < d.p(); ++j) out << clidetail::fmt(d.x(i, j)) << ",";
        out << clidetail::fmt(d.time(i)) << "," << d.status[i] << "\n";
        if (d.status[i] == 0) ++censored;
    }
    const double frac = static_cast<double>(censored) / d.n();

    nlohmann::json side{{"preset", args.preset_name}, {"p", args.p},
                        {"n", args.n},               {"seed", args.seed},
                        {"censored_fraction", frac}, {"family",
                         cfg.hazard.family == HazardFamily::weibull ? "weibull"
                                                                    : "constant-rate"}};
    clidetail::open_out(args.out + ".config.json") << side.dump(2) << "\n";
    std::cout << "simulate: " << d.n() << " rows, censored fraction "
              << clidetail::fmt(frac) << " -> " << args.out << "\n";
}

inline void add_common_flags(CLI::App* cmd, CommonArgs& c, bool with_model_params = true) {
    cmd->add_option("--time-col", c.time_col, "Time column name");
    cmd->add_option("--status-col", c.status_col, "Status column name");
    cmd->add_option("--exclude-cols", c.exclude, "Columns to ignore");
    if (!with_model_params) return;
    cmd->add_option("--kernel", c.kernel, "linear|quad|poly:d,c|gauss[:sigma2]");
    cmd->add_option("--kappa", c.kappa, "Ridge tuning factor");
    cmd->add_option_function<double>(
        "--eta", [&c](const double& v) { c.eta = v; }, "log(kappa), overrides --kappa");
    cmd->add_option("--epsilon", c.epsilon, "Hinge margin");
    cmd->add_option("--zeta1", c.zeta1, "Pure percentile cutoff");
    cmd->add_option("--zeta2", c.zeta2, "Mixed percentile cutoff");
    cmd->add_option("--min-node", c.min_node, "Minimum node size to split");
    cmd->add_option("--min-child", c.min_child, "Minimum child size");
    cmd->add_option("--alpha-c", c.alpha_c, "Split-complexity penalty");
    cmd->add_option("--bootstrap", c.bootstrap, "Bootstrap resamples for selection");
    cmd->add_option("--prune-fraction", c.prune_fraction,
                    "Validation share of the training data");
    cmd->add_option("--seed", c.seed, "RNG seed");
    cmd->add_option("--qp-tol", c.qp.tol, "QP residual tolerance");
    cmd->add_option("--qp-max-iter", c.qp.max_iter, "QP iteration cap");
    cmd->add_option("--qp-rho", c.qp.rho, "QP step parameter");
}

// Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Survival trees split by a kernelized dipole SVM"};
    app.require_subcommand(1);

    FitArgs fit;
    CLI::App* cmd = app.add_subcommand("fit", "Grow, prune and save a survival tree");
    cmd->add_option("input", fit.input, "Training CSV")->required();
    cmd->add_option("--out", fit.out, "Model file path");
    cmd->add_option("--report-out", fit.report_out, "Fit report JSON path");
    add_common_flags(cmd, fit.common);
    cmd->callback([&fit] { cmd_fit(fit); });

    PredictArgs pred;
    cmd = app.add_subcommand("predict", "Predict leaf medians for a CSV");
    cmd->add_option("model", pred.model, "Model file")->required();
    cmd->add_option("input", pred.input, "Input CSV")->required();
    cmd->add_option("--out", pred.out, "Predictions CSV path");
    add_common_flags(cmd, pred.common, false);
    cmd->callback([&pred] { cmd_predict(pred); });

    EvaluateArgs ev;
    cmd = app.add_subcommand("evaluate", "Score a model on a test CSV");
    cmd->add_option("model", ev.model, "Model file")->required();
    cmd->add_option("input", ev.input, "Test CSV")->required();
    cmd->add_option("--out", ev.out, "Report JSON path");
    cmd->add_option("--curve-out", ev.curve_out, "Brier curve CSV path");
    add_common_flags(cmd, ev.common, false);
    cmd->callback([&ev] { cmd_evaluate(ev); });

    TuneArgs tune;
    cmd = app.add_subcommand("tune", "Cross-validate an eta = log(kappa) grid");
    cmd->add_option("input", tune.input, "Training CSV")->required();
    cmd->add_option("--eta-grid", tune.eta_grid, "Comma-separated eta values");
    cmd->add_option("--folds", tune.folds, "CV folds");
    cmd->add_option("--out", tune.out, "CV table CSV path");
    add_common_flags(cmd, tune.common);
    cmd->callback([&tune] { cmd_tune(tune); });

    SimulateArgs sim;
    cmd = app.add_subcommand("simulate", "Generate survival data from a hazard preset");
    cmd->add_option("--preset", sim.preset_name,
                    "planar|parabolic|elliptical|hyperbolic|weibull-elliptical");
    cmd->add_option("--p", sim.p, "Covariate dimension (2, 4 or 7)");
    cmd->add_option("--n", sim.n, "Sample size");
    cmd->add_option("--seed", sim.seed, "RNG seed");
    cmd->add_option("--out", sim.out, "Output CSV path");
    cmd->callback([&sim] { cmd_simulate(sim); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const LabelingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

}  // namespace dipoletree
