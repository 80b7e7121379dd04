#include "driftdr/cli.hpp"

#include "driftdr/csv.hpp"
#include "driftdr/data_model.hpp"
#include "driftdr/estimators.hpp"
#include "driftdr/nuisance.hpp"
#include "driftdr/report.hpp"
#include "driftdr/rng.hpp"
#include "driftdr/simulation.hpp"
#include "driftdr/smoothing.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftdr::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kAllEstimators = "unadjusted,aipw,tmle,daipw,dtmle";
constexpr double kReferenceTheta0 = 0.2328;
constexpr double kTheta0Tolerance = 0.005;

/// Signals a usage problem (exit 2) rather than a runtime failure (exit 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void configure_logging() {
    spdlog::drop("driftdr");
    auto logger = spdlog::stderr_logger_mt("driftdr");
    logger->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("DRIFTDR_LOG"); env && *env) {
        const std::string name(env);
        const auto parsed = spdlog::level::from_str(name);
        // from_str maps unknown names to off; only accept "off" when spelled out
        if (parsed != spdlog::level::off || name == "off") {
            level = parsed;
        } else {
            logger->warn("DRIFTDR_LOG='{}' is not a log level; using warn", name);
        }
    }
    logger->set_level(level);
    spdlog::set_default_logger(std::move(logger));
}

void print_error(const std::string& command, const std::string& message) {
    Json e;
    e["command"] = command;
    e["error"] = message;
    std::cerr << e.dump() << std::endl;
}

std::string dump_value(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

/// '#'-prefixed key=value lines; csv::read skips them.
std::string comment_header(const std::string& command, const Json& config) {
    std::string out = "# driftdr " + command + "\n";
    for (const auto& [k, v] : config.items()) out += "# " + k + "=" + dump_value(v) + "\n";
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void require_readable(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw UsageError(std::string(what) + " '" + path + "' is not readable");
}

void require_parent_dir(const std::string& path, const char* what) {
    const fs::path parent = fs::absolute(fs::path(path)).parent_path();
    if (!fs::is_directory(parent)) {
        throw UsageError(std::string(what) + " directory '" + parent.string() + "' does not exist");
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir + "'");
}

std::string join(const std::vector<std::string>& xs, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::string> estimator_names(const std::vector<EstimatorKind>& ks) {
    std::vector<std::string> out;
    for (auto k : ks) out.emplace_back(to_string(k));
    return out;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string data;
    std::string arm_col;
    std::string outcome_col;
    std::string miss_col;
    bool derive_missing = false;
    std::vector<std::string> covariates;
    std::string estimators = kAllEstimators;
    double alpha = 0.05;
    double trunc = kDefaultTruncation;
    std::uint64_t seed = 20240101;
    std::string out;
    std::string plot_data;
    std::string reference_arm;
    std::string outcome_bounds = "auto";
    std::string kernel = "epanechnikov";
    std::string learner_ga = "main_terms";
    std::string learner_gm = "stacking";
    std::string learner_m = "stacking";
    int interaction_order = 2;
    int folds = 10;
    int max_iter = 100;
    std::string lambda_update = "fixed";
};

Json learner_summary(const FittedLearner& f) {
    Json j;
    j["kind"] = to_string(f.kind);
    if (f.kind == LearnerKind::known_constant) j["constant"] = f.constant;
    if (f.kind == LearnerKind::logistic_main_terms || f.kind == LearnerKind::logistic_lasso) {
        j["interaction_order"] = f.design.interaction_order;
        j["intercept"] = number(f.intercept);
        j["n_features"] = f.coefficients.size();
        j["nonzero_coefficients"] = (f.coefficients.array() != 0.0).count();
    }
    if (f.lambda) j["lambda"] = *f.lambda;
    if (f.kind == LearnerKind::stacking_ensemble) {
        Json members = Json::array();
        for (std::size_t k = 0; k < f.members.size(); ++k) {
            Json m = learner_summary(f.members[k]);
            Json entry;
            entry["name"] = k < f.member_names.size() ? f.member_names[k] : std::string("member");
            entry["weight"] = k < f.weights.size() ? f.weights[k] : 0.0;
            for (const auto& [key, v] : m.items()) entry[key] = v;
            members.push_back(std::move(entry));
        }
        j["members"] = std::move(members);
    }
    j["separation"] = f.separation;
    return j;
}

Json estimate_json(const EstimateResult& r, std::size_t n, bool raw_only) {
    Json j;
    j["estimator"] = to_string(r.estimator);
    const double z_se = std::sqrt(static_cast<double>(n));
    j["theta_hat"] = number(r.theta_raw);
    j["sigma_hat"] = number(r.sigma_raw);
    j["std_error"] = number(r.sigma_raw / z_se);
    j["ci_lower"] = number(r.ci_lo_raw);
    j["ci_upper"] = number(r.ci_hi_raw);
    j["alpha"] = r.alpha;
    if (!raw_only) {
        j["theta_hat_bounded"] = number(r.theta);
        j["sigma_hat_bounded"] = number(r.sigma);
    }
    j["drift_hat"] = r.drift ? number(raw_only ? *r.drift : r.scale * *r.drift) : Json(nullptr);
    Json conv;
    conv["converged"] = r.converged;
    if (r.diagnostics) {
        const auto& s = *r.diagnostics;
        conv["iterations"] = s.iteration;
        conv["max_abs_epsilon"] = number(s.max_abs());
        conv["tolerance"] = dtmle_tolerance(n);
        conv["epsilon"] = {{"eps_a", number(s.eps_a)},
                           {"eps_m", number(s.eps_m)},
                           {"eps_y1", number(s.eps_y1)},
                           {"eps_y2", number(s.eps_y2)}};
    }
    j["convergence"] = std::move(conv);
    j["separation"] = r.separation;
    j["heuristic_inference"] = r.heuristic_inference;
    j["degenerate"] = r.degenerate;
    j["warnings"] = r.warnings;
    return j;
}

std::optional<OutcomeBounds> parse_bounds(const std::string& spec, const Dataset& d) {
    if (spec == "auto") {
        for (const auto& r : d.records()) {
            if (r.y && !(*r.y >= 0.0 && *r.y <= 1.0)) return std::nullopt;
        }
        return OutcomeBounds{0.0, 1.0, BoundsSource::already_unit};
    }
    if (spec == "data") return std::nullopt;
    if (spec == "unit") return OutcomeBounds{0.0, 1.0, BoundsSource::already_unit};
    const auto parts = split_list(spec);
    double lo = 0, hi = 0;
    if (parts.size() != 2 || !csv::parse_double(parts[0], lo) || !csv::parse_double(parts[1], hi)) {
        throw UsageError("--outcome-bounds must be auto, data, unit or LO,HI");
    }
    return OutcomeBounds{lo, hi, BoundsSource::user_supplied};
}

int cmd_estimate(const EstimateArgs& a) {
    // Validation happens before any model fitting.
    if (!(a.alpha > 0.0 && a.alpha < 0.5)) throw UsageError("--alpha must lie in (0, 0.5)");
    if (!(a.trunc > 0.0 && a.trunc < 0.5)) throw UsageError("--trunc must lie in (0, 0.5)");
    if (a.interaction_order < 1) throw UsageError("--interaction-order must be at least 1");
    if (a.folds < 2) throw UsageError("--folds must be at least 2");
    if (a.max_iter < 1) throw UsageError("--max-iter must be at least 1");
    require_readable(a.data, "data file");
    require_parent_dir(a.out, "output");
    const std::string plot_path =
        a.plot_data.empty() ? fs::path(a.out).replace_extension("").string() + "_plot.csv" : a.plot_data;
    require_parent_dir(plot_path, "plot-data");

    std::vector<EstimatorKind> kinds;
    KernelType kernel{};
    LambdaUpdate lambda_update{};
    NuisanceSpec spec;
    try {
        kinds = parse_estimators(a.estimators);
        kernel = kernel_from_string(a.kernel);
        lambda_update = lambda_update_from_string(a.lambda_update);
        spec.g_a.choice = learner_choice_from_string(a.learner_ga);
        spec.g_m.choice = learner_choice_from_string(a.learner_gm);
        spec.m.choice = learner_choice_from_string(a.learner_m);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    for (LearnerSpec* ls : {&spec.g_a, &spec.g_m, &spec.m}) {
        if (ls->choice == LearnerChoice::known_constant) {
            throw UsageError("known_constant learners are not available from the command line");
        }
        ls->interaction_order = a.interaction_order;
        ls->folds = a.folds;
    }

    const csv::Table header_probe = csv::read_file(a.data);
    CsvSchema schema;
    schema.arm_col = a.arm_col;
    schema.outcome_col = a.outcome_col;
    if (!a.miss_col.empty()) schema.miss_col = a.miss_col;
    for (const auto& col : {a.arm_col, a.outcome_col}) header_probe.column(col);
    if (schema.miss_col) header_probe.column(*schema.miss_col);
    schema.covariates = a.covariates;
    if (schema.covariates.empty()) {
        for (const auto& h : header_probe.header) {
            if (h != a.arm_col && h != a.outcome_col && h != a.miss_col) schema.covariates.push_back(h);
        }
    }
    if (schema.covariates.empty()) throw UsageError("no covariate columns");

    const auto levels = arm_levels(a.data, a.arm_col);
    if (levels.size() < 2) throw UsageError("arm column '" + a.arm_col + "' has fewer than two levels");
    std::string reference = a.reference_arm;
    if (reference.empty()) {
        reference = std::find(levels.begin(), levels.end(), "0") != levels.end() ? "0" : levels.front();
    } else if (std::find(levels.begin(), levels.end(), reference) == levels.end()) {
        throw UsageError("--reference-arm '" + reference + "' is not an arm level");
    }

    // Bounds are resolved once so every arm shares the same working scale.
    schema.target_arm = levels.front();
    const Dataset probe = load_csv(a.data, schema);
    const OutcomeBounds bounds = bound_outcomes(probe, parse_bounds(a.outcome_bounds, probe)).second;

    EstimatorOptions opt;
    opt.alpha = a.alpha;
    opt.smoother.kernel = kernel;
    opt.smoother.folds = a.folds;
    opt.max_iter = a.max_iter;
    opt.lambda_update = lambda_update;
    opt.bounds = bounds;

    Json config;
    config["command"] = "estimate";
    config["data"] = a.data;
    config["arm_col"] = a.arm_col;
    config["outcome_col"] = a.outcome_col;
    config["missingness"] = schema.miss_col ? "column:" + *schema.miss_col : std::string("derived:blank-outcome");
    config["covariates"] = join(schema.covariates);
    config["estimators"] = join(estimator_names(kinds));
    config["alpha"] = a.alpha;
    config["trunc"] = a.trunc;
    config["seed"] = a.seed;
    config["out"] = a.out;
    config["plot_data"] = plot_path;
    config["reference_arm"] = reference;
    config["outcome_bounds"] = a.outcome_bounds;
    config["kernel"] = to_string(kernel);
    config["learner_ga"] = to_string(spec.g_a.choice);
    config["learner_gm"] = to_string(spec.g_m.choice);
    config["learner_m"] = to_string(spec.m.choice);
    config["interaction_order"] = a.interaction_order;
    config["folds"] = a.folds;
    config["max_iter"] = a.max_iter;
    config["lambda_update"] = to_string(lambda_update);
    config["rng"] = kRngDescription;

    const bool needs_nuisance = std::any_of(kinds.begin(), kinds.end(), [](auto k) { return k != EstimatorKind::unadjusted; });
    const bool needs_lambda = std::any_of(kinds.begin(), kinds.end(),
                                          [](auto k) { return k == EstimatorKind::daipw || k == EstimatorKind::dtmle; });

    Json arms = Json::array();
    std::vector<std::vector<EstimateResult>> results(levels.size());
    std::size_t n_rows = 0;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        schema.target_arm = levels[l];
        const auto [d, used] = bound_outcomes(load_csv(a.data, schema), bounds);
        n_rows = d.n();
        Json arm;
        arm["arm"] = levels[l];
        arm["n_in_arm"] = static_cast<std::size_t>(d.arm().sum());
        arm["n_observed_in_arm"] = static_cast<std::size_t>(d.arm().cwiseProduct(d.observed()).sum());
        spdlog::info("arm {}: {} rows in arm", levels[l], static_cast<std::size_t>(d.arm().sum()));

        std::optional<NuisanceValues> nu;
        std::optional<LambdaFit> lambda;
        if (needs_nuisance) {
            const auto fit = fit_nuisance(d, spec, a.trunc, derive_seed(a.seed, l));
            nu = fit.evaluate(d);
            arm["nuisance"] = {{"g_a", learner_summary(fit.g_a)},
                               {"g_m", learner_summary(fit.g_m)},
                               {"m", learner_summary(fit.m)}};
            if (needs_lambda) {
                lambda = fit_lambda(d, *nu, opt.smoother);
                Json bw;
                const std::pair<const char*, const KernelSmoother*> smoothers[] = {
                    {"gamma_a", &lambda->gamma_a}, {"gamma_m", &lambda->gamma_m}, {"r_a", &lambda->r_a},
                    {"r_m", &lambda->r_m}, {"e", &lambda->e}};
                for (const auto& [name, s] : smoothers) bw[name] = s->bandwidth();
                arm["lambda_bandwidths"] = std::move(bw);
            }
        }
        Json ests = Json::array();
        for (auto k : kinds) {
            const NuisanceValues empty;
            auto r = estimate(k, d, nu ? *nu : empty, opt, lambda ? &*lambda : nullptr);
            ests.push_back(estimate_json(r, d.n(), false));
            results[l].push_back(std::move(r));
        }
        arm["estimates"] = std::move(ests);
        arms.push_back(std::move(arm));
    }

    const std::size_t ref = static_cast<std::size_t>(std::find(levels.begin(), levels.end(), reference) - levels.begin());
    Json contrasts = Json::array();
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (l == ref) continue;
        Json c;
        c["arm"] = levels[l];
        c["reference"] = reference;
        Json ests = Json::array();
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            ests.push_back(estimate_json(contrast(results[l][k], results[ref][k]), n_rows, true));
        }
        c["estimates"] = std::move(ests);
        contrasts.push_back(std::move(c));
    }

    Json out;
    out["config"] = config;
    out["n"] = n_rows;
    out["outcome_bounds"] = {{"lo", bounds.lo}, {"hi", bounds.hi}, {"source", to_string(bounds.source)}};
    out["arms"] = std::move(arms);
    out["contrasts"] = std::move(contrasts);

    std::ostringstream plot;
    plot << comment_header("estimate", config);
    csv::write_row(plot, {"arm", "estimator", "theta_hat", "ci_lower", "ci_upper", "sigma_hat", "converged"});
    for (std::size_t l = 0; l < levels.size(); ++l) {
        for (const auto& r : results[l]) {
            csv::write_row(plot, {levels[l], to_string(r.estimator), csv::format_double(r.theta_raw),
                                  csv::format_double(r.ci_lo_raw), csv::format_double(r.ci_hi_raw),
                                  csv::format_double(r.sigma_raw), r.converged ? "1" : "0"});
        }
    }
    write_file(a.out, out.dump(2) + "\n");
    write_file(plot_path, plot.str());
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string scenarios = "a,b,c,d";
    std::vector<std::size_t> n_grid = {200, 800, 1800, 3200};
    int reps = 500;
    std::string estimators = kAllEstimators;
    std::uint64_t seed = 20240101;
    int jobs = 1;
    std::string out_dir = "sim_out";
    bool check_theta0 = false;
    double trunc = kDefaultTruncation;
    std::size_t truth_draws = 10'000'000;
    std::string w5 = "eps5_eps4";
    std::string lambda_update = "fixed";
};

W5Reading w5_from_string(const std::string& s) {
    if (s == "eps5_eps4") return W5Reading::eps5_eps4;
    if (s == "eps5_eps6") return W5Reading::eps5_eps6;
    throw UsageError("--w5 must be eps5_eps4 or eps5_eps6");
}

int cmd_simulate(const SimulateArgs& a) {
    StudyConfig cfg;
    try {
        cfg.scenarios = parse_scenarios(a.scenarios);
        cfg.estimators = parse_estimators(a.estimators);
        cfg.estimator_options.lambda_update = lambda_update_from_string(a.lambda_update);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (a.reps < 2) throw UsageError("--reps must be at least 2");
    if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
    if (a.n_grid.empty()) throw UsageError("--n-grid is empty");
    for (auto n : a.n_grid) {
        if (n < 50) throw UsageError("every --n-grid value must be at least 50");
    }
    if (!(a.trunc > 0.0 && a.trunc < 0.5)) throw UsageError("--trunc must lie in (0, 0.5)");
    if (a.truth_draws < 1'000'000) throw UsageError("--truth-draws must be at least 1000000");
    cfg.n_grid = a.n_grid;
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    cfg.truncation = a.trunc;
    cfg.truth_draws = a.truth_draws;
    cfg.w5 = w5_from_string(a.w5);
    ensure_dir(a.out_dir);

    std::vector<std::string> scen, grid;
    for (const auto& s : cfg.scenarios) scen.emplace_back(1, s.id);
    for (auto n : cfg.n_grid) grid.push_back(std::to_string(n));
    Json config;
    config["command"] = "simulate";
    config["scenarios"] = join(scen);
    config["n_grid"] = join(grid);
    config["reps"] = cfg.reps;
    config["estimators"] = join(estimator_names(cfg.estimators));
    config["seed"] = cfg.seed;
    config["jobs"] = cfg.jobs;
    config["trunc"] = cfg.truncation;
    config["folds"] = cfg.folds;
    config["alpha"] = cfg.estimator_options.alpha;
    config["lambda_update"] = to_string(cfg.estimator_options.lambda_update);
    config["w5"] = to_string(cfg.w5);
    config["truth_draws"] = cfg.truth_draws;
    config["rng"] = kRngDescription;

    const auto truth = study_truth(cfg);
    std::printf("theta0 = %.6f (naive complete-case contrast %.6f)\n", truth.theta, truth.naive_contrast());
    if (a.check_theta0) {
        const bool ok = std::fabs(truth.theta - kReferenceTheta0) <= kTheta0Tolerance;
        std::printf("check-theta0: %.6f vs %.4f +/- %.3f: %s\n", truth.theta, kReferenceTheta0, kTheta0Tolerance,
                    ok ? "PASS" : "FAIL");
        std::fflush(stdout);
        if (!ok) {
            char msg[160];
            std::snprintf(msg, sizeof msg, "theta0 %.6f is outside %.4f +/- %.3f", truth.theta, kReferenceTheta0,
                          kTheta0Tolerance);
            throw std::runtime_error(msg);
        }
    }
    const double bound = study_bound(cfg);
    std::printf("efficiency bound = %.6f\n", bound);
    std::fflush(stdout);
    config["theta0"] = truth.theta;
    config["efficiency_bound"] = bound;

    const fs::path rep_path = fs::path(a.out_dir) / "replicates.csv";
    std::ofstream reps(rep_path, std::ios::binary | std::ios::trunc);
    if (!reps) throw std::runtime_error("cannot open '" + rep_path.string() + "' for writing");
    reps << comment_header("simulate", config);
    write_replicate_header(reps);
    reps.flush();

    StudyCallbacks cb;
    cb.on_replicate = [&](const ReplicateOutcome& r) {
        write_replicate_rows(reps, r);
        reps.flush();
    };
    cb.on_block = [&](char s, std::size_t n, std::size_t failures) {
        std::printf("scenario %c n=%zu: %d replicates, %zu failed\n", s, n, cfg.reps, failures);
        std::fflush(stdout);
    };
    const auto report = run_study(cfg, truth.theta, bound, cb);
    reps.close();
    if (!reps) throw std::runtime_error("failed writing '" + rep_path.string() + "'");

    std::ostringstream agg;
    Json agg_config = config;
    agg_config["attempted"] = report.attempted;
    agg_config["failures"] = report.failures;
    agg << comment_header("simulate", agg_config);
    write_aggregate(agg, report.metrics);
    write_file(fs::path(a.out_dir) / "aggregate.csv", agg.str());
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::string in;
    std::string out_dir = "report";
    bool svg = false;
};

int cmd_report(const ReportArgs& a) {
    require_readable(a.in, "aggregate file");
    ensure_dir(a.out_dir);
    const auto rows = read_aggregate(a.in);
    if (rows.empty()) throw std::runtime_error("aggregate file '" + a.in + "' has no rows");

    Json config;
    config["command"] = "report";
    config["in"] = a.in;
    config["out_dir"] = a.out_dir;
    config["svg"] = a.svg;
    const std::string header = comment_header("report", config);

    for (Metric m : kAllMetrics) {
        const auto p = panel(rows, m);
        std::ostringstream os;
        os << header;
        write_panel_csv(os, p);
        write_file(fs::path(a.out_dir) / (std::string("panel_") + to_string(m) + ".csv"), os.str());
        if (a.svg) {
            std::string comment = header;
            // "--" may not appear inside an XML comment
            for (std::size_t pos; (pos = comment.find("--")) != std::string::npos;) comment.replace(pos, 2, "- -");
            write_file(fs::path(a.out_dir) / (std::string("panel_") + to_string(m) + ".svg"),
                       svg_chart(p, m) + "<!--\n" + comment + "-->\n");
        }
    }
    write_file(fs::path(a.out_dir) / "summary.txt", header + summary_table(rows));
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    configure_logging();
    CLI::App app{"Doubly robust estimation of treatment-arm means with missing outcomes"};
    app.require_subcommand(1);

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate arm means and contrasts from a CSV file");
    est->add_option("--data", ea.data, "Input CSV")->required();
    est->add_option("--arm-col", ea.arm_col, "Arm column")->required();
    est->add_option("--outcome-col", ea.outcome_col, "Outcome column; blank cells are missing")->required();
    auto* miss = est->add_option("--miss-col", ea.miss_col, "0/1 outcome-observed column");
    auto* derive = est->add_flag("--derive-missing", ea.derive_missing,
                                 "Treat blank outcome cells as missing (default when --miss-col is absent)");
    miss->excludes(derive);
    est->add_option("--covariates", ea.covariates, "Covariate columns (default: every other column)")->delimiter(',');
    est->add_option("--estimators", ea.estimators, "Comma list of unadjusted,aipw,tmle,daipw,dtmle")
        ->capture_default_str();
    est->add_option("--alpha", ea.alpha, "Interval level alpha in (0, 0.5)")->capture_default_str();
    est->add_option("--trunc", ea.trunc, "Truncation level for g_A and g_M")->capture_default_str();
    est->add_option("--seed", ea.seed, "Master seed")->capture_default_str();
    est->add_option("--out", ea.out, "Result JSON path")->required();
    est->add_option("--plot-data", ea.plot_data, "Plot-data CSV path (default: <out>_plot.csv)");
    est->add_option("--reference-arm", ea.reference_arm, "Reference level for contrasts (default: 0 or first level)");
    est->add_option("--outcome-bounds", ea.outcome_bounds, "auto, data, unit or LO,HI")->capture_default_str();
    est->add_option("--kernel", ea.kernel, "epanechnikov or gaussian")->capture_default_str();
    est->add_option("--learner-ga", ea.learner_ga, "main_terms, lasso or stacking")->capture_default_str();
    est->add_option("--learner-gm", ea.learner_gm, "main_terms, lasso or stacking")->capture_default_str();
    est->add_option("--learner-m", ea.learner_m, "main_terms, lasso or stacking")->capture_default_str();
    est->add_option("--interaction-order", ea.interaction_order, "Lasso interaction order")->capture_default_str();
    est->add_option("--folds", ea.folds, "Cross-validation folds")->capture_default_str();
    est->add_option("--max-iter", ea.max_iter, "DTMLE iteration cap")->capture_default_str();
    est->add_option("--lambda-update", ea.lambda_update, "fixed, refit or reselect")->capture_default_str();

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo study");
    sim->add_option("--scenarios", sa.scenarios, "Comma list of a,b,c,d")->capture_default_str();
    sim->add_option("--n-grid", sa.n_grid, "Comma list of sample sizes")->delimiter(',')->capture_default_str();
    sim->add_option("--reps", sa.reps, "Replicates per (scenario, n)")->capture_default_str();
    sim->add_option("--estimators", sa.estimators, "Comma list of estimators")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
    sim->add_option("--jobs", sa.jobs, "Concurrent replicates")->capture_default_str();
    sim->add_option("--out-dir", sa.out_dir, "Output directory")->capture_default_str();
    sim->add_flag("--check-theta0", sa.check_theta0, "Fail unless the true mean is within 0.005 of 0.2328");
    sim->add_option("--trunc", sa.trunc, "Truncation level for g_A and g_M")->capture_default_str();
    sim->add_option("--truth-draws", sa.truth_draws, "Monte Carlo draws for the truth and bound")
        ->capture_default_str();
    sim->add_option("--w5", sa.w5, "W5 construction: eps5_eps4 or eps5_eps6")->capture_default_str();
    sim->add_option("--lambda-update", sa.lambda_update, "fixed, refit or reselect")->capture_default_str();

    ReportArgs ra;
    auto* rep = app.add_subcommand("report", "Tables and charts from an aggregate CSV");
    rep->add_option("--in", ra.in, "aggregate.csv from simulate")->required();
    rep->add_option("--out-dir", ra.out_dir, "Output directory")->capture_default_str();
    rep->add_flag("--svg", ra.svg, "Also write SVG charts");

    std::string command = "driftdr";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        for (auto* sub : app.get_subcommands()) command = sub->get_name();
        print_error(command, e.what());
        return 2;
    }
    command = app.get_subcommands().front()->get_name();

    try {
        if (est->parsed()) return cmd_estimate(ea);
        if (sim->parsed()) return cmd_simulate(sa);
        return cmd_report(ra);
    } catch (const UsageError& e) {
        print_error(command, e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error(command, e.what());
        return 1;
    }
}

}  // namespace driftdr::cli
