#pragma once

// Synthetic trial with informative missingness, nuisance-consistency
// scenarios, and the Monte Carlo study that scores the estimators.

#include "driftdr/data_model.hpp"
#include "driftdr/estimators.hpp"
#include "driftdr/nuisance.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace driftdr {

/// How W5 is built from the exogenous uniforms.
enum class W5Reading { eps5_eps4, eps5_eps6 };

const char* to_string(W5Reading r);

struct DgpConfig {
    std::size_t n = 200;
    std::uint64_t seed = 0;
    double arm_prob = 0.5;
    W5Reading w5 = W5Reading::eps5_eps4;
    /// Every outcome observed (M = 1).
    bool force_observed = false;
};

using Covariates = std::array<double, 6>;

Covariates covariates_from_uniforms(const std::array<double, 6>& eps, W5Reading w5 = W5Reading::eps5_eps4);
double logit_gm0(int a, const Covariates& w);
double logit_m0(int a, const Covariates& w);

/// n >= 50 rows; covariates are named w1..w6.
Dataset generate(const DgpConfig& cfg);

struct Scenario {
    char id = 'a';
    bool m_consistent = true;
    bool gm_consistent = true;

    /// 'a'..'d'; throws otherwise.
    static Scenario from(char id);
    /// Learners used in the study: lasso on order-4 interactions when
    /// consistent, main-terms logistic otherwise; g_A is always main terms.
    NuisanceSpec nuisance_spec(int folds = 10) const;
};

std::vector<Scenario> parse_scenarios(const std::string& csv);

struct TruthSummary {
    /// E m0(1, W).
    double theta = 0.0;
    double theta_arm0 = 0.0;
    double complete_case_arm1 = 0.0;
    double complete_case_arm0 = 0.0;

    double naive_contrast() const { return complete_case_arm1 - complete_case_arm0; }
    double effect() const { return theta - theta_arm0; }
};

/// Monte Carlo over fresh covariate draws (draws >= 1e6). Complete-case means
/// are ratios of E{m0 g_M0} to E{g_M0} within each arm.
TruthSummary true_theta(std::size_t draws, std::uint64_t seed, W5Reading w5 = W5Reading::eps5_eps4);

struct BoundOptions {
    W5Reading w5 = W5Reading::eps5_eps4;
    bool force_observed = false;
    /// Replaces g_A0 = arm_prob in the weight when set.
    std::optional<double> known_g;
};

/// Sample variance of D at the true (g0, m0, theta0) over simulated
/// observations; theta0 is the mean of m0(1, W) over the same draws.
double efficiency_bound(std::size_t draws, std::uint64_t seed, const BoundOptions& opt = {});

struct StudyConfig {
    std::vector<Scenario> scenarios;
    std::vector<std::size_t> n_grid;
    int reps = 500;
    std::vector<EstimatorKind> estimators;
    std::uint64_t seed = 20240101;
    int jobs = 1;
    double truncation = kDefaultTruncation;
    int folds = 10;
    EstimatorOptions estimator_options;
    W5Reading w5 = W5Reading::eps5_eps4;
    std::size_t truth_draws = 10'000'000;
};

struct ReplicateRecord {
    char scenario = 'a';
    std::size_t n = 0;
    int rep = 0;
    EstimatorKind estimator = EstimatorKind::aipw;
    double theta_hat = 0.0;
    double sigma_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool covered = false;
    bool converged = true;
};

struct ReplicateOutcome {
    char scenario = 'a';
    std::size_t n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<ReplicateRecord> records;
    /// Set when the replicate threw or a nuisance logistic fit separated.
    bool failed = false;
    std::string error;
};

/// Seed of replicate k of scenario s at size n.
std::uint64_t replicate_seed(std::uint64_t master, char scenario, std::size_t n, int k);

/// One replicate in isolation; theta0 decides `covered`.
ReplicateOutcome run_replicate(const StudyConfig& cfg, const Scenario& s, std::size_t n, int k, double theta0);

struct MetricRow {
    char scenario = 'a';
    std::size_t n = 0;
    EstimatorKind estimator = EstimatorKind::aipw;
    int reps = 0;
    double mean_theta = 0.0;
    double bias = 0.0;
    /// Monte Carlo standard error of the bias.
    double bias_se = 0.0;
    double coverage = 0.0;
    double scaled_abs_bias = 0.0;
    double scaled_rmse = 0.0;
    double se_ratio = 0.0;
};

struct ScenarioReport {
    double theta0 = 0.0;
    double bound = 0.0;
    std::vector<MetricRow> metrics;
    std::vector<ReplicateOutcome> replicates;
    std::size_t attempted = 0;
    std::size_t failures = 0;
};

/// Metrics (i)-(iv) over non-failed replicates, ordered by (scenario, n, estimator).
std::vector<MetricRow> aggregate(const std::vector<ReplicateOutcome>& reps, double theta0, double bound);

struct StudyCallbacks {
    /// Called in (scenario, n, rep) order as replicates complete.
    std::function<void(const ReplicateOutcome&)> on_replicate;
    /// Called after each (scenario, n) block.
    std::function<void(char scenario, std::size_t n, std::size_t failures)> on_block;
};

/// Truth and bound on streams derived from cfg.seed, cfg.truth_draws draws each.
TruthSummary study_truth(const StudyConfig& cfg);
double study_bound(const StudyConfig& cfg);

/// Truth and bound from cfg.truth_draws draws, then every replicate on
/// cfg.jobs worker threads.
ScenarioReport run_study(const StudyConfig& cfg, const StudyCallbacks& callbacks = {});
ScenarioReport run_study(const StudyConfig& cfg, double theta0, double bound, const StudyCallbacks& callbacks = {});

// CSV layouts (documented in docs/csv_schemas.md).
void write_replicate_header(std::ostream& out);
void write_replicate_rows(std::ostream& out, const ReplicateOutcome& r);
void write_aggregate(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_aggregate(const std::string& path);

}  // namespace driftdr
