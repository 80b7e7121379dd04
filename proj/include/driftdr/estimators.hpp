#pragma once

// Estimators of theta = E{m(W)} = E(Y(1)) in the treated arm, with outcomes
// missing at random, and their influence-function based Wald intervals.

#include "driftdr/data_model.hpp"
#include "driftdr/nuisance.hpp"
#include "driftdr/smoothing.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace driftdr {

enum class EstimatorKind { unadjusted, aipw, tmle, daipw, dtmle };

const char* to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& s);
/// Parses a comma-separated list; rejects unknown names and duplicates.
std::vector<EstimatorKind> parse_estimators(const std::string& csv);

/// Per-row covariates of the drift-targeting submodels.
///   w1 = 1/g, w2 = r_a/gamma + r_m/gamma_m (gamma = gamma_a gamma_m),
///   z_a = e/g_a, z_m = e/g.
struct TiltingCovariates {
    Eigen::VectorXd w1, w2, z_a, z_m;

    static TiltingCovariates from(const NuisanceValues& nu, const LambdaValues& lam);
};

struct FluctuationState {
    double eps_a = 0.0;
    double eps_m = 0.0;
    double eps_y1 = 0.0;
    double eps_y2 = 0.0;
    int iteration = 0;
    bool converged = false;

    double max_abs() const;
};

/// 1e-4 * n^(-3/5).
double dtmle_tolerance(std::size_t n);

/// How the DTMLE treats the lambda regressions after its first iteration.
///   fixed:    values from the initial fit are held; only the g's in the
///             covariate denominators move.
///   refit:    smoothers refit against the current nuisances, bandwidths kept.
///   reselect: bandwidths re-chosen by cross-validation at every iteration.
enum class LambdaUpdate { fixed, refit, reselect };

const char* to_string(LambdaUpdate u);
LambdaUpdate lambda_update_from_string(const std::string& s);

struct EstimatorOptions {
    double alpha = 0.05;
    SmootherOptions smoother;
    int max_iter = 100;
    LambdaUpdate lambda_update = LambdaUpdate::fixed;
    /// Leave g_A untouched in the DTMLE (e.g. when it is known by design).
    bool skip_ga_fluctuation = false;
    /// Force every lambda regression to zero (gammas to one).
    bool zero_lambda = false;
    /// Map from the [0,1] working scale back to raw outcome units.
    OutcomeBounds bounds;
};

struct EstimateResult {
    EstimatorKind estimator = EstimatorKind::aipw;
    /// Working ([0,1]) scale.
    double theta = 0.0;
    double sigma = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    Eigen::VectorXd if_values;
    /// Raw outcome scale.
    double theta_raw = 0.0;
    double sigma_raw = 0.0;
    double ci_lo_raw = 0.0;
    double ci_hi_raw = 0.0;
    /// Raw units per working-scale unit.
    double scale = 1.0;
    double alpha = 0.05;
    std::optional<double> drift;
    std::optional<FluctuationState> diagnostics;
    /// Nuisances after targeting (tmle, dtmle).
    std::optional<NuisanceValues> targeted;
    /// Lambda values behind the drift covariates (daipw, dtmle).
    std::optional<LambdaValues> lambda;
    bool converged = true;
    bool separation = false;
    /// Interval lacks a proof of validity (daipw).
    bool heuristic_inference = false;
    /// sigma is zero or undefined (e.g. a single complete case).
    bool degenerate = false;
    std::vector<std::string> warnings;

    std::size_t n() const { return static_cast<std::size_t>(if_values.size()); }
};

/// D(O) = A M / g (Y - m) + m - theta.
double eif(const ObservationRecord& o, const NuisancePoint& nu, double theta);
Eigen::VectorXd eif_values(const Dataset& d, const NuisanceValues& nu, double theta);

/// Row-wise score functions evaluated with the given nuisances and lambda.
///   d_y = A M w2 (Y - m), d_m = A z_m (M - g_m), d_a = z_a (A - g_a).
struct DriftScores {
    Eigen::VectorXd d_y, d_m, d_a;
};
DriftScores drift_scores(const Dataset& d, const NuisanceValues& nu, const LambdaValues& lam);

EstimateResult estimate_unadjusted(const Dataset& d, const EstimatorOptions& opt = {});
EstimateResult estimate_aipw(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt = {});
EstimateResult estimate_tmle(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt = {});

/// Mean of d_y + d_m + d_a.
double estimate_drift(const Dataset& d, const NuisanceValues& nu, const LambdaValues& lam);

/// aipw minus the drift estimate. `lambda` reuses a fit made against `nu`.
EstimateResult estimate_daipw(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt = {},
                              const LambdaFit* lambda = nullptr);

/// Iterated targeting of m, g_M and g_A until max |eps| < dtmle_tolerance(n).
/// `lambda` is the first-iteration fit against `nu` when already available.
EstimateResult estimate_dtmle(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt = {},
                              const LambdaFit* lambda = nullptr);

/// Raw-scale difference r1 - r0 with the differenced influence function.
EstimateResult contrast(const EstimateResult& r1, const EstimateResult& r0);

/// Dispatch by kind; unadjusted ignores the nuisances.
EstimateResult estimate(EstimatorKind kind, const Dataset& d, const NuisanceValues& nu,
                        const EstimatorOptions& opt = {}, const LambdaFit* lambda = nullptr);

}  // namespace driftdr
