#pragma once

// Regression learners for the nuisance functions: IRLS logistic regression,
// L1-penalised logistic regression over interaction-expanded designs and a
// cross-validated convex stacking ensemble. All three accept fractional
// responses in [0,1] through the quasi-binomial log-likelihood.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftdr {

struct DesignSpec {
    int interaction_order = 1;
    bool include_intercept = true;
    bool standardize = false;
};

/// Index tuples (0-based, increasing) of every product of 1..order distinct
/// covariates, ordered by degree and then lexicographically.
std::vector<std::vector<int>> design_terms(int p, int order);

Eigen::VectorXd expand_design(std::span<const double> w, const DesignSpec& spec);
Eigen::MatrixXd expand_design(const Eigen::MatrixXd& w, const DesignSpec& spec);

// ---------------------------------------------------------------------------
// IRLS

struct IrlsOptions {
    double tol = 1e-10;
    int max_iter = 100;
    /// |coefficient| above this on the logit scale is treated as separation.
    double coefficient_cap = 40.0;
};

struct LogisticFit {
    Eigen::VectorXd coefficients;
    int iterations = 0;
    bool converged = false;
    /// Coefficients were capped because the likelihood had no finite maximum.
    bool separation = false;
};

/// Maximises sum_i w_i {y_i log mu_i + (1 - y_i) log(1 - mu_i)} with
/// logit mu = offset + X beta. X carries its own intercept column if wanted.
/// Columns that are identically zero keep a zero coefficient.
LogisticFit fit_logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* offset = nullptr,
                              const Eigen::VectorXd* weights = nullptr, const IrlsOptions& opt = {});

// ---------------------------------------------------------------------------
// Lasso

struct LassoOptions {
    /// Convergence when every weighted squared coefficient change
    /// x_j'Vx_j/n * (delta beta_j)^2 falls below tol (standardised scale).
    double tol = 1e-7;
    int max_outer = 100;
    int max_sweeps = 10000;
    int n_lambda = 50;
    double lambda_min_ratio = 1e-4;
    /// Stop a path once the fractional deviance change per step drops below
    /// 1e-5 (the remaining grid reuses the last solution).
    bool early_stop = true;
};

/// Columns centred and scaled to unit population SD. Constant columns get
/// scale 0 and are never entered.
struct StandardizedDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd center;
    Eigen::VectorXd scale;

    static StandardizedDesign from(const Eigen::MatrixXd& raw);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

/// Coefficients on the standardised scale.
struct LassoSolution {
    double intercept = 0.0;
    Eigen::VectorXd beta;
    int outer_iterations = 0;
    bool converged = false;
};

/// Minimises -loglik/n + lambda * |beta|_1 on the standardised design, with an
/// unpenalised intercept, starting from `warm` when given.
LassoSolution solve_lasso(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y, double lambda,
                          const LassoSolution* warm = nullptr, const LassoOptions& opt = {});

/// Smallest lambda with an all-zero solution, for a standardised design.
double lambda_max(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y);

/// n_lambda log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(const Eigen::MatrixXd& xs, const Eigen::VectorXd& y, int n_lambda,
                                double ratio);

struct LassoCvFit {
    /// Coefficients on the original feature scale.
    double intercept = 0.0;
    Eigen::VectorXd beta;
    std::vector<double> lambdas;
    std::vector<double> cv_deviance;
    std::size_t selected = 0;
    double lambda() const { return lambdas[selected]; }
};

/// Stratified K-fold assignment (folds labelled 0..k-1). Rows are grouped by
/// response stratum (y == 0, y == 1, fractional), shuffled and dealt in turn.
std::vector<int> stratified_folds(const Eigen::VectorXd& y, int k, std::uint64_t seed);

/// Cyclic coordinate descent along `grid` (strictly decreasing, non-empty)
/// with warm starts; lambda picked by K-fold cross-validated deviance.
LassoCvFit fit_logistic_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<double> grid,
                              int folds, std::uint64_t seed, const LassoOptions& opt = {});

// ---------------------------------------------------------------------------
// Fitted learners and stacking

enum class LearnerKind { logistic_main_terms, logistic_lasso, stacking_ensemble, known_constant };

const char* to_string(LearnerKind k);

class FittedLearner {
public:
    LearnerKind kind = LearnerKind::known_constant;
    DesignSpec design;
    double intercept = 0.0;
    /// On expanded features, excluding the intercept.
    Eigen::VectorXd coefficients;
    double constant = 0.5;
    std::vector<FittedLearner> members;
    std::vector<std::string> member_names;
    std::vector<double> weights;
    bool separation = false;
    std::optional<double> lambda;

    double predict(std::span<const double> w) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& w) const;
};

FittedLearner known_constant(double value);

/// Main-terms logistic regression with intercept.
FittedLearner fit_main_terms(const Eigen::MatrixXd& w, const Eigen::VectorXd& y);

/// Lasso over the interaction design (intercept handled by the solver).
FittedLearner fit_lasso_learner(const Eigen::MatrixXd& w, const Eigen::VectorXd& y, int interaction_order,
                                int folds, std::uint64_t seed, const LassoOptions& opt = {});

struct LearnerFactory {
    std::string name;
    std::function<FittedLearner(const Eigen::MatrixXd& w, const Eigen::VectorXd& y, std::uint64_t seed)> fit;
};

LearnerFactory main_terms_factory();
LearnerFactory lasso_factory(int interaction_order, int folds, LassoOptions opt = {});
LearnerFactory constant_factory(double value);

enum class StackingLoss { bernoulli_loglik, squared_error };

struct StackingReport {
    std::vector<double> member_cv_risk;
    double ensemble_cv_risk = 0.0;
    std::vector<std::string> dropped;
};

/// Convex combination of library members minimising cross-validated risk.
/// Members that throw while fitting are dropped; if none remain this throws.
FittedLearner fit_stacking(std::span<const LearnerFactory> library, const Eigen::MatrixXd& w,
                           const Eigen::VectorXd& y, int folds, StackingLoss loss, std::uint64_t seed,
                           StackingReport* report = nullptr);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

}  // namespace driftdr
