#pragma once

// Univariate Nadaraya-Watson smoothing with a cross-validated bandwidth that is
// then undersmoothed, and the five residual/propensity regressions that
// approximate the drift of a doubly robust estimator.

#include "driftdr/data_model.hpp"
#include "driftdr/nuisance.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace driftdr {

enum class KernelType { epanechnikov, gaussian };

const char* to_string(KernelType k);
KernelType kernel_from_string(const std::string& s);

/// K(u) for the unit-bandwidth kernel.
double kernel_weight(KernelType k, double u);

/// |u| beyond which the kernel is treated as zero (Gaussian tails below 2e-22).
double kernel_support(KernelType k);

struct SmootherOptions {
    KernelType kernel = KernelType::epanechnikov;
    int folds = 10;
    int grid_size = 30;
};

class KernelSmoother {
public:
    KernelSmoother(std::vector<double> x, std::vector<double> y, KernelType kernel, double bandwidth_opt);

    KernelType kernel() const noexcept { return kernel_; }
    /// Cross-validation optimum.
    double bandwidth_opt() const noexcept { return h_opt_; }
    /// n^-0.1 * bandwidth_opt, n the number of training points.
    double bandwidth() const noexcept { return h_; }
    std::size_t size() const noexcept { return x_.size(); }
    /// Training points sorted by x.
    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<double>& y() const noexcept { return y_; }

    /// Kernel-weighted mean at x0. An empty window doubles the bandwidth up to
    /// 10 times, then falls back to the mean of the nearest training points.
    double predict(double x0) const;
    Eigen::VectorXd predict(const Eigen::VectorXd& x0) const;

private:
    std::vector<double> x_, y_;
    KernelType kernel_;
    double h_opt_, h_;
};

/// Undersmoothed bandwidth for n training points.
double undersmoothed(double bandwidth_opt, std::size_t n);

/// Nadaraya-Watson fit of y on x over rows with mask true (>= 5 rows).
/// bandwidth_opt minimises K-fold squared prediction error over a log grid
/// spanning [0.01 sd(x), 2 range(x)]; folds are rank(x) mod K.
KernelSmoother fit_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                          const SmootherOptions& opt = {});

/// Same as fit_kernel with bandwidth_opt held fixed (no selection).
KernelSmoother fit_kernel_fixed(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                                KernelType kernel, double bandwidth_opt);

/// Leave-fold-out squared error for each candidate bandwidth (exposed for tests).
std::vector<double> kernel_cv_risk(const std::vector<double>& x_sorted, const std::vector<double>& y_sorted,
                                   KernelType kernel, const std::vector<double>& bandwidths, int folds);

/// The five fitted regressions:
///   gamma_a: A on m(W), all rows
///   gamma_m: M on m(W), rows with A = 1
///   r_a:     (A - g_A)/g_A on m(W), all rows
///   r_m:     (M - g_M)/g on m(W), rows with A = 1
///   e:       Y - m on g(W), rows with A = M = 1
struct LambdaFit {
    KernelSmoother gamma_a;
    KernelSmoother gamma_m;
    KernelSmoother r_a;
    KernelSmoother r_m;
    KernelSmoother e;
};

/// Per-row evaluations; gamma_a and gamma_m are clipped to [0.0005, 0.9995].
struct LambdaValues {
    Eigen::VectorXd gamma_a, gamma_m, r_a, r_m, e;

    /// Identically zero correction (gammas set to 1).
    static LambdaValues zero(std::size_t n);
};

LambdaFit fit_lambda(const Dataset& d, const NuisanceValues& nuisance, const SmootherOptions& opt = {});

/// Refit against updated nuisances reusing each smoother's bandwidth_opt.
LambdaFit refit_lambda(const Dataset& d, const NuisanceValues& nuisance, const LambdaFit& previous);

LambdaValues evaluate(const LambdaFit& fit, const NuisanceValues& nuisance);

}  // namespace driftdr
