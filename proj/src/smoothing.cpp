#include "driftdr/smoothing.hpp"

#include "driftdr/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>

namespace driftdr {

const char* to_string(KernelType k) { return k == KernelType::epanechnikov ? "epanechnikov" : "gaussian"; }

KernelType kernel_from_string(const std::string& s) {
    if (s == "epanechnikov") return KernelType::epanechnikov;
    if (s == "gaussian") return KernelType::gaussian;
    throw std::invalid_argument("unknown kernel '" + s + "'");
}

double kernel_weight(KernelType k, double u) {
    if (k == KernelType::epanechnikov) {
        const double a = std::abs(u);
        return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    }
    return std::abs(u) <= 10.0 ? 0.3989422804014327 * std::exp(-0.5 * u * u) : 0.0;
}

double kernel_support(KernelType k) { return k == KernelType::epanechnikov ? 1.0 : 10.0; }

double undersmoothed(double bandwidth_opt, std::size_t n) {
    return std::pow(static_cast<double>(n), -0.1) * bandwidth_opt;
}

namespace {

// Window sum over sorted x; returns false if every weight is zero.
bool window_mean(std::span<const double> x, std::span<const double> y, KernelType k, double h, double x0,
                 double& out) {
    const double s = kernel_support(k) * h;
    auto lo = std::lower_bound(x.begin(), x.end(), x0 - s);
    auto hi = std::upper_bound(lo, x.end(), x0 + s);
    double num = 0.0, den = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const auto i = static_cast<std::size_t>(it - x.begin());
        const double wt = kernel_weight(k, (x[i] - x0) / h);
        num += wt * y[i];
        den += wt;
    }
    if (den > 0.0) {
        out = num / den;
        return true;
    }
    return false;
}

double nearest_mean(std::span<const double> x, std::span<const double> y, double x0) {
    auto it = std::lower_bound(x.begin(), x.end(), x0);
    double best = INFINITY;
    if (it != x.end()) best = std::min(best, *it - x0);
    if (it != x.begin()) best = std::min(best, x0 - *(it - 1));
    double s = 0.0;
    int c = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i] - x0) == best) {
            s += y[i];
            ++c;
        }
    }
    return s / c;
}

double nw_predict(std::span<const double> x, std::span<const double> y, KernelType k, double h, double x0) {
    double out;
    for (int attempt = 0; attempt <= 10; ++attempt) {
        if (window_mean(x, y, k, h, x0, out)) return out;
        h *= 2.0;
    }
    return nearest_mean(x, y, x0);
}

// Prefix sums of x^j and x^j y (j = 0..2), centred at c, for Epanechnikov
// windows in O(log n). Small windows are summed directly.
class EpanechnikovSums {
public:
    EpanechnikovSums(std::span<const double> x, std::span<const double> y) : x_(x), y_(y) {
        c_ = x.empty() ? 0.0 : x[x.size() / 2];
        const std::size_t n = x.size();
        for (auto* v : {&s0_, &s1_, &s2_, &t0_, &t1_, &t2_}) v->assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[i] - c_;
            s0_[i + 1] = s0_[i] + 1.0;
            s1_[i + 1] = s1_[i] + d;
            s2_[i + 1] = s2_[i] + d * d;
            t0_[i + 1] = t0_[i] + y[i];
            t1_[i + 1] = t1_[i] + d * y[i];
            t2_[i + 1] = t2_[i] + d * d * y[i];
        }
    }

    double predict(double h, double x0) const {
        for (int attempt = 0; attempt <= 10; ++attempt) {
            double out;
            if (window(h, x0, out)) return out;
            h *= 2.0;
        }
        return nearest_mean(x_, y_, x0);
    }

private:
    bool window(double h, double x0, double& out) const {
        const auto lo = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x0 - h) - x_.begin());
        const auto hi = static_cast<std::size_t>(std::lower_bound(x_.begin(), x_.end(), x0 + h) - x_.begin());
        if (hi <= lo) return false;
        if (hi - lo < 64) return window_mean(x_, y_, KernelType::epanechnikov, h, x0, out);
        const double q = x0 - c_;
        const double ih2 = 1.0 / (h * h);
        const double cnt = s0_[hi] - s0_[lo];
        const double a1 = s1_[hi] - s1_[lo], a2 = s2_[hi] - s2_[lo];
        const double b0 = t0_[hi] - t0_[lo], b1 = t1_[hi] - t1_[lo], b2 = t2_[hi] - t2_[lo];
        const double den = cnt - (a2 - 2.0 * q * a1 + q * q * cnt) * ih2;
        const double num = b0 - (b2 - 2.0 * q * b1 + q * q * b0) * ih2;
        if (!(den > 0.0)) return window_mean(x_, y_, KernelType::epanechnikov, h, x0, out);
        out = num / den;
        return true;
    }

    std::span<const double> x_, y_;
    double c_;
    std::vector<double> s0_, s1_, s2_, t0_, t1_, t2_;
};

void sort_pairs(std::vector<double>& x, std::vector<double>& y) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs(x.size()), ys(y.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        xs[i] = x[idx[i]];
        ys[i] = y[idx[i]];
    }
    x = std::move(xs);
    y = std::move(ys);
}

void collect(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
             std::vector<double>& xs, std::vector<double>& ys) {
    if (x.size() != y.size() || static_cast<std::size_t>(x.size()) != mask.size()) {
        throw std::invalid_argument("fit_kernel: dimension mismatch");
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            if (!std::isfinite(x(i)) || !std::isfinite(y(i))) throw std::invalid_argument("fit_kernel: non-finite input");
            xs.push_back(x(i));
            ys.push_back(y(i));
        }
    }
    if (xs.size() < 5) {
        throw std::invalid_argument("fit_kernel: subset has " + std::to_string(xs.size()) + " rows, need at least 5");
    }
    sort_pairs(xs, ys);
}

}  // namespace

KernelSmoother::KernelSmoother(std::vector<double> x, std::vector<double> y, KernelType kernel, double bandwidth_opt)
    : x_(std::move(x)), y_(std::move(y)), kernel_(kernel), h_opt_(bandwidth_opt) {
    if (x_.size() != y_.size() || x_.empty()) throw std::invalid_argument("KernelSmoother: bad training data");
    if (!(bandwidth_opt > 0.0)) throw std::invalid_argument("KernelSmoother: bandwidth must be positive");
    if (!std::is_sorted(x_.begin(), x_.end())) sort_pairs(x_, y_);
    h_ = undersmoothed(h_opt_, x_.size());
}

double KernelSmoother::predict(double x0) const { return nw_predict(x_, y_, kernel_, h_, x0); }

Eigen::VectorXd KernelSmoother::predict(const Eigen::VectorXd& x0) const {
    Eigen::VectorXd out(x0.size());
    for (Eigen::Index i = 0; i < x0.size(); ++i) out(i) = predict(x0(i));
    return out;
}

std::vector<double> kernel_cv_risk(const std::vector<double>& x, const std::vector<double>& y, KernelType kernel,
                                   const std::vector<double>& bandwidths, int folds) {
    const std::size_t n = x.size();
    const auto k = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(folds), n));
    std::vector<double> risk(bandwidths.size(), 0.0);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<double> xt, yt, xv, yv;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % k == f) {
                xv.push_back(x[i]);
                yv.push_back(y[i]);
            } else {
                xt.push_back(x[i]);
                yt.push_back(y[i]);
            }
        }
        if (kernel == KernelType::epanechnikov) {
            const EpanechnikovSums sums(xt, yt);
            for (std::size_t b = 0; b < bandwidths.size(); ++b) {
                for (std::size_t i = 0; i < xv.size(); ++i) {
                    const double r = yv[i] - sums.predict(bandwidths[b], xv[i]);
                    risk[b] += r * r;
                }
            }
        } else {
            for (std::size_t b = 0; b < bandwidths.size(); ++b) {
                for (std::size_t i = 0; i < xv.size(); ++i) {
                    const double r = yv[i] - nw_predict(xt, yt, kernel, bandwidths[b], xv[i]);
                    risk[b] += r * r;
                }
            }
        }
    }
    for (double& r : risk) r /= static_cast<double>(n);
    return risk;
}

KernelSmoother fit_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                          const SmootherOptions& opt) {
    std::vector<double> xs, ys;
    collect(x, y, mask, xs, ys);
    const double range = xs.back() - xs.front();
    if (!(range > 0.0)) {
        // a single distinct index value: every bandwidth gives the subset mean
        return KernelSmoother(std::move(xs), std::move(ys), opt.kernel, 1.0);
    }
    const double s = sd(xs);
    const double lo = 0.01 * s, hi = 2.0 * range;
    std::vector<double> grid(static_cast<std::size_t>(opt.grid_size));
    for (int g = 0; g < opt.grid_size; ++g) {
        const double t = opt.grid_size > 1 ? static_cast<double>(g) / (opt.grid_size - 1) : 0.0;
        grid[static_cast<std::size_t>(g)] = lo * std::pow(hi / lo, t);
    }
    const auto risk = kernel_cv_risk(xs, ys, opt.kernel, grid, opt.folds);
    const auto best = static_cast<std::size_t>(std::min_element(risk.begin(), risk.end()) - risk.begin());
    return KernelSmoother(std::move(xs), std::move(ys), opt.kernel, grid[best]);
}

KernelSmoother fit_kernel_fixed(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                                KernelType kernel, double bandwidth_opt) {
    std::vector<double> xs, ys;
    collect(x, y, mask, xs, ys);
    return KernelSmoother(std::move(xs), std::move(ys), kernel, bandwidth_opt);
}

LambdaValues LambdaValues::zero(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Ones(nn), Eigen::VectorXd::Ones(nn), Eigen::VectorXd::Zero(nn), Eigen::VectorXd::Zero(nn),
            Eigen::VectorXd::Zero(nn)};
}

namespace {

struct LambdaTargets {
    Eigen::VectorXd m_index, g_index;
    Eigen::VectorXd a, m, r_a, r_m, e;
    std::vector<bool> all, treated, complete;
};

LambdaTargets targets(const Dataset& d, const NuisanceValues& nu) {
    if (nu.size() != d.n()) throw std::invalid_argument("nuisance values do not match dataset");
    LambdaTargets t;
    const auto& a = d.arm();
    const auto& m = d.observed();
    const Eigen::VectorXd g = nu.g();
    t.m_index = nu.m;
    t.g_index = g;
    t.a = a;
    t.m = m;
    t.r_a = (a - nu.g_a).cwiseQuotient(nu.g_a);
    t.r_m = (m - nu.g_m).cwiseQuotient(g);
    t.e = d.outcome() - nu.m;
    const std::size_t n = d.n();
    t.all.assign(n, true);
    t.treated.resize(n);
    t.complete.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.treated[i] = d[i].a == 1;
        t.complete[i] = d[i].a == 1 && d[i].m == 1;
    }
    return t;
}

}  // namespace

LambdaFit fit_lambda(const Dataset& d, const NuisanceValues& nu, const SmootherOptions& opt) {
    const auto t = targets(d, nu);
    return {fit_kernel(t.m_index, t.a, t.all, opt), fit_kernel(t.m_index, t.m, t.treated, opt),
            fit_kernel(t.m_index, t.r_a, t.all, opt), fit_kernel(t.m_index, t.r_m, t.treated, opt),
            fit_kernel(t.g_index, t.e, t.complete, opt)};
}

LambdaFit refit_lambda(const Dataset& d, const NuisanceValues& nu, const LambdaFit& prev) {
    const auto t = targets(d, nu);
    auto refit = [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                    const KernelSmoother& old) { return fit_kernel_fixed(x, y, mask, old.kernel(), old.bandwidth_opt()); };
    return {refit(t.m_index, t.a, t.all, prev.gamma_a), refit(t.m_index, t.m, t.treated, prev.gamma_m),
            refit(t.m_index, t.r_a, t.all, prev.r_a), refit(t.m_index, t.r_m, t.treated, prev.r_m),
            refit(t.g_index, t.e, t.complete, prev.e)};
}

LambdaValues evaluate(const LambdaFit& fit, const NuisanceValues& nu) {
    const Eigen::VectorXd g = nu.g();
    auto clipv = [](Eigen::VectorXd v) { return Eigen::VectorXd(v.unaryExpr([](double x) { return clip_prediction(x); })); };
    return {clipv(fit.gamma_a.predict(nu.m)), clipv(fit.gamma_m.predict(nu.m)), fit.r_a.predict(nu.m),
            fit.r_m.predict(nu.m), fit.e.predict(g)};
}

}  // namespace driftdr
