#include "driftdr/learners.hpp"

#include "driftdr/numeric.hpp"
#include "driftdr/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace driftdr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

// Quasi-binomial log-likelihood y*eta - log(1 + e^eta), weighted.
double loglik(const VectorXd& y, const VectorXd& eta, const VectorXd* w) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double li = y(i) * eta(i) - softplus(eta(i));
        s += w ? (*w)(i) * li : li;
    }
    return s;
}

void check_response(const VectorXd& y) {
    for (Index i = 0; i < y.size(); ++i) {
        if (!(y(i) >= 0.0 && y(i) <= 1.0)) {
            throw std::invalid_argument("responses must lie in [0,1]");
        }
    }
}

VectorXd expit_vec(const VectorXd& eta) { return eta.unaryExpr([](double e) { return expit(e); }); }

}  // namespace

// ---------------------------------------------------------------------------
// Design expansion

std::vector<std::vector<int>> design_terms(int p, int order) {
    if (order < 1) throw std::invalid_argument("interaction order must be >= 1");
    std::vector<std::vector<int>> terms;
    for (int d = 1; d <= std::min(order, p); ++d) {
        std::vector<int> idx(static_cast<std::size_t>(d));
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            terms.push_back(idx);
            int k = d - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == p - d + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (int j = k + 1; j < d; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return terms;
}

Eigen::VectorXd expand_design(std::span<const double> w, const DesignSpec& spec) {
    const auto terms = design_terms(static_cast<int>(w.size()), spec.interaction_order);
    const Index off = spec.include_intercept ? 1 : 0;
    VectorXd out(static_cast<Index>(terms.size()) + off);
    if (off) out(0) = 1.0;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        double v = 1.0;
        for (int j : terms[t]) v *= w[static_cast<std::size_t>(j)];
        out(static_cast<Index>(t) + off) = v;
    }
    return out;
}

Eigen::MatrixXd expand_design(const Eigen::MatrixXd& w, const DesignSpec& spec) {
    const auto terms = design_terms(static_cast<int>(w.cols()), spec.interaction_order);
    const Index off = spec.include_intercept ? 1 : 0;
    MatrixXd out(w.rows(), static_cast<Index>(terms.size()) + off);
    if (off) out.col(0).setOnes();
    for (std::size_t t = 0; t < terms.size(); ++t) {
        auto col = out.col(static_cast<Index>(t) + off);
        col.setOnes();
        for (int j : terms[t]) col.array() *= w.col(j).array();
    }
    return out;
}

// ---------------------------------------------------------------------------
// IRLS

LogisticFit fit_logistic_irls(const MatrixXd& x, const VectorXd& y, const VectorXd* offset, const VectorXd* weights,
                              const IrlsOptions& opt) {
    const Index n = x.rows();
    if (y.size() != n || (offset && offset->size() != n) || (weights && weights->size() != n)) {
        throw std::invalid_argument("fit_logistic_irls: dimension mismatch");
    }
    if (!x.allFinite()) throw std::invalid_argument("fit_logistic_irls: non-finite design");
    check_response(y);

    LogisticFit fit;
    fit.coefficients = VectorXd::Zero(x.cols());

    std::vector<Index> active;
    for (Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).cwiseAbs().maxCoeff() > 0.0) active.push_back(j);
    }
    const VectorXd off = offset ? *offset : VectorXd::Zero(n);
    if (active.empty()) {
        fit.converged = true;
        return fit;
    }
    const MatrixXd xa = x(Eigen::all, active);
    const Index k = xa.cols();

    VectorXd beta = VectorXd::Zero(k);
    VectorXd eta = off;
    double ll = loglik(y, eta, weights);

    for (int it = 1; it <= opt.max_iter; ++it) {
        fit.iterations = it;
        const VectorXd mu = expit_vec(eta);
        VectorXd resid = y - mu;
        VectorXd v = mu.array() * (1.0 - mu.array());
        if (weights) {
            resid.array() *= weights->array();
            v.array() *= weights->array();
        }
        const VectorXd score = xa.transpose() * resid;
        MatrixXd h = xa.transpose() * v.asDiagonal() * xa;

        VectorXd delta;
        Eigen::LDLT<MatrixXd> ldlt(h);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) delta = ldlt.solve(score);
        if (delta.size() == 0 || !delta.allFinite()) {
            delta = h.completeOrthogonalDecomposition().solve(score);
        }

        double step = 1.0;
        VectorXd cand = beta + delta;
        VectorXd cand_eta = off + xa * cand;
        double cand_ll = loglik(y, cand_eta, weights);
        for (int h2 = 0; h2 < 30 && !(cand_ll >= ll - 1e-12 * std::abs(ll)); ++h2) {
            step *= 0.5;
            cand = beta + step * delta;
            cand_eta = off + xa * cand;
            cand_ll = loglik(y, cand_eta, weights);
        }
        const double change = (step * delta).cwiseAbs().maxCoeff();
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;

        if (beta.cwiseAbs().maxCoeff() > opt.coefficient_cap) {
            beta = beta.cwiseMax(-opt.coefficient_cap).cwiseMin(opt.coefficient_cap);
            fit.separation = true;
            break;
        }
        if (change < opt.tol) {
            fit.converged = true;
            break;
        }
    }
    for (Index j = 0; j < k; ++j) fit.coefficients(active[static_cast<std::size_t>(j)]) = beta(j);
    return fit;
}

// ---------------------------------------------------------------------------
// Lasso

StandardizedDesign StandardizedDesign::from(const MatrixXd& raw) {
    StandardizedDesign s;
    const double n = static_cast<double>(raw.rows());
    s.center = raw.colwise().mean().transpose();
    s.scale.resize(raw.cols());
    s.x = raw.rowwise() - s.center.transpose();
    for (Index j = 0; j < raw.cols(); ++j) {
        const double sdj = std::sqrt(s.x.col(j).squaredNorm() / n);
        // relative threshold: products of bounded covariates can be tiny but real
        const double mag = std::max(1.0, std::abs(s.center(j)));
        if (sdj > 1e-12 * mag) {
            s.scale(j) = sdj;
            s.x.col(j) /= sdj;
        } else {
            s.scale(j) = 0.0;
            s.x.col(j).setZero();
        }
    }
    return s;
}

MatrixXd StandardizedDesign::apply(const MatrixXd& raw) const {
    MatrixXd out = raw.rowwise() - center.transpose();
    for (Index j = 0; j < out.cols(); ++j) {
        if (scale(j) > 0.0) {
            out.col(j) /= scale(j);
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

double lambda_max(const MatrixXd& xs, const VectorXd& y) {
    const double n = static_cast<double>(xs.rows());
    const VectorXd r = y.array() - y.mean();
    return (xs.transpose() * r).cwiseAbs().maxCoeff() / n;
}

std::vector<double> lambda_grid(const MatrixXd& xs, const VectorXd& y, int n_lambda, double ratio) {
    if (n_lambda < 1) throw std::invalid_argument("lambda grid needs at least one value");
    const double lmax = lambda_max(xs, y);
    std::vector<double> grid(static_cast<std::size_t>(n_lambda));
    if (n_lambda == 1) {
        grid[0] = lmax;
        return grid;
    }
    const double step = std::log(ratio) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) grid[static_cast<std::size_t>(k)] = lmax * std::exp(step * k);
    return grid;
}

namespace {

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

double lasso_objective(const VectorXd& y, const VectorXd& eta, const VectorXd& beta, double lambda) {
    return -loglik(y, eta, nullptr) / static_cast<double>(y.size()) + lambda * beta.lpNorm<1>();
}

}  // namespace

LassoSolution solve_lasso(const MatrixXd& xs, const VectorXd& y, double lambda, const LassoSolution* warm,
                          const LassoOptions& opt) {
    const Index n = xs.rows();
    const Index p = xs.cols();
    const double nd = static_cast<double>(n);
    check_response(y);

    LassoSolution sol;
    if (warm) {
        sol = *warm;
        sol.outer_iterations = 0;
        sol.converged = false;
    } else {
        sol.beta = VectorXd::Zero(p);
        sol.intercept = logit(clip(y.mean(), 1e-10, 1.0 - 1e-10));
    }

    std::vector<bool> usable(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) usable[static_cast<std::size_t>(j)] = xs.col(j).squaredNorm() > 0.0;

    VectorXd eta = (xs * sol.beta).array() + sol.intercept;
    double obj = lasso_objective(y, eta, sol.beta, lambda);
    VectorXd xv(p);

    for (int outer = 1; outer <= opt.max_outer; ++outer) {
        sol.outer_iterations = outer;
        const VectorXd mu = expit_vec(eta);
        const VectorXd v = (mu.array() * (1.0 - mu.array())).max(1e-5);
        const VectorXd r = (y - mu).array() / v.array();
        const double vsum = v.sum();

        // Covariance updates: with G = [1 X]'V[1 X] and grad = [1 X]'V r the
        // gradient after a coordinate step d_j is grad - d_j G.col(j).
        Eigen::MatrixXd xt1(p + 1, n);
        xt1.row(0) = v.transpose();
        xt1.bottomRows(p) = xs.transpose() * v.asDiagonal();
        VectorXd grad(p + 1);
        grad(0) = v.dot(r);
        grad.tail(p) = xt1.bottomRows(p) * r;
        Eigen::MatrixXd gram(p + 1, p + 1);
        gram(0, 0) = vsum;
        gram.block(1, 0, p, 1) = xt1.bottomRows(p).rowwise().sum();
        gram.block(0, 1, 1, p) = gram.block(1, 0, p, 1).transpose();
        gram.block(1, 1, p, p).noalias() = xt1.bottomRows(p) * xs;
        for (Index j = 0; j < p; ++j) xv(j) = gram(j + 1, j + 1) / nd;

        const VectorXd beta_old = sol.beta;
        const double b0_old = sol.intercept;

        auto sweep = [&](bool full) {
            double max_change = 0.0;
            const double d0 = grad(0) / vsum;
            if (d0 != 0.0) {
                sol.intercept += d0;
                grad -= d0 * gram.col(0);
                max_change = vsum / nd * d0 * d0;
            }
            for (Index j = 0; j < p; ++j) {
                if (!usable[static_cast<std::size_t>(j)]) continue;
                const double bj = sol.beta(j);
                if (!full && bj == 0.0) continue;
                const double g = grad(j + 1) / nd + xv(j) * bj;
                const double nb = soft_threshold(g, lambda) / xv(j);
                const double d = nb - bj;
                if (d != 0.0) {
                    grad -= d * gram.col(j + 1);
                    sol.beta(j) = nb;
                    max_change = std::max(max_change, xv(j) * d * d);
                }
            }
            return max_change;
        };

        const double inner_tol = opt.tol;
        int sweeps = 0;
        while (sweeps < opt.max_sweeps) {
            double ch = sweep(true);
            ++sweeps;
            if (ch < inner_tol) break;
            while (sweeps < opt.max_sweeps) {
                ch = sweep(false);
                ++sweeps;
                if (ch < inner_tol) break;
            }
        }

        VectorXd new_eta = (xs * sol.beta).array() + sol.intercept;
        double new_obj = lasso_objective(y, new_eta, sol.beta, lambda);
        // backtrack toward the previous iterate if the quadratic step overshot
        for (int h = 0; h < 20 && new_obj > obj + 1e-14 * std::abs(obj); ++h) {
            sol.beta = 0.5 * (sol.beta + beta_old);
            sol.intercept = 0.5 * (sol.intercept + b0_old);
            new_eta = (xs * sol.beta).array() + sol.intercept;
            new_obj = lasso_objective(y, new_eta, sol.beta, lambda);
        }
        const double db0 = sol.intercept - b0_old;
        const double change = std::max(vsum / nd * db0 * db0, (sol.beta - beta_old).cwiseAbs2().cwiseProduct(xv).maxCoeff());
        eta = new_eta;
        obj = new_obj;
        if (change < opt.tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

std::vector<int> stratified_folds(const VectorXd& y, int k, std::uint64_t seed) {
    const Index n = y.size();
    if (k < 2) throw std::invalid_argument("need at least 2 folds");
    if (n < k) throw std::invalid_argument("fewer rows than folds");
    std::vector<std::size_t> strata[3];
    for (Index i = 0; i < n; ++i) {
        const int s = y(i) == 0.0 ? 0 : (y(i) == 1.0 ? 1 : 2);
        strata[s].push_back(static_cast<std::size_t>(i));
    }
    Rng rng(seed);
    std::vector<int> fold(static_cast<std::size_t>(n));
    std::size_t next = 0;
    for (auto& s : strata) {
        shuffle(s, rng);
        for (std::size_t i : s) fold[i] = static_cast<int>(next++ % static_cast<std::size_t>(k));
    }
    return fold;
}

namespace {

struct PathFit {
    std::vector<double> intercepts;
    std::vector<VectorXd> betas;  // original scale
    std::vector<LassoSolution> std_solutions;
};

PathFit fit_path(const MatrixXd& x, const VectorXd& y, const std::vector<double>& grid, const LassoOptions& opt) {
    const auto sd = StandardizedDesign::from(x);
    PathFit out;
    const double ybar = clip(y.mean(), 1e-10, 1.0 - 1e-10);
    const double null_dev = -2.0 * loglik(y, VectorXd::Constant(y.size(), logit(ybar)), nullptr);
    double prev_ratio = 0.0;
    bool stopped = false;
    LassoSolution last;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!stopped) {
            last = solve_lasso(sd.x, y, grid[k], k ? &last : nullptr, opt);
            if (opt.early_stop && null_dev > 0.0) {
                const VectorXd eta = (sd.x * last.beta).array() + last.intercept;
                const double ratio = 1.0 - (-2.0 * loglik(y, eta, nullptr)) / null_dev;
                if ((k >= 5 && ratio - prev_ratio < 1e-5 * ratio) || ratio > 0.999) stopped = true;
                prev_ratio = ratio;
            }
        }
        VectorXd b = VectorXd::Zero(x.cols());
        for (Index j = 0; j < x.cols(); ++j) {
            if (sd.scale(j) > 0.0) b(j) = last.beta(j) / sd.scale(j);
        }
        out.intercepts.push_back(last.intercept - b.dot(sd.center));
        out.betas.push_back(std::move(b));
        out.std_solutions.push_back(last);
    }
    return out;
}

}  // namespace

LassoCvFit fit_logistic_lasso(const MatrixXd& x, const VectorXd& y, std::vector<double> grid, int folds,
                              std::uint64_t seed, const LassoOptions& opt) {
    if (grid.empty()) throw std::invalid_argument("lambda grid must be non-empty");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] < grid[k - 1])) throw std::invalid_argument("lambda grid must be strictly decreasing");
    }
    if (grid.back() < 0.0) throw std::invalid_argument("lambda values must be non-negative");
    if (folds < 2) throw std::invalid_argument("lasso cross-validation needs at least 2 folds");
    check_response(y);

    const auto full = fit_path(x, y, grid, opt);
    const auto fold = stratified_folds(y, folds, seed);

    std::vector<double> cv(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> tr, te;
        for (Index i = 0; i < y.size(); ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        const MatrixXd xtr = x(tr, Eigen::all);
        const VectorXd ytr = y(tr);
        const MatrixXd xte = x(te, Eigen::all);
        const VectorXd yte = y(te);
        const auto path = fit_path(xtr, ytr, grid, opt);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const VectorXd eta = (xte * path.betas[k]).array() + path.intercepts[k];
            cv[k] += -2.0 * loglik(yte, eta, nullptr);
        }
    }
    for (double& c : cv) c /= static_cast<double>(y.size());

    LassoCvFit out;
    out.lambdas = std::move(grid);
    out.cv_deviance = cv;
    out.selected = static_cast<std::size_t>(std::min_element(cv.begin(), cv.end()) - cv.begin());
    out.intercept = full.intercepts[out.selected];
    out.beta = full.betas[out.selected];
    return out;
}

// ---------------------------------------------------------------------------
// Fitted learners

const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::logistic_main_terms: return "logistic_main_terms";
        case LearnerKind::logistic_lasso: return "logistic_lasso";
        case LearnerKind::stacking_ensemble: return "stacking_ensemble";
        case LearnerKind::known_constant: return "known_constant";
    }
    return "?";
}

double FittedLearner::predict(std::span<const double> w) const {
    switch (kind) {
        case LearnerKind::known_constant: return constant;
        case LearnerKind::logistic_main_terms:
        case LearnerKind::logistic_lasso: {
            DesignSpec d = design;
            d.include_intercept = false;
            return expit(intercept + expand_design(w, d).dot(coefficients));
        }
        case LearnerKind::stacking_ensemble: {
            double s = 0.0;
            for (std::size_t k = 0; k < members.size(); ++k) s += weights[k] * members[k].predict(w);
            return clip_prediction(s);
        }
    }
    return constant;
}

VectorXd FittedLearner::predict(const MatrixXd& w) const {
    switch (kind) {
        case LearnerKind::known_constant: return VectorXd::Constant(w.rows(), constant);
        case LearnerKind::logistic_main_terms:
        case LearnerKind::logistic_lasso: {
            DesignSpec d = design;
            d.include_intercept = false;
            const VectorXd eta = (expand_design(w, d) * coefficients).array() + intercept;
            return expit_vec(eta);
        }
        case LearnerKind::stacking_ensemble: {
            VectorXd s = VectorXd::Zero(w.rows());
            for (std::size_t k = 0; k < members.size(); ++k) s += weights[k] * members[k].predict(w);
            return s.unaryExpr([](double v) { return clip_prediction(v); });
        }
    }
    return VectorXd::Constant(w.rows(), constant);
}

FittedLearner known_constant(double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("constant prediction must lie in [0,1]");
    FittedLearner f;
    f.kind = LearnerKind::known_constant;
    f.constant = value;
    return f;
}

FittedLearner fit_main_terms(const MatrixXd& w, const VectorXd& y) {
    FittedLearner f;
    f.kind = LearnerKind::logistic_main_terms;
    f.design = {1, true, false};
    const auto fit = fit_logistic_irls(expand_design(w, f.design), y);
    f.intercept = fit.coefficients(0);
    f.coefficients = fit.coefficients.tail(fit.coefficients.size() - 1);
    f.separation = fit.separation;
    return f;
}

FittedLearner fit_lasso_learner(const MatrixXd& w, const VectorXd& y, int interaction_order, int folds,
                                std::uint64_t seed, const LassoOptions& opt) {
    FittedLearner f;
    f.kind = LearnerKind::logistic_lasso;
    f.design = {interaction_order, false, true};
    const MatrixXd x = expand_design(w, f.design);
    const auto xs = StandardizedDesign::from(x);
    const auto fit = fit_logistic_lasso(x, y, lambda_grid(xs.x, y, opt.n_lambda, opt.lambda_min_ratio), folds, seed, opt);
    f.intercept = fit.intercept;
    f.coefficients = fit.beta;
    f.lambda = fit.lambda();
    return f;
}

LearnerFactory main_terms_factory() {
    return {"logistic_main_terms", [](const MatrixXd& w, const VectorXd& y, std::uint64_t) { return fit_main_terms(w, y); }};
}

LearnerFactory lasso_factory(int interaction_order, int folds, LassoOptions opt) {
    return {"logistic_lasso_order" + std::to_string(interaction_order),
            [=](const MatrixXd& w, const VectorXd& y, std::uint64_t seed) {
                return fit_lasso_learner(w, y, interaction_order, folds, seed, opt);
            }};
}

LearnerFactory constant_factory(double value) {
    return {"known_constant", [value](const MatrixXd&, const VectorXd&, std::uint64_t) { return known_constant(value); }};
}

// ---------------------------------------------------------------------------
// Stacking

VectorXd project_simplex(const VectorXd& v) {
    const Index k = v.size();
    std::vector<double> u(v.data(), v.data() + k);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, tau = 0.0;
    for (Index j = 0; j < k; ++j) {
        css += u[static_cast<std::size_t>(j)];
        const double t = (css - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
    }
    VectorXd out = (v.array() - tau).max(0.0);
    return out / out.sum();
}

namespace {

double stacking_risk(const MatrixXd& z, const VectorXd& y, const VectorXd& a, StackingLoss loss) {
    const VectorXd p = (z * a).unaryExpr([](double v) { return clip_prediction(v); });
    const double n = static_cast<double>(y.size());
    if (loss == StackingLoss::squared_error) return (y - p).squaredNorm() / n;
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s -= y(i) * std::log(p(i)) + (1.0 - y(i)) * std::log1p(-p(i));
    return s / n;
}

VectorXd stacking_gradient(const MatrixXd& z, const VectorXd& y, const VectorXd& a, StackingLoss loss) {
    const VectorXd p = (z * a).unaryExpr([](double v) { return clip_prediction(v); });
    const double n = static_cast<double>(y.size());
    VectorXd dp(y.size());
    for (Index i = 0; i < y.size(); ++i) {
        dp(i) = loss == StackingLoss::squared_error ? 2.0 * (p(i) - y(i))
                                                    : -(y(i) / p(i)) + (1.0 - y(i)) / (1.0 - p(i));
    }
    return z.transpose() * dp / n;
}

}  // namespace

FittedLearner fit_stacking(std::span<const LearnerFactory> library, const MatrixXd& w, const VectorXd& y, int folds,
                           StackingLoss loss, std::uint64_t seed, StackingReport* report) {
    if (library.size() < 2) throw std::invalid_argument("stacking needs at least 2 library members");
    if (folds < 2) throw std::invalid_argument("stacking needs at least 2 folds");
    check_response(y);
    const Index n = y.size();
    const auto fold = stratified_folds(y, folds, derive_seed(seed, 0));

    std::vector<std::size_t> kept;
    std::vector<VectorXd> cv_pred;
    std::vector<std::string> dropped;
    for (std::size_t k = 0; k < library.size(); ++k) {
        try {
            VectorXd z(n);
            for (int f = 0; f < folds; ++f) {
                std::vector<Index> tr, te;
                for (Index i = 0; i < n; ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
                const auto fit = library[k].fit(w(tr, Eigen::all), y(tr), derive_seed(seed, {k + 1, static_cast<std::uint64_t>(f) + 1}));
                const VectorXd pr = fit.predict(MatrixXd(w(te, Eigen::all)));
                for (std::size_t t = 0; t < te.size(); ++t) z(te[t]) = clip_prediction(pr(static_cast<Index>(t)));
            }
            if (!z.allFinite()) throw std::runtime_error("non-finite cross-validated predictions");
            kept.push_back(k);
            cv_pred.push_back(std::move(z));
        } catch (const std::exception& e) {
            spdlog::warn("stacking: dropping library member '{}': {}", library[k].name, e.what());
            dropped.push_back(library[k].name);
        }
    }
    if (kept.empty()) throw std::runtime_error("stacking: every library member failed to fit");

    const Index kk = static_cast<Index>(kept.size());
    MatrixXd z(n, kk);
    for (Index k = 0; k < kk; ++k) z.col(k) = cv_pred[static_cast<std::size_t>(k)];

    std::vector<double> member_risk;
    Index best = 0;
    for (Index k = 0; k < kk; ++k) {
        member_risk.push_back(stacking_risk(z, y, VectorXd::Unit(kk, k), loss));
        if (member_risk.back() < member_risk[static_cast<std::size_t>(best)]) best = k;
    }

    // projected gradient from the best single member; risk never increases
    VectorXd a = VectorXd::Unit(kk, best);
    double risk = member_risk[static_cast<std::size_t>(best)];
    double step = 1.0;
    for (int it = 0; it < 5000 && kk > 1; ++it) {
        const VectorXd g = stacking_gradient(z, y, a, loss);
        bool improved = false;
        double gain = 0.0;
        for (int bt = 0; bt < 60; ++bt) {
            const VectorXd cand = project_simplex(a - step * g);
            const double r = stacking_risk(z, y, cand, loss);
            if (r < risk) {
                gain = risk - r;
                a = cand;
                risk = r;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if (!improved || gain < 1e-8) break;
    }

    FittedLearner ens;
    ens.kind = LearnerKind::stacking_ensemble;
    for (Index k = 0; k < kk; ++k) {
        const auto& fac = library[kept[static_cast<std::size_t>(k)]];
        ens.members.push_back(fac.fit(w, y, derive_seed(seed, {kept[static_cast<std::size_t>(k)] + 1, 0})));
        ens.member_names.push_back(fac.name);
        ens.weights.push_back(a(k));
        ens.separation = ens.separation || ens.members.back().separation;
    }
    if (report) {
        report->member_cv_risk = member_risk;
        report->ensemble_cv_risk = risk;
        report->dropped = dropped;
    }
    return ens;
}

}  // namespace driftdr
