#include "driftdr/estimators.hpp"

#include "driftdr/learners.hpp"
#include "driftdr/numeric.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace driftdr {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

std::span<const double> view(const VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void finalize(EstimateResult& r, const EstimatorOptions& opt) {
    const auto n = static_cast<double>(r.if_values.size());
    r.alpha = opt.alpha;
    r.sigma = sd(view(r.if_values));
    const double z = normal_critical_value(opt.alpha);
    r.ci_lo = r.theta - z * r.sigma / std::sqrt(n);
    r.ci_hi = r.theta + z * r.sigma / std::sqrt(n);
    const auto& b = opt.bounds;
    r.theta_raw = b.to_raw(r.theta);
    r.scale = b.scale();
    r.sigma_raw = r.sigma * r.scale;
    r.ci_lo_raw = b.to_raw(r.ci_lo);
    r.ci_hi_raw = b.to_raw(r.ci_hi);
    if (!(r.sigma > 0.0)) r.degenerate = true;
}

std::vector<Index> complete_rows(const Dataset& d) {
    std::vector<Index> idx;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d[i].a == 1 && d[i].m == 1) idx.push_back(static_cast<Index>(i));
    }
    return idx;
}

std::vector<Index> treated_rows(const Dataset& d) {
    std::vector<Index> idx;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d[i].a == 1) idx.push_back(static_cast<Index>(i));
    }
    return idx;
}

void check_sizes(const Dataset& d, const NuisanceValues& nu) {
    if (nu.size() != d.n()) throw std::invalid_argument("nuisance values do not match dataset size");
    if (d.n() == 0) throw std::invalid_argument("empty dataset");
}

// Offset logistic fit without intercept on the given rows. Columns are scaled
// to unit max-abs so the separation cap bounds the logit shift, not epsilon.
// Largest logit shift the TMLE fluctuation may apply; expit saturates near 745.
constexpr double kTmleShiftCap = 700.0;

LogisticFit fluctuate(const Eigen::MatrixXd& x, const VectorXd& y, const VectorXd& offset,
                      const std::vector<Index>& rows, double cap = IrlsOptions{}.coefficient_cap) {
    Eigen::MatrixXd xs = x(rows, Eigen::all);
    VectorXd scale = VectorXd::Ones(xs.cols());
    for (Index j = 0; j < xs.cols(); ++j) {
        const double s = xs.rows() ? xs.col(j).cwiseAbs().maxCoeff() : 0.0;
        if (s > 0.0) {
            scale(j) = s;
            xs.col(j) /= s;
        }
    }
    const VectorXd ys = y(rows);
    const VectorXd os = offset(rows);
    IrlsOptions opt;
    opt.coefficient_cap = cap;
    opt.max_iter = 200;
    auto fit = fit_logistic_irls(xs, ys, &os, nullptr, opt);
    fit.coefficients = fit.coefficients.cwiseQuotient(scale);
    return fit;
}

VectorXd logit_vec(const VectorXd& p) { return p.unaryExpr([](double v) { return logit(v); }); }
VectorXd expit_vec(const VectorXd& e) { return e.unaryExpr([](double v) { return expit(v); }); }

}  // namespace

const char* to_string(LambdaUpdate u) {
    switch (u) {
        case LambdaUpdate::fixed: return "fixed";
        case LambdaUpdate::refit: return "refit";
        case LambdaUpdate::reselect: return "reselect";
    }
    return "?";
}

LambdaUpdate lambda_update_from_string(const std::string& s) {
    for (auto u : {LambdaUpdate::fixed, LambdaUpdate::refit, LambdaUpdate::reselect}) {
        if (s == to_string(u)) return u;
    }
    throw std::invalid_argument("unknown lambda update '" + s + "'");
}

const char* to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::unadjusted: return "unadjusted";
        case EstimatorKind::aipw: return "aipw";
        case EstimatorKind::tmle: return "tmle";
        case EstimatorKind::daipw: return "daipw";
        case EstimatorKind::dtmle: return "dtmle";
    }
    return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
    for (auto k : {EstimatorKind::unadjusted, EstimatorKind::aipw, EstimatorKind::tmle, EstimatorKind::daipw,
                   EstimatorKind::dtmle}) {
        if (s == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown estimator '" + s + "'");
}

std::vector<EstimatorKind> parse_estimators(const std::string& csv) {
    std::vector<EstimatorKind> out;
    std::set<EstimatorKind> seen;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto k = estimator_from_string(item);
        if (!seen.insert(k).second) throw std::invalid_argument("duplicate estimator '" + item + "'");
        out.push_back(k);
    }
    if (out.empty()) throw std::invalid_argument("no estimators requested");
    return out;
}

TiltingCovariates TiltingCovariates::from(const NuisanceValues& nu, const LambdaValues& lam) {
    const VectorXd g = nu.g();
    TiltingCovariates t;
    t.w1 = g.cwiseInverse();
    const VectorXd gamma = lam.gamma_a.cwiseProduct(lam.gamma_m);
    t.w2 = lam.r_a.cwiseQuotient(gamma) + lam.r_m.cwiseQuotient(lam.gamma_m);
    t.z_a = lam.e.cwiseQuotient(nu.g_a);
    t.z_m = lam.e.cwiseQuotient(g);
    return t;
}

double FluctuationState::max_abs() const {
    return std::max({std::abs(eps_a), std::abs(eps_m), std::abs(eps_y1), std::abs(eps_y2)});
}

double dtmle_tolerance(std::size_t n) { return 1e-4 * std::pow(static_cast<double>(n), -0.6); }

double eif(const ObservationRecord& o, const NuisancePoint& nu, double theta) {
    double v = nu.m - theta;
    if (o.a == 1 && o.m == 1) v += (*o.y - nu.m) / nu.g();
    return v;
}

VectorXd eif_values(const Dataset& d, const NuisanceValues& nu, double theta) {
    check_sizes(d, nu);
    VectorXd out(static_cast<Index>(d.n()));
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto k = static_cast<Index>(i);
        out(k) = eif(d[i], {nu.g_a(k), nu.g_m(k), nu.m(k)}, theta);
    }
    return out;
}

DriftScores drift_scores(const Dataset& d, const NuisanceValues& nu, const LambdaValues& lam) {
    check_sizes(d, nu);
    const auto t = TiltingCovariates::from(nu, lam);
    const auto& a = d.arm();
    const auto& m = d.observed();
    const VectorXd am = a.cwiseProduct(m);
    DriftScores s;
    s.d_y = am.cwiseProduct(t.w2).cwiseProduct(d.outcome() - nu.m);
    s.d_m = a.cwiseProduct(t.z_m).cwiseProduct(m - nu.g_m);
    s.d_a = t.z_a.cwiseProduct(a - nu.g_a);
    return s;
}

EstimateResult estimate_unadjusted(const Dataset& d, const EstimatorOptions& opt) {
    const auto rows = complete_rows(d);
    if (rows.empty()) throw std::invalid_argument("unadjusted: no rows with a = 1 and observed outcome");
    EstimateResult r;
    r.estimator = EstimatorKind::unadjusted;
    const VectorXd y = d.outcome()(rows);
    r.theta = mean(view(y));
    const double p = static_cast<double>(rows.size()) / static_cast<double>(d.n());
    r.if_values = VectorXd::Zero(static_cast<Index>(d.n()));
    for (Index i : rows) r.if_values(i) = (d.outcome()(i) - r.theta) / p;
    finalize(r, opt);
    if (rows.size() == 1) r.degenerate = true;
    if (r.degenerate) r.warnings.emplace_back("degenerate standard error");
    return r;
}

EstimateResult estimate_aipw(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt) {
    check_sizes(d, nu);
    EstimateResult r;
    r.estimator = EstimatorKind::aipw;
    // theta solves mean D = 0, i.e. the mean of D at theta = 0.
    r.theta = mean(view(eif_values(d, nu, 0.0)));
    r.if_values = eif_values(d, nu, r.theta);
    finalize(r, opt);
    return r;
}

EstimateResult estimate_tmle(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt) {
    check_sizes(d, nu);
    const auto rows = complete_rows(d);
    if (rows.empty()) throw std::invalid_argument("tmle: no rows with a = 1 and observed outcome");
    const VectorXd offset = logit_vec(nu.m);
    const VectorXd w1 = nu.g().cwiseInverse();
    // w1 > 0, so the score is monotone in eps and has a finite root unless the
    // complete-case outcomes are constant; the cap only has to leave room for
    // logit shifts far beyond the usual separation guard.
    const auto fit = fluctuate(w1, d.outcome(), offset, rows, kTmleShiftCap);
    const double eps = fit.coefficients(0);

    NuisanceValues tilted = nu;
    const VectorXd yc = d.outcome()(rows);
    const bool constant = yc.maxCoeff() == yc.minCoeff() && (yc(0) == 0.0 || yc(0) == 1.0);
    if (constant) {
        // the submodel's limit as eps runs to -inf or +inf
        tilted.m = VectorXd::Constant(nu.m.size(), yc(0));
    } else {
        tilted.m = expit_vec(offset + eps * w1);
    }

    EstimateResult r;
    r.estimator = EstimatorKind::tmle;
    r.theta = mean(view(tilted.m));
    r.if_values = eif_values(d, tilted, r.theta);
    r.separation = fit.separation && !constant;
    r.converged = constant || (fit.converged && !fit.separation);
    FluctuationState st;
    st.eps_y1 = eps;
    st.iteration = 1;
    st.converged = r.converged;
    r.diagnostics = st;
    r.targeted = std::move(tilted);
    finalize(r, opt);
    if (r.separation) r.warnings.emplace_back("fluctuation hit the separation cap");
    if (constant) r.warnings.emplace_back("complete-case outcomes are constant; fluctuation taken to its limit");
    return r;
}

double estimate_drift(const Dataset& d, const NuisanceValues& nu, const LambdaValues& lam) {
    const auto s = drift_scores(d, nu, lam);
    const VectorXd total = s.d_a + s.d_m + s.d_y;
    return mean(view(total));
}

namespace {

LambdaValues lambda_values(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt,
                           const LambdaFit* given) {
    if (opt.zero_lambda) return LambdaValues::zero(d.n());
    if (given) return evaluate(*given, nu);
    return evaluate(fit_lambda(d, nu, opt.smoother), nu);
}

VectorXd dr_influence(const Dataset& d, const NuisanceValues& nu, const LambdaValues& lam, double theta) {
    const auto s = drift_scores(d, nu, lam);
    return eif_values(d, nu, theta) - s.d_y - s.d_m - s.d_a;
}

}  // namespace

EstimateResult estimate_daipw(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt,
                              const LambdaFit* lambda) {
    const auto aipw = estimate_aipw(d, nu, opt);
    const auto lam = lambda_values(d, nu, opt, lambda);
    const double beta = estimate_drift(d, nu, lam);
    EstimateResult r;
    r.estimator = EstimatorKind::daipw;
    r.theta = aipw.theta - beta;
    r.drift = beta;
    r.if_values = dr_influence(d, nu, lam, r.theta);
    r.heuristic_inference = true;
    r.lambda = lam;
    finalize(r, opt);
    return r;
}

EstimateResult estimate_dtmle(const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt,
                              const LambdaFit* lambda) {
    check_sizes(d, nu);
    const auto complete = complete_rows(d);
    if (complete.size() < 5) throw std::invalid_argument("dtmle: fewer than 5 rows with a = 1 and observed outcome");
    const auto treated = treated_rows(d);
    std::vector<Index> all(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) all[i] = static_cast<Index>(i);
    const double tol = dtmle_tolerance(d.n());
    const auto& a = d.arm();
    const auto& m = d.observed();

    struct Iterate {
        NuisanceValues nu;
        VectorXd eta_m;
        LambdaValues lam;
        FluctuationState state;
    };

    NuisanceValues cur = nu;
    VectorXd eta_m = logit_vec(cur.m);
    std::optional<LambdaFit> lam_fit;
    if (!opt.zero_lambda) lam_fit = lambda ? *lambda : fit_lambda(d, cur, opt.smoother);
    const LambdaValues initial = lam_fit ? evaluate(*lam_fit, cur) : LambdaValues::zero(d.n());
    std::optional<Iterate> best;
    bool separation = false;

    for (int it = 1; it <= opt.max_iter; ++it) {
        LambdaValues lam = initial;
        if (lam_fit && it > 1 && opt.lambda_update != LambdaUpdate::fixed) {
            lam_fit = opt.lambda_update == LambdaUpdate::reselect ? fit_lambda(d, cur, opt.smoother)
                                                                  : refit_lambda(d, cur, *lam_fit);
            lam = evaluate(*lam_fit, cur);
        }
        const auto t = TiltingCovariates::from(cur, lam);

        Eigen::MatrixXd xy(t.w1.size(), 2);
        xy.col(0) = t.w1;
        xy.col(1) = t.w2;
        const auto fy = fluctuate(xy, d.outcome(), eta_m, complete);
        const VectorXd off_m = logit_vec(cur.g_m);
        const auto fm = fluctuate(t.z_m, m, off_m, treated);
        FluctuationState st;
        st.iteration = it;
        st.eps_y1 = fy.coefficients(0);
        st.eps_y2 = fy.coefficients(1);
        st.eps_m = fm.coefficients(0);
        separation = separation || fy.separation || fm.separation;
        VectorXd off_a;
        if (!opt.skip_ga_fluctuation) {
            off_a = logit_vec(cur.g_a);
            const auto fa = fluctuate(t.z_a, a, off_a, all);
            st.eps_a = fa.coefficients(0);
            separation = separation || fa.separation;
        }
        st.converged = st.max_abs() < tol;
        spdlog::debug("dtmle iteration {}: eps_y = ({:.3g}, {:.3g}), eps_m = {:.3g}, eps_a = {:.3g}", it, st.eps_y1,
                      st.eps_y2, st.eps_m, st.eps_a);

        if (!best || st.max_abs() < best->state.max_abs()) best = Iterate{cur, eta_m, lam, st};
        if (st.converged) break;

        // Exactly-zero steps leave the nuisances bit-identical.
        if (st.eps_y1 != 0.0) eta_m += st.eps_y1 * t.w1;
        if (st.eps_y2 != 0.0) eta_m += st.eps_y2 * t.w2;
        cur.m = expit_vec(eta_m);
        if (st.eps_m != 0.0) cur.g_m = expit_vec(off_m + st.eps_m * t.z_m);
        if (st.eps_a != 0.0) cur.g_a = expit_vec(off_a + st.eps_a * t.z_a);
        cur.truncate();
    }

    const auto& fin = *best;
    EstimateResult r;
    r.estimator = EstimatorKind::dtmle;
    r.theta = mean(view(fin.nu.m));
    r.if_values = dr_influence(d, fin.nu, fin.lam, r.theta);
    r.drift = estimate_drift(d, fin.nu, fin.lam);
    r.diagnostics = fin.state;
    r.converged = fin.state.converged;
    r.separation = separation;
    r.targeted = fin.nu;
    r.lambda = fin.lam;
    finalize(r, opt);
    if (!r.converged) {
        r.warnings.emplace_back("dtmle did not converge in " + std::to_string(opt.max_iter) + " iterations");
        spdlog::warn("dtmle did not converge in {} iterations (max |eps| = {:.3g}, tolerance {:.3g})", opt.max_iter,
                     fin.state.max_abs(), tol);
    }
    if (separation) r.warnings.emplace_back("fluctuation hit the separation cap");
    return r;
}

EstimateResult contrast(const EstimateResult& r1, const EstimateResult& r0) {
    if (r1.n() != r0.n()) throw std::invalid_argument("contrast: estimates come from datasets of different size");
    if (r1.n() == 0) throw std::invalid_argument("contrast: empty influence function");
    EstimateResult r;
    r.estimator = r1.estimator;
    r.theta = r1.theta_raw - r0.theta_raw;
    r.if_values = r1.scale * r1.if_values - r0.scale * r0.if_values;
    r.converged = r1.converged && r0.converged;
    r.separation = r1.separation || r0.separation;
    r.heuristic_inference = r1.heuristic_inference || r0.heuristic_inference;
    if (r1.drift && r0.drift) r.drift = r1.scale * *r1.drift - r0.scale * *r0.drift;
    EstimatorOptions opt;
    opt.alpha = r1.alpha;
    opt.bounds = {0.0, 1.0, BoundsSource::already_unit};
    finalize(r, opt);
    return r;
}

EstimateResult estimate(EstimatorKind kind, const Dataset& d, const NuisanceValues& nu, const EstimatorOptions& opt,
                        const LambdaFit* lambda) {
    switch (kind) {
        case EstimatorKind::unadjusted: return estimate_unadjusted(d, opt);
        case EstimatorKind::aipw: return estimate_aipw(d, nu, opt);
        case EstimatorKind::tmle: return estimate_tmle(d, nu, opt);
        case EstimatorKind::daipw: return estimate_daipw(d, nu, opt, lambda);
        case EstimatorKind::dtmle: return estimate_dtmle(d, nu, opt, lambda);
    }
    throw std::logic_error("unhandled estimator");
}

}  // namespace driftdr
