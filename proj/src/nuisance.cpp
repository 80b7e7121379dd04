#include "driftdr/nuisance.hpp"

#include "driftdr/numeric.hpp"
#include "driftdr/rng.hpp"

#include <stdexcept>
#include <vector>

namespace driftdr {

NuisanceValues NuisanceValues::make(Eigen::VectorXd g_a, Eigen::VectorXd g_m, Eigen::VectorXd m, double truncation) {
    if (g_a.size() != g_m.size() || g_a.size() != m.size()) {
        throw std::invalid_argument("nuisance vectors differ in length");
    }
    if (!(truncation > 0.0 && truncation < 0.5)) {
        throw std::invalid_argument("truncation bound must lie in (0, 0.5)");
    }
    NuisanceValues v{std::move(g_a), std::move(g_m), std::move(m), truncation};
    v.truncate();
    return v;
}

void NuisanceValues::truncate() {
    const double lo = truncation, hi = 1.0 - truncation;
    g_a = g_a.unaryExpr([=](double x) { return clip(x, lo, hi); });
    g_m = g_m.unaryExpr([=](double x) { return clip(x, lo, hi); });
}

const char* to_string(LearnerChoice c) {
    switch (c) {
        case LearnerChoice::main_terms: return "main_terms";
        case LearnerChoice::lasso: return "lasso";
        case LearnerChoice::stacking: return "stacking";
        case LearnerChoice::known_constant: return "known_constant";
    }
    return "?";
}

LearnerChoice learner_choice_from_string(const std::string& s) {
    if (s == "main_terms") return LearnerChoice::main_terms;
    if (s == "lasso") return LearnerChoice::lasso;
    if (s == "stacking") return LearnerChoice::stacking;
    if (s == "known_constant") return LearnerChoice::known_constant;
    throw std::invalid_argument("unknown learner '" + s + "'");
}

NuisanceValues NuisanceFit::evaluate(const Dataset& d) const {
    const auto& w = d.covariates();
    Eigen::VectorXd mv = m.predict(w).unaryExpr([](double x) { return clip_prediction(x); });
    return NuisanceValues::make(g_a.predict(w), g_m.predict(w), std::move(mv), truncation);
}

NuisancePoint NuisanceFit::at(std::span<const double> w) const {
    const double lo = truncation, hi = 1.0 - truncation;
    return {clip(g_a.predict(w), lo, hi), clip(g_m.predict(w), lo, hi), clip_prediction(m.predict(w))};
}

namespace {

FittedLearner fit_one(const LearnerSpec& spec, const Eigen::MatrixXd& w, const Eigen::VectorXd& y, StackingLoss loss,
                      std::uint64_t seed) {
    switch (spec.choice) {
        case LearnerChoice::known_constant: return known_constant(spec.constant);
        case LearnerChoice::main_terms: return fit_main_terms(w, y);
        case LearnerChoice::lasso:
            return fit_lasso_learner(w, y, spec.interaction_order, spec.folds, seed, spec.lasso);
        case LearnerChoice::stacking: {
            const std::vector<LearnerFactory> lib{main_terms_factory(),
                                                  lasso_factory(spec.interaction_order, spec.folds, spec.lasso)};
            return fit_stacking(lib, w, y, spec.folds, loss, seed);
        }
    }
    throw std::logic_error("unhandled learner choice");
}

template <class Pred>
std::vector<Eigen::Index> rows_where(const Dataset& d, Pred pred) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (pred(d[i])) idx.push_back(static_cast<Eigen::Index>(i));
    }
    return idx;
}

}  // namespace

NuisanceFit fit_nuisance(const Dataset& d, const NuisanceSpec& spec, double truncation, std::uint64_t seed) {
    const auto& w = d.covariates();
    const auto treated = rows_where(d, [](const ObservationRecord& r) { return r.a == 1; });
    const auto complete = rows_where(d, [](const ObservationRecord& r) { return r.a == 1 && r.m == 1; });
    if (treated.empty() || complete.empty()) {
        throw std::invalid_argument("need rows with A = 1 and with A = M = 1 to fit nuisances");
    }
    NuisanceFit fit;
    fit.truncation = truncation;
    fit.g_a = fit_one(spec.g_a, w, d.arm(), StackingLoss::bernoulli_loglik, derive_seed(seed, 1));
    fit.g_m = fit_one(spec.g_m, w(treated, Eigen::all), d.observed()(treated), StackingLoss::bernoulli_loglik,
                      derive_seed(seed, 2));
    fit.m = fit_one(spec.m, w(complete, Eigen::all), d.outcome()(complete), spec.m_loss, derive_seed(seed, 3));
    return fit;
}

}  // namespace driftdr
