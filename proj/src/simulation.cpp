#include "driftdr/simulation.hpp"

#include "driftdr/numeric.hpp"
#include "driftdr/rng.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <condition_variable>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace driftdr {

const char* to_string(W5Reading r) { return r == W5Reading::eps5_eps4 ? "eps5*eps4" : "eps5*eps6"; }

Covariates covariates_from_uniforms(const std::array<double, 6>& e, W5Reading w5) {
    return {std::log(e[0] + 1.0),
            e[1] / (1.0 + e[0] * e[0]),
            e[0] + 1.0 / (e[2] + 1.0),
            std::sqrt(e[1] + e[3]),
            w5 == W5Reading::eps5_eps4 ? e[4] * e[3] : e[4] * e[5],
            1.0 / (e[1] + e[5] + 1.0)};
}

double logit_gm0(int a, const Covariates& w) {
    const auto [w1, w2, w3, w4, w5, w6] = w;
    return 2.0 - w1 + 4.0 * w2 - 2.0 * w4 + 3.0 * w2 * w6 + 3.0 * w1 * w5 * w6 -
           a * (1.5 - 4.0 * w1 + 4.0 * w2 + 2.0 * w3 - 7.0 * w1 * w2 - 3.0 * w2 * w4 * w5);
}

double logit_m0(int a, const Covariates& w) {
    const auto [w1, w2, w3, w4, w5, w6] = w;
    return -0.5 - w1 - w2 + w4 + 2.0 * w2 * w6 + 2.0 * w1 * w5 * w6 -
           a * (2.0 - w1 + 3.0 * w2 + w3 - 6.0 * w1 * w2 - 4.0 * w2 * w4 * w5);
}

namespace {

Covariates draw_covariates(Rng& rng, W5Reading w5) {
    std::array<double, 6> e;
    for (double& v : e) v = rng.uniform();
    return covariates_from_uniforms(e, w5);
}

}  // namespace

Dataset generate(const DgpConfig& cfg) {
    if (cfg.n < 50) throw std::invalid_argument("generate: n must be at least 50");
    if (!(cfg.arm_prob > 0.0 && cfg.arm_prob < 1.0)) throw std::invalid_argument("generate: arm_prob must lie in (0,1)");
    Rng rng(cfg.seed);
    std::vector<ObservationRecord> rows;
    rows.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const auto w = draw_covariates(rng, cfg.w5);
        ObservationRecord o;
        o.w.assign(w.begin(), w.end());
        o.a = rng.bernoulli(cfg.arm_prob) ? 1 : 0;
        // every row consumes the same number of draws
        const bool observed = rng.bernoulli(expit(logit_gm0(o.a, w)));
        const bool y = rng.bernoulli(expit(logit_m0(o.a, w)));
        o.m = cfg.force_observed || observed ? 1 : 0;
        if (o.m == 1) o.y = y ? 1.0 : 0.0;
        rows.push_back(std::move(o));
    }
    return Dataset(std::move(rows), {"w1", "w2", "w3", "w4", "w5", "w6"});
}

Scenario Scenario::from(char id) {
    switch (id) {
        case 'a': return {'a', true, true};
        case 'b': return {'b', true, false};
        case 'c': return {'c', false, true};
        case 'd': return {'d', false, false};
        default: throw std::invalid_argument(std::string("unknown scenario '") + id + "'");
    }
}

NuisanceSpec Scenario::nuisance_spec(int folds) const {
    NuisanceSpec spec;
    spec.g_a = LearnerSpec::of(LearnerChoice::main_terms);
    spec.g_m = LearnerSpec::of(gm_consistent ? LearnerChoice::lasso : LearnerChoice::main_terms);
    spec.m = LearnerSpec::of(m_consistent ? LearnerChoice::lasso : LearnerChoice::main_terms);
    spec.g_m.folds = spec.m.folds = folds;
    return spec;
}

std::vector<Scenario> parse_scenarios(const std::string& csv) {
    std::vector<Scenario> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item.size() != 1) throw std::invalid_argument("unknown scenario '" + item + "'");
        const auto s = Scenario::from(item[0]);
        for (const auto& o : out) {
            if (o.id == s.id) throw std::invalid_argument("duplicate scenario '" + item + "'");
        }
        out.push_back(s);
    }
    if (out.empty()) throw std::invalid_argument("no scenarios requested");
    return out;
}

TruthSummary true_theta(std::size_t draws, std::uint64_t seed, W5Reading w5) {
    if (draws < 1'000'000) throw std::invalid_argument("true_theta: at least 1e6 draws required");
    Rng rng(seed);
    double s1 = 0.0, s0 = 0.0, cc1 = 0.0, cc0 = 0.0, p1 = 0.0, p0 = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const auto w = draw_covariates(rng, w5);
        const double m1 = expit(logit_m0(1, w)), m0 = expit(logit_m0(0, w));
        const double g1 = expit(logit_gm0(1, w)), g0 = expit(logit_gm0(0, w));
        s1 += m1;
        s0 += m0;
        cc1 += m1 * g1;
        cc0 += m0 * g0;
        p1 += g1;
        p0 += g0;
    }
    const auto n = static_cast<double>(draws);
    return {s1 / n, s0 / n, cc1 / p1, cc0 / p0};
}

double efficiency_bound(std::size_t draws, std::uint64_t seed, const BoundOptions& opt) {
    if (draws < 1'000'000) throw std::invalid_argument("efficiency_bound: at least 1e6 draws required");
    const double arm_prob = 0.5;
    Rng rng(seed);
    // Welford; the variance does not depend on the theta0 shift.
    double mean_d = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const auto w = draw_covariates(rng, opt.w5);
        const int a = rng.bernoulli(arm_prob) ? 1 : 0;
        const double gm = expit(logit_gm0(1, w));
        const bool observed = rng.bernoulli(expit(logit_gm0(a, w)));
        const double m1 = expit(logit_m0(1, w));
        const double y = rng.bernoulli(expit(logit_m0(a, w))) ? 1.0 : 0.0;
        const int m = opt.force_observed || observed ? 1 : 0;
        const double g = opt.known_g ? *opt.known_g : arm_prob * (opt.force_observed ? 1.0 : gm);
        const double d = a * m / g * (y - m1) + m1;
        const double delta = d - mean_d;
        mean_d += delta / static_cast<double>(i + 1);
        m2 += delta * (d - mean_d);
    }
    return m2 / static_cast<double>(draws);
}

std::uint64_t replicate_seed(std::uint64_t master, char scenario, std::size_t n, int k) {
    return derive_seed(master, {static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(k)});
}

ReplicateOutcome run_replicate(const StudyConfig& cfg, const Scenario& s, std::size_t n, int k, double theta0) {
    ReplicateOutcome out;
    out.scenario = s.id;
    out.n = n;
    out.rep = k;
    out.seed = replicate_seed(cfg.seed, s.id, n, k);
    try {
        DgpConfig dgp;
        dgp.n = n;
        dgp.seed = derive_seed(out.seed, 0);
        dgp.w5 = cfg.w5;
        const auto d = generate(dgp);
        const auto fit = fit_nuisance(d, s.nuisance_spec(cfg.folds), cfg.truncation, derive_seed(out.seed, 1));
        if (fit.g_a.separation || fit.g_m.separation || fit.m.separation) {
            out.failed = true;
            out.error = "nuisance logistic fit separated";
        }
        const auto nu = fit.evaluate(d);
        const auto& opt = cfg.estimator_options;

        std::optional<LambdaFit> lam;
        for (auto e : cfg.estimators) {
            if ((e == EstimatorKind::daipw || e == EstimatorKind::dtmle) && !opt.zero_lambda && !lam) {
                lam = fit_lambda(d, nu, opt.smoother);
            }
        }
        for (auto e : cfg.estimators) {
            const auto r = estimate(e, d, nu, opt, lam ? &*lam : nullptr);
            ReplicateRecord rec;
            rec.scenario = s.id;
            rec.n = n;
            rec.rep = k;
            rec.estimator = e;
            rec.theta_hat = r.theta;
            rec.sigma_hat = r.sigma;
            rec.ci_lo = r.ci_lo;
            rec.ci_hi = r.ci_hi;
            rec.covered = r.ci_lo <= theta0 && theta0 <= r.ci_hi;
            rec.converged = r.converged && !r.separation;
            out.records.push_back(rec);
        }
    } catch (const std::exception& ex) {
        out.failed = true;
        out.error = ex.what();
    }
    return out;
}

std::vector<MetricRow> aggregate(const std::vector<ReplicateOutcome>& reps, double theta0, double bound) {
    struct Key {
        std::size_t order;
        char scenario;
        std::size_t n;
        EstimatorKind estimator;
    };
    std::vector<Key> keys;
    std::map<std::tuple<char, std::size_t, EstimatorKind>, std::vector<const ReplicateRecord*>> groups;
    for (const auto& r : reps) {
        for (const auto& rec : r.records) {
            const auto k = std::make_tuple(rec.scenario, rec.n, rec.estimator);
            auto [it, inserted] = groups.try_emplace(k);
            if (inserted) keys.push_back({keys.size(), rec.scenario, rec.n, rec.estimator});
            if (!r.failed) it->second.push_back(&rec);
        }
    }
    std::vector<MetricRow> out;
    for (const auto& key : keys) {
        const auto& g = groups.at(std::make_tuple(key.scenario, key.n, key.estimator));
        MetricRow row;
        row.scenario = key.scenario;
        row.n = key.n;
        row.estimator = key.estimator;
        row.reps = static_cast<int>(g.size());
        const auto r = static_cast<double>(g.size());
        const double sn = std::sqrt(static_cast<double>(key.n));
        if (g.empty()) {
            row.mean_theta = row.bias = row.bias_se = row.coverage = row.scaled_abs_bias = row.scaled_rmse =
                row.se_ratio = std::nan("");
            out.push_back(row);
            continue;
        }
        double st = 0.0, ss = 0.0, sq = 0.0, cov = 0.0;
        for (const auto* rec : g) {
            st += rec->theta_hat;
            ss += rec->sigma_hat;
            sq += (rec->theta_hat - theta0) * (rec->theta_hat - theta0);
            cov += rec->covered ? 1.0 : 0.0;
        }
        row.mean_theta = st / r;
        double var = 0.0;
        for (const auto* rec : g) var += (rec->theta_hat - row.mean_theta) * (rec->theta_hat - row.mean_theta);
        const double sd_theta = g.size() > 1 ? std::sqrt(var / (r - 1.0)) : std::nan("");
        row.bias = row.mean_theta - theta0;
        row.bias_se = sd_theta / std::sqrt(r);
        row.coverage = cov / r;
        row.scaled_abs_bias = sn * std::abs(row.bias);
        row.scaled_rmse = std::sqrt(static_cast<double>(key.n) * (sq / r) / bound);
        // sigma_hat is the influence-function SD, so sigma_hat / sqrt(n) is the standard error
        row.se_ratio = (ss / r) / (sn * sd_theta);
        out.push_back(row);
    }
    return out;
}

TruthSummary study_truth(const StudyConfig& cfg) {
    return true_theta(cfg.truth_draws, derive_seed(cfg.seed, 0x7472757468ULL), cfg.w5);
}

double study_bound(const StudyConfig& cfg) {
    BoundOptions bo;
    bo.w5 = cfg.w5;
    return efficiency_bound(cfg.truth_draws, derive_seed(cfg.seed, 0x626f756e64ULL), bo);
}

ScenarioReport run_study(const StudyConfig& cfg, const StudyCallbacks& callbacks) {
    return run_study(cfg, study_truth(cfg).theta, study_bound(cfg), callbacks);
}

ScenarioReport run_study(const StudyConfig& cfg, double theta0, double bound, const StudyCallbacks& callbacks) {
    if (cfg.reps < 2) throw std::invalid_argument("run_study: reps must be at least 2");
    if (cfg.scenarios.empty() || cfg.n_grid.empty() || cfg.estimators.empty()) {
        throw std::invalid_argument("run_study: empty scenario, n or estimator list");
    }
    for (auto n : cfg.n_grid) {
        if (n < 50) throw std::invalid_argument("run_study: every n must be at least 50");
    }
    struct Task {
        Scenario s;
        std::size_t n;
        int k;
    };
    std::vector<Task> tasks;
    for (const auto& s : cfg.scenarios) {
        for (auto n : cfg.n_grid) {
            for (int k = 0; k < cfg.reps; ++k) tasks.push_back({s, n, k});
        }
    }

    ScenarioReport report;
    report.theta0 = theta0;
    report.bound = bound;
    report.attempted = tasks.size();
    report.replicates.resize(tasks.size());

    std::vector<bool> done(tasks.size(), false);
    std::mutex mu;
    std::condition_variable cv;
    std::size_t next_task = 0;

    auto worker = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mu);
                if (next_task == tasks.size()) return;
                i = next_task++;
            }
            auto r = run_replicate(cfg, tasks[i].s, tasks[i].n, tasks[i].k, theta0);
            {
                std::lock_guard lock(mu);
                report.replicates[i] = std::move(r);
                done[i] = true;
            }
            cv.notify_one();
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);

    // single ordered writer
    std::size_t block_failures = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return done[i]; });
        }
        const auto& r = report.replicates[i];
        if (r.failed) {
            ++report.failures;
            ++block_failures;
            spdlog::debug("replicate {} n={} k={} excluded: {}", r.scenario, r.n, r.rep, r.error);
        }
        if (callbacks.on_replicate) callbacks.on_replicate(r);
        const bool block_end = i + 1 == tasks.size() || tasks[i + 1].n != tasks[i].n || tasks[i + 1].s.id != tasks[i].s.id;
        if (block_end) {
            if (callbacks.on_block) callbacks.on_block(tasks[i].s.id, tasks[i].n, block_failures);
            block_failures = 0;
        }
    }
    for (auto& t : pool) t.join();

    report.metrics = aggregate(report.replicates, theta0, bound);
    if (static_cast<double>(report.failures) > 0.01 * static_cast<double>(report.attempted)) {
        spdlog::warn("{} of {} replicates failed and were excluded from the aggregates", report.failures,
                     report.attempted);
    }
    return report;
}

}  // namespace driftdr
