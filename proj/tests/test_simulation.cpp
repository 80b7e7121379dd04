#include "support.hpp"

#include "driftdr/csv.hpp"
#include "driftdr/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace driftdr;

namespace {

ReplicateOutcome outcome(char s, std::size_t n, int rep, std::vector<std::pair<double, double>> theta_sigma,
                         double theta0, bool failed = false) {
    ReplicateOutcome o;
    o.scenario = s;
    o.n = n;
    o.rep = rep;
    o.failed = failed;
    const double z = 1.959963984540054;
    for (std::size_t k = 0; k < theta_sigma.size(); ++k) {
        ReplicateRecord r;
        r.scenario = s;
        r.n = n;
        r.rep = rep;
        r.estimator = k == 0 ? EstimatorKind::aipw : EstimatorKind::dtmle;
        r.theta_hat = theta_sigma[k].first;
        r.sigma_hat = theta_sigma[k].second;
        r.ci_lo = r.theta_hat - z * r.sigma_hat / std::sqrt(static_cast<double>(n));
        r.ci_hi = r.theta_hat + z * r.sigma_hat / std::sqrt(static_cast<double>(n));
        r.covered = r.ci_lo <= theta0 && theta0 <= r.ci_hi;
        o.records.push_back(r);
    }
    return o;
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("covariates at zero uniforms") {
    const auto w = covariates_from_uniforms({0, 0, 0, 0, 0, 0});
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == 1.0);
    CHECK(w[3] == 0.0);
    CHECK(w[4] == 0.0);
    CHECK(w[5] == 1.0);
}

TEST_CASE("the two W5 readings differ only in the fifth covariate") {
    const std::array<double, 6> e = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    const auto a = covariates_from_uniforms(e, W5Reading::eps5_eps4);
    const auto b = covariates_from_uniforms(e, W5Reading::eps5_eps6);
    CHECK(a[4] == doctest::Approx(0.2));
    CHECK(b[4] == doctest::Approx(0.3));
    for (int j : {0, 1, 2, 3, 5}) CHECK(a[static_cast<std::size_t>(j)] == b[static_cast<std::size_t>(j)]);
}

TEST_CASE("marginal mean of W1 matches its closed-form integral") {
    Rng rng(1);
    const int draws = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        std::array<double, 6> e;
        for (double& v : e) v = rng.uniform();
        const double w1 = covariates_from_uniforms(e)[0];
        s += w1;
        s2 += w1 * w1;
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - (2.0 * std::log(2.0) - 1.0)) < 3.0 * se);
}

TEST_CASE("generated datasets honour the observation structure") {
    const auto d = generate({500, 9});
    REQUIRE(d.n() == 500);
    REQUIRE(d.covariate_names() == std::vector<std::string>{"w1", "w2", "w3", "w4", "w5", "w6"});
    int treated = 0;
    for (const auto& r : d.records()) {
        CHECK((r.m == 1) == r.y.has_value());
        if (r.y) CHECK((*r.y == 0.0 || *r.y == 1.0));
        treated += r.a;
    }
    CHECK(std::abs(treated - 250) < 4 * 12);
    CHECK(generate({500, 9}) == d);
    CHECK_FALSE(generate({500, 10}) == d);
    const auto full = generate({200, 9, 0.5, W5Reading::eps5_eps4, true});
    for (const auto& r : full.records()) CHECK(r.m == 1);
}

TEST_CASE("truth summary is reproducible and internally consistent") {
    const auto a = true_theta(1'000'000, 5);
    const auto b = true_theta(1'000'000, 5);
    CHECK(a.theta == b.theta);
    CHECK(a.theta > 0.0);
    CHECK(a.theta < 1.0);
    CHECK(a.effect() == doctest::Approx(a.theta - a.theta_arm0));
    CHECK(a.naive_contrast() == doctest::Approx(a.complete_case_arm1 - a.complete_case_arm0));
}

TEST_CASE("efficiency bound matches its closed form") {
    // Var D = E{m(1-m)/g} + Var(m) at the truth, g = g_A g_M.
    Rng rng(77);
    const int draws = 2'000'000;
    double s_ratio = 0.0, s_m = 0.0, s_m2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        std::array<double, 6> e;
        for (double& v : e) v = rng.uniform();
        const auto w = covariates_from_uniforms(e);
        const double m = expit(logit_m0(1, w));
        const double g = 0.5 * expit(logit_gm0(1, w));
        s_ratio += m * (1.0 - m) / g;
        s_m += m;
        s_m2 += m * m;
    }
    const double closed = s_ratio / draws + (s_m2 / draws - (s_m / draws) * (s_m / draws));
    const double mc = efficiency_bound(2'000'000, 78);
    CHECK(mc == doctest::Approx(closed).epsilon(0.02));

    BoundOptions known;
    known.known_g = 1.0;
    known.force_observed = true;
    const double full = efficiency_bound(1'000'000, 79, known);
    CHECK(full < mc);
}

TEST_CASE("replicate seeds separate every coordinate") {
    const auto s = replicate_seed(1, 'a', 200, 0);
    CHECK(s == replicate_seed(1, 'a', 200, 0));
    CHECK(s != replicate_seed(2, 'a', 200, 0));
    CHECK(s != replicate_seed(1, 'b', 200, 0));
    CHECK(s != replicate_seed(1, 'a', 800, 0));
    CHECK(s != replicate_seed(1, 'a', 200, 1));
}

TEST_CASE("a replicate reproduces in isolation") {
    StudyConfig cfg;
    cfg.scenarios = {Scenario::from('d')};
    cfg.n_grid = {200};
    cfg.estimators = parse_estimators("aipw,tmle,daipw,dtmle,unadjusted");
    const auto a = run_replicate(cfg, cfg.scenarios[0], 200, 3, 0.1);
    const auto b = run_replicate(cfg, cfg.scenarios[0], 200, 3, 0.1);
    REQUIRE(a.records.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(a.records[k].theta_hat == b.records[k].theta_hat);
        CHECK(a.records[k].sigma_hat == b.records[k].sigma_hat);
    }
}

TEST_CASE("aggregate metrics follow their definitions") {
    const double theta0 = 0.3, bound = 0.25;
    const std::size_t n = 400;
    std::vector<ReplicateOutcome> reps = {
        outcome('b', n, 0, {{0.31, 0.5}, {0.29, 0.6}}, theta0),
        outcome('b', n, 1, {{0.36, 0.4}, {0.30, 0.5}}, theta0),
        outcome('b', n, 2, {{0.27, 0.5}, {0.33, 0.45}}, theta0),
        outcome('b', n, 3, {{9.0, 9.0}, {9.0, 9.0}}, theta0, true),
    };
    const auto rows = aggregate(reps, theta0, bound);
    REQUIRE(rows.size() == 2);
    const auto& a = rows[0];
    CHECK(a.estimator == EstimatorKind::aipw);
    CHECK(a.reps == 3);
    const double mean = (0.31 + 0.36 + 0.27) / 3.0;
    CHECK(a.mean_theta == doctest::Approx(mean));
    CHECK(a.bias == doctest::Approx(mean - theta0));
    const double var = (std::pow(0.31 - mean, 2) + std::pow(0.36 - mean, 2) + std::pow(0.27 - mean, 2)) / 2.0;
    CHECK(a.bias_se == doctest::Approx(std::sqrt(var / 3.0)));
    CHECK(a.scaled_abs_bias == doctest::Approx(20.0 * std::abs(mean - theta0)));
    const double mse = (std::pow(0.01, 2) + std::pow(0.06, 2) + std::pow(0.03, 2)) / 3.0;
    CHECK(a.scaled_rmse == doctest::Approx(std::sqrt(400.0 * mse / bound)));
    CHECK(a.se_ratio == doctest::Approx((1.4 / 3.0) / (20.0 * std::sqrt(var))));
    // 0.36 - 1.96 * 0.4 / 20 = 0.3208 > 0.3, so only two intervals cover
    CHECK(a.coverage == doctest::Approx(2.0 / 3.0));
    CHECK(rows[1].coverage == doctest::Approx(1.0));
}

TEST_CASE("aggregate CSV round-trips and rejects foreign files") {
    const double theta0 = 0.3;
    std::vector<ReplicateOutcome> reps = {outcome('a', 200, 0, {{0.31, 0.5}, {0.29, 0.6}}, theta0),
                                          outcome('a', 200, 1, {{0.36, 0.4}, {0.30, 0.5}}, theta0)};
    const auto rows = aggregate(reps, theta0, 0.25);
    const auto dir = testing::scratch_dir("agg");
    {
        std::ofstream out(dir / "aggregate.csv");
        out << "# comment line\n";
        write_aggregate(out, rows);
    }
    const auto back = read_aggregate((dir / "aggregate.csv").string());
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].estimator == rows[i].estimator);
        CHECK(back[i].coverage == rows[i].coverage);
        CHECK(back[i].scaled_rmse == rows[i].scaled_rmse);
        CHECK(back[i].se_ratio == rows[i].se_ratio);
    }
    {
        std::ofstream out(dir / "bad.csv");
        out << "a,b\n1,2\n";
    }
    CHECK_THROWS(read_aggregate((dir / "bad.csv").string()));
    CHECK_THROWS(read_aggregate((dir / "missing.csv").string()));
}

TEST_CASE("replicate rows carry one line per estimator") {
    std::ostringstream os;
    write_replicate_header(os);
    write_replicate_rows(os, outcome('c', 800, 4, {{0.31, 0.5}, {0.29, 0.6}}, 0.3));
    std::istringstream in(os.str());
    const auto t = csv::read(in);
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[1][t.column("estimator")] == "dtmle");
    CHECK(t.rows[0][t.column("rep")] == "4");
}

TEST_CASE("scenario parsing") {
    const auto s = parse_scenarios("a,d");
    REQUIRE(s.size() == 2);
    CHECK(s[0].m_consistent);
    CHECK(s[0].gm_consistent);
    CHECK_FALSE(s[1].m_consistent);
    CHECK_FALSE(s[1].gm_consistent);
    CHECK(Scenario::from('b').m_consistent);
    CHECK_FALSE(Scenario::from('b').gm_consistent);
    CHECK_THROWS(parse_scenarios("a,e"));
}

}
