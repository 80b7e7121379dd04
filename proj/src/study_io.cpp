#include "driftdr/csv.hpp"
#include "driftdr/simulation.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace driftdr {

namespace {

const std::vector<std::string> kAggregateHeader{"scenario", "n",        "estimator",       "reps",
                                                "mean_theta", "bias",   "bias_se",         "coverage",
                                                "scaled_abs_bias", "scaled_rmse", "se_ratio"};

std::string num(double v) { return csv::format_double(v); }

double field_double(const csv::Table& t, std::size_t row, const char* name) {
    double v;
    const auto& s = t.rows[row][t.column(name)];
    if (s == "nan") return std::nan("");
    if (!csv::parse_double(s, v)) throw csv::CsvError(row + 1, name, "malformed number '" + s + "'");
    return v;
}

}  // namespace

void write_replicate_header(std::ostream& out) {
    csv::write_row(out, {"scenario", "n", "rep", "estimator", "theta_hat", "sigma_hat", "ci_lo", "ci_hi", "covered",
                         "converged", "excluded"});
}

void write_replicate_rows(std::ostream& out, const ReplicateOutcome& r) {
    for (const auto& rec : r.records) {
        csv::write_row(out, {std::string(1, rec.scenario), std::to_string(rec.n), std::to_string(rec.rep),
                             to_string(rec.estimator), num(rec.theta_hat), num(rec.sigma_hat), num(rec.ci_lo),
                             num(rec.ci_hi), rec.covered ? "1" : "0", rec.converged ? "1" : "0",
                             r.failed ? "1" : "0"});
    }
}

void write_aggregate(std::ostream& out, const std::vector<MetricRow>& rows) {
    csv::write_row(out, kAggregateHeader);
    for (const auto& m : rows) {
        csv::write_row(out, {std::string(1, m.scenario), std::to_string(m.n), to_string(m.estimator),
                             std::to_string(m.reps), num(m.mean_theta), num(m.bias), num(m.bias_se), num(m.coverage),
                             num(m.scaled_abs_bias), num(m.scaled_rmse), num(m.se_ratio)});
    }
}

std::vector<MetricRow> read_aggregate(const std::string& path) {
    const auto t = csv::read_file(path);
    for (const auto& h : kAggregateHeader) t.column(h);
    std::vector<MetricRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        MetricRow m;
        const auto& s = row[t.column("scenario")];
        if (s.size() != 1) throw csv::CsvError(i + 1, "scenario", "bad scenario '" + s + "'");
        m.scenario = Scenario::from(s[0]).id;
        double n;
        if (!csv::parse_double(row[t.column("n")], n) || n < 1 || n != std::floor(n)) {
            throw csv::CsvError(i + 1, "n", "bad sample size");
        }
        m.n = static_cast<std::size_t>(n);
        m.estimator = estimator_from_string(row[t.column("estimator")]);
        m.reps = static_cast<int>(field_double(t, i, "reps"));
        m.mean_theta = field_double(t, i, "mean_theta");
        m.bias = field_double(t, i, "bias");
        m.bias_se = field_double(t, i, "bias_se");
        m.coverage = field_double(t, i, "coverage");
        m.scaled_abs_bias = field_double(t, i, "scaled_abs_bias");
        m.scaled_rmse = field_double(t, i, "scaled_rmse");
        m.se_ratio = field_double(t, i, "se_ratio");
        out.push_back(m);
    }
    return out;
}

}  // namespace driftdr
