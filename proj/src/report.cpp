#include "driftdr/report.hpp"

#include "driftdr/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace driftdr {

const char* to_string(Metric m) {
    switch (m) {
        case Metric::coverage: return "coverage";
        case Metric::scaled_abs_bias: return "scaled_abs_bias";
        case Metric::scaled_rmse: return "scaled_rmse";
        case Metric::se_ratio: return "se_ratio";
    }
    return "?";
}

namespace {

double metric_value(const MetricRow& r, Metric m) {
    switch (m) {
        case Metric::coverage: return r.coverage;
        case Metric::scaled_abs_bias: return r.scaled_abs_bias;
        case Metric::scaled_rmse: return r.scaled_rmse;
        case Metric::se_ratio: return r.se_ratio;
    }
    return std::nan("");
}

std::optional<double> reference_line(Metric m) {
    switch (m) {
        case Metric::coverage: return 0.95;
        case Metric::scaled_rmse:
        case Metric::se_ratio: return 1.0;
        case Metric::scaled_abs_bias: return std::nullopt;
    }
    return std::nullopt;
}

const char* colour(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::unadjusted: return "#7f7f7f";
        case EstimatorKind::aipw: return "#1f77b4";
        case EstimatorKind::tmle: return "#ff7f0e";
        case EstimatorKind::daipw: return "#2ca02c";
        case EstimatorKind::dtmle: return "#d62728";
    }
    return "#000000";
}

std::string fmt(double v, int prec = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::vector<PanelRow> panel(const std::vector<MetricRow>& rows, Metric m) {
    std::vector<PanelRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r.scenario, r.n, r.estimator, metric_value(r, m)});
    return out;
}

void write_panel_csv(std::ostream& out, const std::vector<PanelRow>& rows) {
    csv::write_row(out, {"scenario", "n", "estimator", "value"});
    for (const auto& r : rows) {
        csv::write_row(out, {std::string(1, r.scenario), std::to_string(r.n), to_string(r.estimator),
                             csv::format_double(r.value)});
    }
}

std::string summary_table(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %6s %-10s %5s %10s %9s %15s %11s %8s\n", "scenario", "n", "estimator",
                  "reps", "mean_theta", "coverage", "scaled_abs_bias", "scaled_rmse", "se_ratio");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-8c %6zu %-10s %5d %10.5f %9.3f %15.3f %11.3f %8.3f\n", r.scenario, r.n,
                      to_string(r.estimator), r.reps, r.mean_theta, r.coverage, r.scaled_abs_bias, r.scaled_rmse,
                      r.se_ratio);
        os << line;
    }
    return os.str();
}

std::string svg_chart(const std::vector<PanelRow>& rows, Metric m) {
    std::vector<char> scenarios;
    std::vector<EstimatorKind> estimators;
    double n_lo = INFINITY, n_hi = -INFINITY, v_lo = INFINITY, v_hi = -INFINITY;
    for (const auto& r : rows) {
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
        if (std::find(estimators.begin(), estimators.end(), r.estimator) == estimators.end()) {
            estimators.push_back(r.estimator);
        }
        n_lo = std::min(n_lo, std::log(static_cast<double>(r.n)));
        n_hi = std::max(n_hi, std::log(static_cast<double>(r.n)));
        if (std::isfinite(r.value)) {
            v_lo = std::min(v_lo, r.value);
            v_hi = std::max(v_hi, r.value);
        }
    }
    if (const auto ref = reference_line(m)) {
        v_lo = std::min(v_lo, *ref);
        v_hi = std::max(v_hi, *ref);
    }
    if (!(v_hi > v_lo)) {
        v_lo = std::isfinite(v_lo) ? v_lo - 0.5 : 0.0;
        v_hi = v_lo + 1.0;
    }
    if (!(n_hi > n_lo)) {
        n_lo -= 0.5;
        n_hi += 0.5;
    }
    const double pad = 0.05 * (v_hi - v_lo);
    v_lo -= pad;
    v_hi += pad;

    const double fw = 240, fh = 200, ml = 50, mt = 30, gap = 20, legend = 110;
    const double width = ml + static_cast<double>(scenarios.size()) * (fw + gap) + legend;
    const double height = mt + fh + 50;
    auto px = [&](std::size_t f, double logn) {
        return ml + static_cast<double>(f) * (fw + gap) + (logn - n_lo) / (n_hi - n_lo) * fw;
    };
    auto py = [&](double v) { return mt + fh - (v - v_lo) / (v_hi - v_lo) * fh; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\"" << fmt(height, 0)
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << fmt(ml, 0) << "\" y=\"16\" font-size=\"13\">" << to_string(m) << "</text>\n";
    for (std::size_t f = 0; f < scenarios.size(); ++f) {
        const double x0 = px(f, n_lo);
        os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(fw) << "\" height=\"" << fmt(fh)
           << "\" fill=\"none\" stroke=\"#444\"/>\n";
        os << "<text x=\"" << fmt(x0 + fw / 2) << "\" y=\"" << fmt(mt - 4) << "\" text-anchor=\"middle\">scenario "
           << scenarios[f] << "</text>\n";
        if (const auto ref = reference_line(m)) {
            os << "<line x1=\"" << fmt(x0) << "\" x2=\"" << fmt(x0 + fw) << "\" y1=\"" << fmt(py(*ref)) << "\" y2=\""
               << fmt(py(*ref)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        }
        std::map<std::size_t, bool> ticks;
        for (const auto& r : rows) {
            if (r.scenario == scenarios[f]) ticks[r.n] = true;
        }
        for (const auto& [n, unused] : ticks) {
            const double x = px(f, std::log(static_cast<double>(n)));
            os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(mt + fh + 14) << "\" text-anchor=\"middle\">" << n
               << "</text>\n";
        }
        for (auto e : estimators) {
            std::vector<const PanelRow*> pts;
            for (const auto& r : rows) {
                if (r.scenario == scenarios[f] && r.estimator == e && std::isfinite(r.value)) pts.push_back(&r);
            }
            std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->n < b->n; });
            if (pts.empty()) continue;
            os << "<polyline fill=\"none\" stroke=\"" << colour(e) << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < pts.size(); ++i) {
                os << (i ? " " : "") << fmt(px(f, std::log(static_cast<double>(pts[i]->n)))) << ","
                   << fmt(py(pts[i]->value));
            }
            os << "\"/>\n";
        }
    }
    for (int t = 0; t <= 4; ++t) {
        const double v = v_lo + (v_hi - v_lo) * t / 4.0;
        os << "<text x=\"" << fmt(ml - 4) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\">" << fmt(v, 3)
           << "</text>\n";
    }
    const double lx = px(scenarios.size() - 1, n_hi) + gap;
    for (std::size_t i = 0; i < estimators.size(); ++i) {
        const double y = mt + 12 + 16 * static_cast<double>(i);
        os << "<line x1=\"" << fmt(lx) << "\" x2=\"" << fmt(lx + 18) << "\" y1=\"" << fmt(y) << "\" y2=\"" << fmt(y)
           << "\" stroke=\"" << colour(estimators[i]) << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt(lx + 24) << "\" y=\"" << fmt(y + 4) << "\">" << to_string(estimators[i]) << "</text>\n";
    }
    os << "<text x=\"" << fmt(ml + (width - ml - legend) / 2) << "\" y=\"" << fmt(height - 8)
       << "\" text-anchor=\"middle\">n (log scale)</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace driftdr
