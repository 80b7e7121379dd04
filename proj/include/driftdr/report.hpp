#pragma once

// Four-panel summaries of a simulation study: tidy per-metric tables, a
// plain-text summary and static SVG line charts.

#include "driftdr/simulation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace driftdr {

enum class Metric { coverage, scaled_abs_bias, scaled_rmse, se_ratio };

const char* to_string(Metric m);
inline constexpr Metric kAllMetrics[] = {Metric::coverage, Metric::scaled_abs_bias, Metric::scaled_rmse,
                                         Metric::se_ratio};

struct PanelRow {
    char scenario = 'a';
    std::size_t n = 0;
    EstimatorKind estimator = EstimatorKind::aipw;
    double value = 0.0;
};

/// One row per aggregate row, in aggregate order.
std::vector<PanelRow> panel(const std::vector<MetricRow>& rows, Metric m);

/// Columns scenario, n, estimator, value.
void write_panel_csv(std::ostream& out, const std::vector<PanelRow>& rows);

/// Fixed-width table: one line per (scenario, n, estimator).
std::string summary_table(const std::vector<MetricRow>& rows);

/// One facet per scenario, one polyline per estimator over n (log axis).
std::string svg_chart(const std::vector<PanelRow>& rows, Metric m);

}  // namespace driftdr
