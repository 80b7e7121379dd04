#include "driftdr/data_model.hpp"

#include "driftdr/csv.hpp"
#include "driftdr/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace driftdr {

Dataset::Dataset(std::vector<ObservationRecord> records, std::vector<std::string> covariate_names)
    : records_(std::move(records)), names_(std::move(covariate_names)) {
    if (records_.empty()) {
        throw std::invalid_argument("dataset must contain at least one record");
    }
    const std::size_t n = records_.size();
    const std::size_t p = names_.size();
    w_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    a_.resize(static_cast<Eigen::Index>(n));
    m_.resize(static_cast<Eigen::Index>(n));
    y_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records_[i];
        if (r.w.size() != p) {
            throw std::invalid_argument("record " + std::to_string(i + 1) + " has " + std::to_string(r.w.size()) +
                                        " covariates, expected " + std::to_string(p));
        }
        if ((r.a != 0 && r.a != 1) || (r.m != 0 && r.m != 1)) {
            throw std::invalid_argument("record " + std::to_string(i + 1) + ": arm and missingness must be 0/1");
        }
        if ((r.m == 1) != r.y.has_value()) {
            throw std::invalid_argument("record " + std::to_string(i + 1) +
                                        ": outcome must be present exactly when observed");
        }
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < p; ++j) w_(ii, static_cast<Eigen::Index>(j)) = r.w[j];
        a_(ii) = r.a;
        m_(ii) = r.m;
        y_(ii) = r.y.value_or(0.0);
    }
}

Dataset Dataset::with_arm(const std::vector<int>& arm) const {
    if (arm.size() != records_.size()) {
        throw std::invalid_argument("arm recode length mismatch");
    }
    auto recs = records_;
    for (std::size_t i = 0; i < recs.size(); ++i) recs[i].a = arm[i];
    return Dataset(std::move(recs), names_);
}

const char* to_string(BoundsSource s) {
    switch (s) {
        case BoundsSource::user_supplied: return "user_supplied";
        case BoundsSource::data_min_max: return "data_min_max";
        case BoundsSource::already_unit: return "already_unit";
    }
    return "?";
}

std::pair<Dataset, OutcomeBounds> bound_outcomes(const Dataset& d, const std::optional<OutcomeBounds>& bounds) {
    double ymin = INFINITY, ymax = -INFINITY;
    for (const auto& r : d.records()) {
        if (r.y) {
            ymin = std::min(ymin, *r.y);
            ymax = std::max(ymax, *r.y);
        }
    }
    if (!std::isfinite(ymin)) {
        throw std::invalid_argument("all outcomes are missing");
    }

    OutcomeBounds used;
    if (bounds) {
        used = *bounds;
        if (!(used.lo < used.hi)) {
            throw std::invalid_argument("outcome bounds must satisfy lo < hi (a constant outcome makes the estimand degenerate)");
        }
        if (ymin < used.lo || ymax > used.hi) {
            throw std::invalid_argument("observed outcomes fall outside the supplied bounds");
        }
    } else {
        if (!(ymin < ymax)) {
            throw std::invalid_argument("observed outcome is constant; the estimand is degenerate");
        }
        const double pad = 0.001 * (ymax - ymin);
        used = {ymin - pad, ymax + pad, BoundsSource::data_min_max};
    }

    if (used.source == BoundsSource::already_unit) {
        if (used.lo != 0.0 || used.hi != 1.0) {
            throw std::invalid_argument("already_unit bounds must be [0,1]");
        }
        return {d, used};
    }

    auto recs = d.records();
    for (auto& r : recs) {
        if (r.y) r.y = clip((*r.y - used.lo) / (used.hi - used.lo), kPredictionLo, kPredictionHi);
    }
    return {Dataset(std::move(recs), d.covariate_names()), used};
}

namespace {

int parse_binary(const std::string& cell, std::size_t row, const std::string& col, const char* what) {
    double v;
    if (csv::parse_double(cell, v) && (v == 0.0 || v == 1.0)) return static_cast<int>(v);
    throw csv::CsvError(row, col,
                        "row " + std::to_string(row) + ", column '" + col + "': non-binary " + what + " value '" +
                            cell + "'");
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

Dataset load_csv(std::istream& in, const CsvSchema& schema) {
    if (schema.covariates.empty()) {
        throw std::invalid_argument("schema must name at least one covariate column");
    }
    const csv::Table t = csv::read(in);
    const std::size_t arm_j = t.column(schema.arm_col);
    const std::size_t y_j = t.column(schema.outcome_col);
    std::optional<std::size_t> m_j;
    if (schema.miss_col) m_j = t.column(*schema.miss_col);
    std::vector<std::size_t> w_j;
    for (const auto& c : schema.covariates) w_j.push_back(t.column(c));

    std::vector<ObservationRecord> recs;
    recs.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t rn = i + 1;
        ObservationRecord r;
        r.w.reserve(w_j.size());
        for (std::size_t k = 0; k < w_j.size(); ++k) {
            const auto& cell = row[w_j[k]];
            double v;
            if (is_blank(cell)) {
                throw csv::CsvError(rn, schema.covariates[k],
                                    "row " + std::to_string(rn) + ", column '" + schema.covariates[k] +
                                        "': missing covariate value (covariates must be complete)");
            }
            if (!csv::parse_double(cell, v) || !std::isfinite(v)) {
                throw csv::CsvError(rn, schema.covariates[k],
                                    "row " + std::to_string(rn) + ", column '" + schema.covariates[k] +
                                        "': malformed number '" + cell + "'");
            }
            r.w.push_back(v);
        }
        if (schema.target_arm) {
            r.a = row[arm_j] == *schema.target_arm ? 1 : 0;
        } else {
            r.a = parse_binary(row[arm_j], rn, schema.arm_col, "arm");
        }

        const auto& ycell = row[y_j];
        const bool blank = is_blank(ycell);
        if (m_j) {
            r.m = parse_binary(row[*m_j], rn, *schema.miss_col, "missingness");
            if (r.m == 1 && blank) {
                throw csv::CsvError(rn, schema.outcome_col,
                                    "row " + std::to_string(rn) + ", column '" + schema.outcome_col +
                                        "': outcome blank but marked observed");
            }
        } else {
            r.m = blank ? 0 : 1;
        }
        if (r.m == 1) {
            double v;
            if (!csv::parse_double(ycell, v) || !std::isfinite(v)) {
                throw csv::CsvError(rn, schema.outcome_col,
                                    "row " + std::to_string(rn) + ", column '" + schema.outcome_col +
                                        "': malformed number '" + ycell + "'");
            }
            r.y = v;
        }
        recs.push_back(std::move(r));
    }
    if (recs.empty()) {
        throw csv::CsvError(0, "", "file has a header but no data rows");
    }
    return Dataset(std::move(recs), schema.covariates);
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return load_csv(in, schema);
}

std::vector<std::string> arm_levels(const std::string& path, const std::string& arm_col) {
    const auto t = csv::read_file(path);
    const std::size_t j = t.column(arm_col);
    std::vector<std::string> levels;
    for (const auto& row : t.rows) {
        if (std::find(levels.begin(), levels.end(), row[j]) == levels.end()) levels.push_back(row[j]);
    }
    return levels;
}

void write_csv(std::ostream& out, const Dataset& d, const CsvSchema& schema) {
    const std::string miss = schema.miss_col.value_or("observed");
    std::vector<std::string> header = d.covariate_names();
    header.push_back(schema.arm_col);
    header.push_back(miss);
    header.push_back(schema.outcome_col);
    csv::write_row(out, header);
    std::vector<std::string> fields;
    for (const auto& r : d.records()) {
        fields.clear();
        for (double v : r.w) fields.push_back(csv::format_double(v));
        fields.push_back(std::to_string(r.a));
        fields.push_back(std::to_string(r.m));
        fields.push_back(r.y ? csv::format_double(*r.y) : std::string());
        csv::write_row(out, fields);
    }
}

}  // namespace driftdr
