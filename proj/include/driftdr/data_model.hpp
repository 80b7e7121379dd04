#pragma once

// Observed trial data O = (W, A, M, M*Y): baseline covariates, a binary arm
// indicator, an outcome-observed indicator and the outcome when observed.

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace driftdr {

struct ObservationRecord {
    std::vector<double> w;
    int a = 0;
    int m = 0;
    /// Present exactly when m == 1.
    std::optional<double> y;

    bool operator==(const ObservationRecord&) const = default;
};

/// Immutable collection of records with a common covariate dimension.
///
/// The numeric column views are computed once at construction. `outcome()`
/// holds the observed outcome for m == 1 rows and 0 elsewhere; callers must
/// only read it under an M (or A*M) weight.
class Dataset {
public:
    Dataset(std::vector<ObservationRecord> records, std::vector<std::string> covariate_names);

    std::size_t n() const noexcept { return records_.size(); }
    std::size_t p() const noexcept { return names_.size(); }
    const std::vector<ObservationRecord>& records() const noexcept { return records_; }
    const ObservationRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<std::string>& covariate_names() const noexcept { return names_; }

    const Eigen::MatrixXd& covariates() const noexcept { return w_; }
    const Eigen::VectorXd& arm() const noexcept { return a_; }
    const Eigen::VectorXd& observed() const noexcept { return m_; }
    const Eigen::VectorXd& outcome() const noexcept { return y_; }

    /// Same records with A recoded; used for per-arm passes.
    Dataset with_arm(const std::vector<int>& arm) const;

    bool operator==(const Dataset& other) const {
        return names_ == other.names_ && records_ == other.records_;
    }

private:
    std::vector<ObservationRecord> records_;
    std::vector<std::string> names_;
    Eigen::MatrixXd w_;
    Eigen::VectorXd a_, m_, y_;
};

enum class BoundsSource { user_supplied, data_min_max, already_unit };

struct OutcomeBounds {
    double lo = 0.0;
    double hi = 1.0;
    BoundsSource source = BoundsSource::already_unit;

    double scale() const noexcept { return hi - lo; }
    double to_raw(double bounded) const noexcept { return lo + bounded * (hi - lo); }
};

const char* to_string(BoundsSource s);

/// Affine map of observed outcomes into [0,1]. With no bounds supplied the
/// observed range is widened by 0.1% on each side. User and automatic bounds
/// clip the transformed values into [0.0005, 0.9995]; already_unit is the
/// identity and only checks the range.
std::pair<Dataset, OutcomeBounds> bound_outcomes(const Dataset& d,
                                                 const std::optional<OutcomeBounds>& bounds);

/// Column mapping for CSV ingestion.
struct CsvSchema {
    std::string arm_col;
    std::string outcome_col;
    /// Explicit 0/1 outcome-observed column; when absent, blank outcome cells
    /// mean missing.
    std::optional<std::string> miss_col;
    std::vector<std::string> covariates;
    /// When set, A = 1 iff the arm cell equals this label (multi-arm files).
    /// Otherwise arm cells must be 0 or 1.
    std::optional<std::string> target_arm;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset load_csv(std::istream& in, const CsvSchema& schema);

/// Distinct arm labels in file order of first appearance.
std::vector<std::string> arm_levels(const std::string& path, const std::string& arm_col);

/// Writes covariates, arm, missingness and outcome columns using the schema's
/// names (miss_col defaults to "observed"). Values round-trip exactly.
void write_csv(std::ostream& out, const Dataset& d, const CsvSchema& schema);

}  // namespace driftdr
