#pragma once

// Nuisance functions g_A(w) = P(A=1|W=w), g_M(w) = P(M=1|A=1,W=w) and
// m(w) = E(Y|M=1,A=1,W=w): how they are learned and their per-row values.

#include "driftdr/data_model.hpp"
#include "driftdr/learners.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>

namespace driftdr {

inline constexpr double kDefaultTruncation = 0.01;

/// Per-row nuisance evaluations on one dataset. g_a and g_m are truncated
/// into [truncation, 1 - truncation], so g = g_a * g_m >= truncation^2.
struct NuisanceValues {
    Eigen::VectorXd g_a;
    Eigen::VectorXd g_m;
    Eigen::VectorXd m;
    double truncation = kDefaultTruncation;

    static NuisanceValues make(Eigen::VectorXd g_a, Eigen::VectorXd g_m, Eigen::VectorXd m,
                               double truncation = kDefaultTruncation);

    Eigen::VectorXd g() const { return g_a.cwiseProduct(g_m); }
    std::size_t size() const { return static_cast<std::size_t>(m.size()); }
    void truncate();
};

struct NuisancePoint {
    double g_a;
    double g_m;
    double m;
    double g() const { return g_a * g_m; }
};

enum class LearnerChoice { main_terms, lasso, stacking, known_constant };

const char* to_string(LearnerChoice c);
LearnerChoice learner_choice_from_string(const std::string& s);

struct LearnerSpec {
    LearnerChoice choice = LearnerChoice::main_terms;
    double constant = 0.5;
    int interaction_order = 4;
    int folds = 10;
    LassoOptions lasso;

    static LearnerSpec of(LearnerChoice c) {
        LearnerSpec s;
        s.choice = c;
        return s;
    }
};

struct NuisanceSpec {
    LearnerSpec g_a = LearnerSpec::of(LearnerChoice::main_terms);
    LearnerSpec g_m = LearnerSpec::of(LearnerChoice::stacking);
    LearnerSpec m = LearnerSpec::of(LearnerChoice::stacking);
    /// Risk for the outcome-regression ensemble; missingness uses log-loss.
    StackingLoss m_loss = StackingLoss::squared_error;
};

class NuisanceFit {
public:
    FittedLearner g_a;
    FittedLearner g_m;
    FittedLearner m;
    double truncation = kDefaultTruncation;

    /// Truncated g's and m clipped into [0.0005, 0.9995].
    NuisanceValues evaluate(const Dataset& d) const;
    NuisancePoint at(std::span<const double> w) const;
};

/// g_A on all rows, g_M on rows with A = 1, m on rows with A = M = 1.
NuisanceFit fit_nuisance(const Dataset& d, const NuisanceSpec& spec, double truncation, std::uint64_t seed);

}  // namespace driftdr
