#pragma once

#include <cmath>
#include <span>

namespace driftdr {

// Bounds applied to fitted means and to quantities that enter logits or
// denominators.
inline constexpr double kPredictionLo = 0.0005;
inline constexpr double kPredictionHi = 0.9995;

inline double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clip(double x, double lo, double hi) {
    return x < lo ? lo : (x > hi ? hi : x);
}

inline double clip_prediction(double p) { return clip(p, kPredictionLo, kPredictionHi); }

/// logit of a mean clipped into [kPredictionLo, kPredictionHi].
inline double bounded_logit(double p) { return logit(clip_prediction(p)); }

double mean(std::span<const double> x);

/// Population standard deviation (divisor n).
double sd(std::span<const double> x);

/// Two-sided standard normal critical value z such that P(|Z| > z) = alpha.
double normal_critical_value(double alpha);

}  // namespace driftdr
