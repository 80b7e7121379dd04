#include "driftdr/numeric.hpp"

#include <boost/math/distributions/normal.hpp>
#include <stdexcept>

namespace driftdr {

double mean(std::span<const double> x) {
    if (x.empty()) {
        throw std::invalid_argument("mean of empty range");
    }
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sd(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

double normal_critical_value(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(boost::math::complement(standard, alpha / 2.0));
}

}  // namespace driftdr
