#pragma once

// Shared fixtures: hand-rolled random generators for property tests and
// scratch directories for file-level tests.

#include "driftdr/data_model.hpp"
#include "driftdr/numeric.hpp"
#include "driftdr/nuisance.hpp"
#include "driftdr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

/// Random dataset with p covariates. Outcomes are fractional when
/// `fractional`, otherwise 0/1. At least two complete cases are guaranteed.
inline driftdr::Dataset random_dataset(driftdr::Rng& rng, std::size_t n, std::size_t p, bool fractional = true) {
    std::vector<driftdr::ObservationRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = recs[i];
        for (std::size_t j = 0; j < p; ++j) r.w.push_back(2.0 * rng.uniform() - 1.0);
        r.a = (i < 2) ? 1 : static_cast<int>(rng.bernoulli(0.5));
        const double pm = driftdr::expit(0.8 + r.w[0]);
        r.m = (i < 2) ? 1 : static_cast<int>(rng.bernoulli(pm));
        if (r.m) {
            const double mu = driftdr::expit(-0.3 + 0.9 * r.w[0] - 0.5 * (p > 1 ? r.w[1] : 0.0));
            r.y = fractional ? std::clamp(std::round((mu + 0.6 * (rng.uniform() - 0.5)) * 1000.0) / 1000.0, 0.001, 0.999)
                             : static_cast<double>(rng.bernoulli(mu));
        }
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return driftdr::Dataset(std::move(recs), std::move(names));
}

/// Nuisance values drawn uniformly inside the truncation band.
inline driftdr::NuisanceValues random_nuisance(driftdr::Rng& rng, std::size_t n) {
    Eigen::VectorXd ga(static_cast<Eigen::Index>(n)), gm(static_cast<Eigen::Index>(n)), m(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < ga.size(); ++i) {
        ga(i) = 0.2 + 0.6 * rng.uniform();
        gm(i) = 0.3 + 0.6 * rng.uniform();
        m(i) = 0.1 + 0.8 * rng.uniform();
    }
    return driftdr::NuisanceValues::make(ga, gm, m);
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("driftdr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace testing
