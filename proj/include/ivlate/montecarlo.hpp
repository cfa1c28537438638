#pragma once

#include "ivlate/dgp.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ivlate {

struct McSummary {
    std::string estimator; // iv, 2sls-interacted, riv, late-np
    double population = 0.0;
    double mean = 0.0;
    double sd = 0.0; // across seeds, B-1 denominator
    std::size_t seeds = 0;
    std::size_t failures = 0;

    /// Standard error of the Monte Carlo mean.
    double mc_se() const;
    /// |mean - population| <= k * mc_se.
    bool consistent(double k = 3.0) const;
};

struct McResult {
    std::string dgp;
    std::size_t n = 0;
    std::vector<McSummary> estimators;
};

/// Draws `seeds` samples of size n (seed s uses master seed base_seed + s), estimates the four
/// estimands on each with saturated controls, and compares their means with the population values.
McResult run_monte_carlo(const DgpSpec& dgp, std::size_t n, std::size_t seeds, std::uint64_t base_seed);
McResult run_monte_carlo_serial(const DgpSpec& dgp, std::size_t n, std::size_t seeds, std::uint64_t base_seed);

/// The four sample estimates on one draw, in the order iv, 2sls-interacted, riv, late-np.
std::vector<double> sample_estimates(const Sample& sample);

} // namespace ivlate
