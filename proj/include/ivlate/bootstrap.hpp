#pragma once

#include "ivlate/sample.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace ivlate {

struct BootstrapConfig {
    std::size_t replications = 1000;
    std::uint64_t seed = 0;
};

struct BootstrapResult {
    double se = 0.0;
    double mean = 0.0;
    std::size_t replications = 0;
    std::size_t failures = 0;
};

/// A statistic signals an undefined replicate by throwing or by returning a non-finite value.
using Statistic = std::function<double(const Sample&)>;
using VectorStatistic = std::function<std::vector<double>(const Sample&)>;

/// Row indices of replicate `r` (size n, drawn with replacement).
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t r);

/// Standard deviation (B-1 denominator) of the statistic over row-resampled replicates.
/// Throws UnreliableBootstrapError when more than half of the replicates fail.
BootstrapResult bootstrap_se(const Sample& sample, const Statistic& statistic, const BootstrapConfig& cfg);

/// Single-threaded reference with identical output.
BootstrapResult bootstrap_se_serial(const Sample& sample, const Statistic& statistic, const BootstrapConfig& cfg);

/// Several statistics from the same replicates. A replicate fails for component j when
/// the whole call throws or when component j is non-finite.
std::vector<BootstrapResult> bootstrap_se(const Sample& sample, const VectorStatistic& statistic, std::size_t dim,
                                          const BootstrapConfig& cfg);

} // namespace ivlate
