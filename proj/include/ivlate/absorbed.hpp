#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

namespace ivlate {

/// Coefficient on D after absorbing a full set of group indicators.
struct AbsorbedFit {
    double coefficient = 0.0;
    double se = 0.0;                // HC1, degrees of freedom counted as in the dense regression
    std::optional<double> robust_f; // absent when the first-stage covariance is singular
    std::size_t n = 0;
    std::size_t groups = 0;
};

/// Just-identified IV of y on D with instrument Z and group fixed effects.
AbsorbedFit absorbed_iv(std::span<const double> y, std::span<const std::uint8_t> d, std::span<const std::uint8_t> z,
                        std::span<const std::size_t> group, std::size_t groups);

/// 2SLS with instruments Z x (group indicator) and group fixed effects.
/// Every group must contain both instrument values.
AbsorbedFit absorbed_tsls_interacted(std::span<const double> y, std::span<const std::uint8_t> d,
                                     std::span<const std::uint8_t> z, std::span<const std::size_t> group,
                                     std::size_t groups);

} // namespace ivlate
