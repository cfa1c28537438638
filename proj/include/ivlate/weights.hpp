#pragma once

#include "ivlate/cells.hpp"
#include "ivlate/estimators.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ivlate {

enum class Scheme { IV = 0, Tsls = 1, RIV = 2, Late = 3 };
inline constexpr std::array<Scheme, 4> kSchemes{Scheme::IV, Scheme::Tsls, Scheme::RIV, Scheme::Late};

std::string_view to_string(Scheme scheme);

struct WeightRow {
    CovariateKey key;
    std::size_t n = 0;
    double share = 0.0;
    double var_z = 0.0;
    double e_hat = 0.0;
    double omega_hat = 0.0;
    std::optional<double> beta_hat;
    std::array<double, 4> raw{};    // unnormalized numerators, indexed by Scheme
    std::array<double, 4> weight{}; // normalized over rows with a defined beta_hat

    double w(Scheme s) const { return weight[static_cast<std::size_t>(s)]; }
};

struct WeightTable {
    std::vector<std::string> covariates;
    std::vector<WeightRow> rows; // lexicographic by key
    std::array<double, 4> raw_total{};
    std::vector<std::string> warnings;

    /// Sum over rows of weight times beta_hat.
    double dot(Scheme s) const;
    double weight_sum(Scheme s) const;
};

/// Per-cell implicit weights of the four estimands. Cells without a Wald ratio carry
/// zero weight and are listed in `warnings`.
WeightTable weight_table(const CellTable& table, const CellEstimates& est);

struct NegativeWeightReport {
    std::size_t cells = 0;
    std::size_t negative_cells = 0;
    double negative_obs_share = 0.0;
    /// Wald ratios averaged with share*|omega| weights within each sign group.
    std::optional<double> mean_beta_positive;
    std::optional<double> mean_beta_negative;
    /// Same, with share*|omega|*var_z weights.
    std::optional<double> var_mean_beta_positive;
    std::optional<double> var_mean_beta_negative;
    double positive_w_iv_sum = 0.0;
    double negative_w_iv_sum = 0.0; // as a non-positive number
};

NegativeWeightReport negative_weight_report(const WeightTable& wt);

} // namespace ivlate
