#pragma once

#include "ivlate/cells.hpp"
#include "ivlate/sample.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivlate {

/// Cells with |omega_hat| below this have no Wald ratio.
inline constexpr double kWaldFloor = 1e-9;

struct CellEstimate {
    double omega_hat = 0.0;           // first-stage slope within the cell
    std::optional<double> beta_hat;   // Wald ratio; absent when |omega_hat| < kWaldFloor
    double e_hat = 0.0;               // P[Z=1 | cell]
    double reduced_form = 0.0;        // mean_y_z1 - mean_y_z0
};

/// One entry per cell of the table, in table order.
struct CellEstimates {
    std::vector<CellEstimate> cells;
    std::vector<std::string> warnings;

    std::size_t excluded_count() const;
};

/// Requires every cell to have both instrument arms.
CellEstimates cell_estimates(const CellTable& table);

enum class Method { IV, TslsInteracted, RIV, LateNp };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);

struct EstimateResult {
    Method method = Method::IV;
    double estimate = 0.0;
    std::optional<double> se;
    std::optional<double> robust_f;
    std::size_t n = 0;
    /// Observation share of cells whose first stage is negative (reordered IV only).
    std::optional<double> negative_weight_share;
    std::vector<std::string> warnings;
};

/// Exogenous regressors for the linear IV. `saturated` names discrete covariates whose
/// every observed combination gets an indicator (with none listed, a single constant);
/// `linear` names covariates or controls entered as they are.
struct ControlSpec {
    std::vector<std::string> saturated;
    std::vector<std::string> linear;
};

/// Dense runs the QR projection core on explicit indicator columns. Absorbed sweeps
/// the indicators out within cells and is only available when `linear` is empty.
/// Auto picks Absorbed whenever it is available.
enum class SolverPath { Auto, Dense, Absorbed };

EstimateResult estimate_beta_iv(const Sample& sample, const ControlSpec& controls,
                                SolverPath path = SolverPath::Auto);

/// 2SLS with Z interacted with every cell indicator of `table`, which must have been
/// built from `sample` (rows whose cell was dropped are skipped).
EstimateResult estimate_beta_2sls_interacted(const Sample& sample, const CellTable& table,
                                             SolverPath path = SolverPath::Auto);

/// Flips Z in cells with a negative first stage; cells with omega_hat == 0 keep Z.
Sample reorder_instrument(const Sample& sample, const CellTable& table, const CellEstimates& est);

/// Saturated IV with the reordered instrument.
EstimateResult estimate_beta_riv(const Sample& sample, const CellTable& table,
                                 SolverPath path = SolverPath::Auto);

/// Share-times-|omega| weighted average of the cell Wald ratios.
EstimateResult estimate_tau_late(const CellTable& table, const CellEstimates& est);

} // namespace ivlate
