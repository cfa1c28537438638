#pragma once

#include "ivlate/dgp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ivlate {

/// An estimand computed by two independent routes: `direct` from moments or strata
/// definitions, `closed` from the weighted-average representation.
struct DualValue {
    std::optional<double> direct;
    std::optional<double> closed;
};

struct PopulationEstimands {
    DualValue beta_iv;   // saturated linear IV
    DualValue beta_2sls; // Z interacted with every cell indicator
    DualValue beta_riv;  // linear IV with the reordered instrument
    DualValue tau_late;  // direct: strata average; closed: |omega|-weighted Wald ratios

    // Quantities of the reordered population.
    double theta = 0.0;
    DualValue pi1, pi0;          // direct: complier share by arm; closed: e- and (1-e)-weighted pi
    DualValue tau_latt, tau_latu; // direct: strata; closed: e*pi- and (1-e)*pi-weighted Wald ratios
    double var_e_z1 = 0.0;
    double var_e_z0 = 0.0;
    std::optional<double> w_latt;  // reversed-weight formula with the values above
    std::optional<double> lambda;  // w_latt minus the LATE weight on LATT
    std::optional<double> lambda_equal_variance;

    // Within-arm linear projections on (1, e): the exact decomposition of beta_riv.
    std::optional<double> pi1_proj, pi0_proj, tau_latt_proj, tau_latu_proj, w_latt_proj, beta_reconstructed_proj;

    // Coefficient on Z in the saturated projections of D and Y: direct solve versus
    // the variance-weighted average of the cell slopes.
    DualValue first_stage_coef;
    DualValue reduced_form_coef;

    /// IV weights c*pi*V per cell, normalized; empty when undefined.
    std::vector<double> iv_weights;
    double iv_weight_denominator = 0.0; // E[c*pi*V]
};

PopulationEstimands population_estimands(const DgpSpec& dgp);

} // namespace ivlate
