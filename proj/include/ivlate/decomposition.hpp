#pragma once

#include "ivlate/cells.hpp"
#include "ivlate/estimators.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivlate {

/// LATT/LATU decomposition of the IV estimate on a sample with a non-negative first stage
/// in every cell.
///
/// The headline fields (pi1, pi0, tau_latt, tau_latu, w_latt, lambda) use the within-arm
/// linear projections of Y and D on (1, e_hat), which is the representation under which
/// `beta_reconstructed` equals the reordered IV estimate exactly. The `_np` fields are the
/// cell-average versions that weight each cell by share*e_hat or share*(1-e_hat); both sets
/// coincide when e_hat takes at most two values.
struct Decomposition {
    double theta = 0.0;
    double pi1 = 0.0;
    double pi0 = 0.0;
    double tau_latt = 0.0;
    double tau_latu = 0.0;
    double w_latt = 0.0;
    double w_latu = 0.0;
    double lambda = 0.0;
    double var_e_z1 = 0.0;
    double var_e_z0 = 0.0;
    double beta_reconstructed = 0.0;
    /// Both conditional variances were zero; the weights fall back to the equal-variance form.
    bool equal_variance_fallback = false;

    double desired_w_latt = 0.0; // theta*pi1 / (theta*pi1 + (1-theta)*pi0)
    double w_latt_equal_variance = 0.0;

    double pi1_np = 0.0;
    double pi0_np = 0.0;
    double tau_latt_np = 0.0;
    double tau_latu_np = 0.0;
    double tau_late = 0.0;
};

Decomposition decompose(const CellTable& table, const CellEstimates& est);

/// lambda under equal conditional variances of e(X) in both instrument arms.
double lambda_rule_of_thumb(double theta, double pi1, double pi0);

/// Weight on LATT under equal conditional variances.
double w_latt_equal_variance(double theta, double pi1, double pi0);

struct SweepPoint {
    double w = 1.0; // weight on rows with Z = 0
    double theta = 0.0;
    double beta_riv = 0.0;
    double tau_late = 0.0;
    double tau_latt = 0.0;
    double tau_latu = 0.0;
    std::optional<double> lambda; // absent when LATT and LATU coincide
};

struct SweepCurve {
    std::vector<SweepPoint> points; // ascending in theta

    /// Implied theta at the first sign change of lambda, by linear interpolation.
    std::optional<double> zero_crossing() const;
};

/// `points` reweight factors, log-spaced so that the implied theta spans [theta_lo, theta_hi].
std::vector<double> default_sweep_grid(const CellTable& table, std::size_t points = 25, double theta_lo = 0.05,
                                       double theta_hi = 0.95);

/// Re-estimates the reordered IV and the nonparametric LATT, LATU and LATE with row weights
/// 1 for Z = 1 and w for Z = 0, for each w in `grid`.
SweepCurve bias_sweep(const Sample& reordered, std::span<const std::string> covariates, std::span<const double> grid);

} // namespace ivlate
