#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivlate {

/// Pivot tolerance for collinearity detection, relative to the largest pivot.
inline constexpr double kPivotTolerance = 1e-10;

/// Regressors W = (endogenous, controls) and instruments Q = (excluded, controls).
/// The caller supplies any constant column explicitly among the controls.
struct DesignMatrices {
    Eigen::VectorXd y;
    Eigen::MatrixXd endogenous;
    Eigen::MatrixXd excluded;
    Eigen::MatrixXd controls;

    Eigen::Index n() const { return y.size(); }
    Eigen::MatrixXd w() const;
    Eigen::MatrixXd q() const;
};

/// Coefficients of a linear fit. Columns dropped for collinearity carry no
/// coefficient; `coefficients` and `vcov_robust` are indexed by `kept`.
struct FitResult {
    std::vector<Eigen::Index> kept;
    std::vector<Eigen::Index> dropped;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd vcov_robust; // HC1
    Eigen::VectorXd residuals;
    Eigen::Index n = 0;

    std::optional<double> coefficient(Eigen::Index column) const;
    std::optional<double> standard_error(Eigen::Index column) const;
};

/// Least squares of y on x (optionally weighted) with HC1 robust covariance.
/// Collinear columns are dropped by pivoted QR and reported in `dropped`.
FitResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, std::span<const double> weights = {});

/// Just-identified IV; coefficients are indexed by the columns of W, so element 0 is the
/// coefficient on the first endogenous regressor.
FitResult iv_just_identified(const DesignMatrices& dm);

/// Two-stage least squares: W is projected on Q, then y on the fitted W.
FitResult tsls(const DesignMatrices& dm);

/// HC1 Wald statistic for the excluded instruments in the regression of the first
/// endogenous column on Q, divided by the number of excluded instruments.
double first_stage_f(const DesignMatrices& dm);

} // namespace ivlate
