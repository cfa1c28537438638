#include "ivlate/projection.hpp"

#include "ivlate/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ivlate {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string column_list(const std::vector<Index>& cols) {
    std::ostringstream os;
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? ", " : "") << cols[i];
    return os.str();
}

// Columns of x that survive pivoted QR, in their original order.
std::vector<Index> independent_columns(const MatrixXd& x, std::vector<Index>& dropped) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(kPivotTolerance);
    const Index rank = qr.rank();
    std::vector<Index> kept;
    for (Index j = 0; j < rank; ++j) kept.push_back(qr.colsPermutation().indices()(j));
    std::sort(kept.begin(), kept.end());
    dropped.clear();
    for (Index j = 0, k = 0; j < x.cols(); ++j) {
        if (k < static_cast<Index>(kept.size()) && kept[static_cast<std::size_t>(k)] == j) {
            ++k;
        } else {
            dropped.push_back(j);
        }
    }
    return kept;
}

MatrixXd select_columns(const MatrixXd& x, const std::vector<Index>& cols) {
    MatrixXd out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = x.col(cols[j]);
    return out;
}

// (R'R)^{-1} from the R factor of an unpivoted QR of a full-rank matrix.
MatrixXd inverse_gram(const Eigen::HouseholderQR<MatrixXd>& qr, Index k) {
    const MatrixXd r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
    return rinv * rinv.transpose();
}

// HC1 sandwich bread * X' diag(u^2) X * bread * n/(n-k), with x already scaled by any weights.
MatrixXd hc1(const MatrixXd& x, const VectorXd& u, const MatrixXd& bread, Index n_eff) {
    const Index k = x.cols();
    const MatrixXd xu = x.array().colwise() * u.array();
    const MatrixXd meat = xu.transpose() * xu;
    MatrixXd v = bread * meat * bread;
    if (n_eff <= k) throw SingularityError("no residual degrees of freedom for the robust covariance");
    v *= static_cast<double>(n_eff) / static_cast<double>(n_eff - k);
    return 0.5 * (v + v.transpose());
}

} // namespace

MatrixXd DesignMatrices::w() const {
    MatrixXd out(y.size(), endogenous.cols() + controls.cols());
    out << endogenous, controls;
    return out;
}

MatrixXd DesignMatrices::q() const {
    MatrixXd out(y.size(), excluded.cols() + controls.cols());
    out << excluded, controls;
    return out;
}

std::optional<double> FitResult::coefficient(Index column) const {
    const auto it = std::find(kept.begin(), kept.end(), column);
    if (it == kept.end()) return std::nullopt;
    return coefficients(static_cast<Index>(it - kept.begin()));
}

std::optional<double> FitResult::standard_error(Index column) const {
    const auto it = std::find(kept.begin(), kept.end(), column);
    if (it == kept.end()) return std::nullopt;
    const Index j = static_cast<Index>(it - kept.begin());
    return std::sqrt(std::max(0.0, vcov_robust(j, j)));
}

FitResult ols(const VectorXd& y, const MatrixXd& x, std::span<const double> weights) {
    const Index n = x.rows();
    if (y.size() != n) throw InputError("ols: y and x row counts differ");
    if (!weights.empty() && static_cast<Index>(weights.size()) != n) throw InputError("ols: weight length mismatch");

    VectorXd sw = VectorXd::Ones(n);
    Index n_eff = n;
    if (!weights.empty()) {
        n_eff = 0;
        for (Index i = 0; i < n; ++i) {
            const double w = weights[static_cast<std::size_t>(i)];
            if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("ols: weights must be finite and non-negative");
            sw(i) = std::sqrt(w);
            n_eff += w > 0.0 ? 1 : 0;
        }
    }
    const MatrixXd xs = x.array().colwise() * sw.array();
    const VectorXd ys = y.array() * sw.array();

    FitResult fit;
    fit.n = n_eff;
    fit.kept = independent_columns(xs, fit.dropped);
    if (fit.kept.empty()) {
        throw SingularityError("ols: design matrix has rank zero (dropped columns: " + column_list(fit.dropped) + ")");
    }
    const MatrixXd xk = select_columns(xs, fit.kept);
    const Eigen::HouseholderQR<MatrixXd> qr(xk);
    fit.coefficients = qr.solve(ys);
    const VectorXd us = ys - xk * fit.coefficients;
    fit.residuals = y - select_columns(x, fit.kept) * fit.coefficients;
    fit.vcov_robust = hc1(xk, us, inverse_gram(qr, xk.cols()), n_eff);
    return fit;
}

FitResult tsls(const DesignMatrices& dm) {
    const Index n = dm.n();
    const Index k_endog = dm.endogenous.cols();
    const Index k_excl = dm.excluded.cols();
    if (dm.endogenous.rows() != n || dm.excluded.rows() != n || (dm.controls.cols() > 0 && dm.controls.rows() != n)) {
        throw InputError("design matrices have inconsistent row counts");
    }
    if (k_endog == 0) throw InputError("at least one endogenous regressor is required");
    if (k_excl < k_endog) throw InputError("fewer excluded instruments than endogenous regressors");

    // Redundant controls are dropped first; the excluded instruments must then add
    // full rank on top of the surviving controls.
    std::vector<Index> dropped_controls;
    std::vector<Index> kept_c;
    if (dm.controls.cols() > 0) kept_c = independent_columns(dm.controls, dropped_controls);
    std::vector<Index> kept_q;
    for (Index j = 0; j < k_excl; ++j) kept_q.push_back(j);
    for (const Index j : kept_c) kept_q.push_back(k_excl + j);
    const MatrixXd q_full = dm.q();
    {
        Eigen::ColPivHouseholderQR<MatrixXd> rank_check(select_columns(q_full, kept_q));
        rank_check.setThreshold(kPivotTolerance);
        if (rank_check.rank() < static_cast<Index>(kept_q.size())) {
            throw SingularityError("an excluded instrument is collinear with the other instruments and controls");
        }
    }
    std::vector<Index> kept_w;
    std::vector<Index> dropped_w;
    for (Index j = 0; j < k_endog; ++j) kept_w.push_back(j);
    for (Index j = 0; j < dm.controls.cols(); ++j) {
        if (std::find(dropped_controls.begin(), dropped_controls.end(), j) == dropped_controls.end()) {
            kept_w.push_back(k_endog + j);
        } else {
            dropped_w.push_back(k_endog + j);
        }
    }
    const MatrixXd q = select_columns(q_full, kept_q);
    const MatrixXd w = select_columns(dm.w(), kept_w);
    if (n <= q.cols()) throw SingularityError("need more observations than instruments");

    const Eigen::HouseholderQR<MatrixXd> qr_q(q);
    const MatrixXd w_hat = q * qr_q.solve(w);

    Eigen::ColPivHouseholderQR<MatrixXd> check(w_hat);
    check.setThreshold(kPivotTolerance);
    if (check.rank() < w_hat.cols()) {
        throw SingularityError("projected regressors are rank deficient: weak or invalid instrument");
    }
    const Eigen::HouseholderQR<MatrixXd> qr_w(w_hat);

    FitResult fit;
    fit.n = n;
    fit.kept = kept_w;
    fit.dropped = dropped_w;
    fit.coefficients = qr_w.solve(dm.y);
    fit.residuals = dm.y - w * fit.coefficients;
    fit.vcov_robust = hc1(w_hat, fit.residuals, inverse_gram(qr_w, w_hat.cols()), n);
    return fit;
}

FitResult iv_just_identified(const DesignMatrices& dm) {
    if (dm.excluded.cols() != dm.endogenous.cols()) {
        throw InputError("just-identified IV needs as many excluded instruments as endogenous regressors");
    }
    return tsls(dm);
}

double first_stage_f(const DesignMatrices& dm) {
    if (dm.endogenous.cols() == 0 || dm.excluded.cols() == 0) throw InputError("first stage needs D and an instrument");
    const FitResult fs = ols(dm.endogenous.col(0), dm.q());
    const Index k_excl = dm.excluded.cols();
    std::vector<Index> pos;
    for (Index j = 0; j < k_excl; ++j) {
        const auto it = std::find(fs.kept.begin(), fs.kept.end(), j);
        if (it == fs.kept.end()) throw SingularityError("excluded instrument dropped from the first stage");
        pos.push_back(static_cast<Index>(it - fs.kept.begin()));
    }
    VectorXd b(k_excl);
    MatrixXd v(k_excl, k_excl);
    for (Index a = 0; a < k_excl; ++a) {
        b(a) = fs.coefficients(pos[static_cast<std::size_t>(a)]);
        for (Index c = 0; c < k_excl; ++c) {
            v(a, c) = fs.vcov_robust(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(c)]);
        }
    }
    const Eigen::LDLT<MatrixXd> ldlt(v);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw SingularityError("first-stage robust covariance is not positive definite");
    }
    const double wald = b.dot(ldlt.solve(b));
    return wald / static_cast<double>(k_excl);
}

} // namespace ivlate
