#include "ivlate/decomposition.hpp"

#include "ivlate/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace ivlate {

namespace {

// Variances of e_hat below this are rounding noise from a constant propensity.
constexpr double kVarianceFloor = 1e-14;

struct ArmProjection {
    double intercept = 0.0;
    double slope = 0.0;

    double at(double e) const { return intercept + slope * e; }
};

// Weighted least squares of cell-level values on (1, e_hat).
ArmProjection project(const std::vector<double>& weight, const std::vector<double>& e, const std::vector<double>& v) {
    double sw = 0.0, me = 0.0, mv = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) {
        sw += weight[c];
        me += weight[c] * e[c];
        mv += weight[c] * v[c];
    }
    me /= sw;
    mv /= sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) {
        sxx += weight[c] * (e[c] - me) * (e[c] - me);
        sxy += weight[c] * (e[c] - me) * (v[c] - mv);
    }
    ArmProjection p;
    p.slope = sxx > kVarianceFloor * sw ? sxy / sxx : 0.0;
    p.intercept = mv - p.slope * me;
    return p;
}

} // namespace

double w_latt_equal_variance(double theta, double pi1, double pi0) {
    if (!(theta > 0.0 && theta < 1.0)) throw InputError("theta must lie strictly between 0 and 1");
    if (!(pi1 > 0.0 && pi0 > 0.0)) throw InputError("pi1 and pi0 must be positive");
    return (1.0 - theta) * pi1 / ((1.0 - theta) * pi1 + theta * pi0);
}

double lambda_rule_of_thumb(double theta, double pi1, double pi0) {
    if (!(theta > 0.0 && theta < 1.0)) throw InputError("theta must lie strictly between 0 and 1");
    if (!(pi1 > 0.0 && pi0 > 0.0)) throw InputError("pi1 and pi0 must be positive");
    return (1.0 - 2.0 * theta) * pi0 * pi1 /
           ((theta * pi0 + (1.0 - theta) * pi1) * (theta * pi1 + (1.0 - theta) * pi0));
}

Decomposition decompose(const CellTable& table, const CellEstimates& est) {
    if (est.cells.size() != table.cells.size()) throw InputError("cell estimates do not match the cell table");
    const std::size_t k = table.cells.size();
    for (std::size_t c = 0; c < k; ++c) {
        if (est.cells[c].omega_hat < 0.0) {
            throw PreconditionError("the first stage is negative in some cells; reorder the instrument first");
        }
    }

    std::vector<double> e(k), a1(k), a0(k), y1(k), y0(k), d1(k), d0(k);
    Decomposition out;
    for (std::size_t c = 0; c < k; ++c) {
        const Cell& cell = table.cells[c];
        e[c] = est.cells[c].e_hat;
        a1[c] = cell.share * e[c];
        a0[c] = cell.share * (1.0 - e[c]);
        y1[c] = cell.mean_y_z1;
        y0[c] = cell.mean_y_z0;
        d1[c] = cell.mean_d_z1;
        d0[c] = cell.mean_d_z0;
        out.theta += a1[c];
    }
    const double theta = out.theta;
    if (!(theta > 0.0 && theta < 1.0)) throw DegenerateEstimandError("one instrument arm is empty");

    double m1 = 0.0, m0 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        m1 += a1[c] * e[c];
        m0 += a0[c] * e[c];
    }
    m1 /= theta;
    m0 /= 1.0 - theta;
    for (std::size_t c = 0; c < k; ++c) {
        out.var_e_z1 += a1[c] * (e[c] - m1) * (e[c] - m1);
        out.var_e_z0 += a0[c] * (e[c] - m0) * (e[c] - m0);
    }
    out.var_e_z1 /= theta;
    out.var_e_z0 /= 1.0 - theta;
    if (out.var_e_z1 < kVarianceFloor) out.var_e_z1 = 0.0;
    if (out.var_e_z0 < kVarianceFloor) out.var_e_z0 = 0.0;

    const ArmProjection py1 = project(a1, e, y1), py0 = project(a0, e, y0);
    const ArmProjection pd1 = project(a1, e, d1), pd0 = project(a0, e, d0);
    out.pi1 = pd1.at(m1) - pd0.at(m1);
    out.pi0 = pd1.at(m0) - pd0.at(m0);
    if (!(out.pi1 > 0.0 && out.pi0 > 0.0)) {
        throw DegenerateEstimandError("complier shares by instrument arm must both be positive");
    }
    out.tau_latt = (py1.at(m1) - py0.at(m1)) / out.pi1;
    out.tau_latu = (py1.at(m0) - py0.at(m0)) / out.pi0;

    const double t1 = theta * out.var_e_z1 * out.pi0;
    const double t0 = (1.0 - theta) * out.var_e_z0 * out.pi1;
    out.w_latt_equal_variance = w_latt_equal_variance(theta, out.pi1, out.pi0);
    if (t1 + t0 > 0.0) {
        out.w_latt = t0 / (t1 + t0);
    } else {
        out.equal_variance_fallback = true;
        out.w_latt = out.w_latt_equal_variance;
    }
    out.w_latu = 1.0 - out.w_latt;
    out.desired_w_latt = theta * out.pi1 / (theta * out.pi1 + (1.0 - theta) * out.pi0);
    out.lambda = out.w_latt - out.desired_w_latt;
    out.beta_reconstructed = out.w_latt * out.tau_latt + out.w_latu * out.tau_latu;

    double p1 = 0.0, p0 = 0.0, n1 = 0.0, n0 = 0.0, g1 = 0.0, g0 = 0.0, late_num = 0.0, late_den = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const double om = est.cells[c].omega_hat;
        p1 += a1[c] * om;
        p0 += a0[c] * om;
        if (!est.cells[c].beta_hat) continue;
        const double b = *est.cells[c].beta_hat;
        n1 += a1[c] * om * b;
        g1 += a1[c] * om;
        n0 += a0[c] * om * b;
        g0 += a0[c] * om;
        late_num += table.cells[c].share * om * b;
        late_den += table.cells[c].share * om;
    }
    out.pi1_np = p1 / theta;
    out.pi0_np = p0 / (1.0 - theta);
    if (!(g1 > 0.0 && g0 > 0.0 && late_den > 0.0)) {
        throw DegenerateEstimandError("complier shares by instrument arm must both be positive");
    }
    out.tau_latt_np = n1 / g1;
    out.tau_latu_np = n0 / g0;
    out.tau_late = late_num / late_den;
    return out;
}

std::optional<double> SweepCurve::zero_crossing() const {
    const SweepPoint* prev = nullptr;
    for (const auto& p : points) {
        if (!p.lambda) continue;
        if (*p.lambda == 0.0) return p.theta;
        if (prev && (*prev->lambda < 0.0) != (*p.lambda < 0.0)) {
            const double t = *prev->lambda / (*prev->lambda - *p.lambda);
            return prev->theta + t * (p.theta - prev->theta);
        }
        prev = &p;
    }
    return std::nullopt;
}

std::vector<double> default_sweep_grid(const CellTable& table, std::size_t points, double theta_lo, double theta_hi) {
    if (points < 2) throw InputError("a sweep grid needs at least two points");
    if (!(theta_lo > 0.0 && theta_lo < theta_hi && theta_hi < 1.0)) {
        throw InputError("sweep bounds must satisfy 0 < theta_lo < theta_hi < 1");
    }
    double a = 0.0, b = 0.0;
    for (const auto& c : table.cells) {
        a += c.mass_z1;
        b += c.mass_z0;
    }
    if (!(a > 0.0 && b > 0.0)) throw DegenerateEstimandError("one instrument arm is empty");
    const auto w_of = [&](double theta) { return a * (1.0 - theta) / (theta * b); };
    const double lo = std::log(w_of(theta_hi));
    const double hi = std::log(w_of(theta_lo));
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    return grid;
}

SweepCurve bias_sweep(const Sample& reordered, std::span<const std::string> covariates, std::span<const double> grid) {
    {
        const CellTable base = build_cells(reordered, covariates);
        const CellEstimates est = cell_estimates(base);
        for (const auto& ce : est.cells) {
            if (ce.omega_hat < 0.0) {
                throw PreconditionError("the first stage is negative in some cells; reorder the instrument first");
            }
        }
    }
    for (const double w : grid) {
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("sweep weights must be positive and finite");
    }

    const auto z = reordered.z();
    std::vector<SweepPoint> points(grid.size());
    std::vector<std::exception_ptr> errors(grid.size());
    const auto count = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            std::vector<double> row_w(z.size());
            for (std::size_t r = 0; r < z.size(); ++r) row_w[r] = z[r] ? 1.0 : grid[u];
            const CellTable table = build_cells(reordered, covariates, row_w);
            const CellEstimates est = cell_estimates(table);
            const Decomposition dec = decompose(table, est);

            double num = 0.0, den = 0.0;
            for (std::size_t c = 0; c < table.cells.size(); ++c) {
                if (!est.cells[c].beta_hat) continue;
                const double wr = table.cells[c].share * table.cells[c].var_z * est.cells[c].omega_hat;
                num += wr * *est.cells[c].beta_hat;
                den += wr;
            }
            SweepPoint& p = points[u];
            p.w = grid[u];
            p.theta = dec.theta;
            p.beta_riv = num / den;
            p.tau_late = dec.tau_late;
            p.tau_latt = dec.tau_latt_np;
            p.tau_latu = dec.tau_latu_np;
            const double gap = p.tau_latt - p.tau_latu;
            if (std::abs(gap) >= 1e-12) p.lambda = (p.beta_riv - p.tau_late) / gap;
        } catch (...) {
            errors[u] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    SweepCurve curve;
    curve.points = std::move(points);
    std::stable_sort(curve.points.begin(), curve.points.end(),
                     [](const SweepPoint& l, const SweepPoint& r) { return l.theta < r.theta; });
    return curve;
}

} // namespace ivlate
