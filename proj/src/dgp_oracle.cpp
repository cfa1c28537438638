#include "ivlate/population.hpp"

#include "ivlate/decomposition.hpp"
#include "ivlate/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace ivlate {

namespace {

using Real = long double;
using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// Observable cell moments in extended precision.
struct Moments {
    Real m, e, p1, p0, y1, y0;
};

std::vector<Moments> moments(const DgpSpec& dgp) {
    std::vector<Moments> out;
    for (const auto& c : dgp.cells) {
        if (!(c.mass > 0.0)) continue;
        out.push_back({c.mass, c.e, c.p_treated(1), c.p_treated(0), c.mean_y(1), c.mean_y(0)});
    }
    return out;
}

std::optional<double> solve_first(const MatR& a, const VecR& b) {
    Eigen::FullPivLU<MatR> lu(a);
    if (!lu.isInvertible()) return std::nullopt;
    return static_cast<double>(lu.solve(b)(0));
}

// Saturated linear IV from E[QW'] and E[QY], Q = (Z, G), W = (D, G).
std::optional<double> moment_iv(const std::vector<Moments>& ms) {
    const auto k = static_cast<Eigen::Index>(ms.size());
    MatR a = MatR::Zero(k + 1, k + 1);
    VecR b = VecR::Zero(k + 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& c = ms[static_cast<std::size_t>(j)];
        a(0, 0) += c.m * c.e * c.p1;
        a(0, j + 1) = c.m * c.e;
        a(j + 1, 0) = c.m * (c.e * c.p1 + (1 - c.e) * c.p0);
        a(j + 1, j + 1) = c.m;
        b(0) += c.m * c.e * c.y1;
        b(j + 1) = c.m * (c.e * c.y1 + (1 - c.e) * c.y0);
    }
    return solve_first(a, b);
}

// 2SLS with Q = (Z*G, G) and W = (D, G).
std::optional<double> moment_2sls(const std::vector<Moments>& ms) {
    const auto k = static_cast<Eigen::Index>(ms.size());
    MatR qq = MatR::Zero(2 * k, 2 * k);
    MatR qw = MatR::Zero(2 * k, k + 1);
    VecR qy = VecR::Zero(2 * k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& c = ms[static_cast<std::size_t>(j)];
        qq(j, j) = c.m * c.e;
        qq(j, k + j) = c.m * c.e;
        qq(k + j, j) = c.m * c.e;
        qq(k + j, k + j) = c.m;
        qw(j, 0) = c.m * c.e * c.p1;
        qw(j, j + 1) = c.m * c.e;
        qw(k + j, 0) = c.m * (c.e * c.p1 + (1 - c.e) * c.p0);
        qw(k + j, j + 1) = c.m;
        qy(j) = c.m * c.e * c.y1;
        qy(k + j) = c.m * (c.e * c.y1 + (1 - c.e) * c.y0);
    }
    const MatR qq_inv = qq.fullPivLu().inverse();
    const MatR lhs = qw.transpose() * qq_inv * qw;
    const VecR rhs = qw.transpose() * qq_inv * qy;
    return solve_first(lhs, rhs);
}

// Coefficient on Z in the projection of D (or Y) on (Z, G).
std::optional<double> moment_projection(const std::vector<Moments>& ms, bool outcome) {
    const auto k = static_cast<Eigen::Index>(ms.size());
    MatR a = MatR::Zero(k + 1, k + 1);
    VecR b = VecR::Zero(k + 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto& c = ms[static_cast<std::size_t>(j)];
        const Real v1 = outcome ? c.y1 : c.p1;
        const Real v0 = outcome ? c.y0 : c.p0;
        a(0, 0) += c.m * c.e;
        a(0, j + 1) = c.m * c.e;
        a(j + 1, 0) = c.m * c.e;
        a(j + 1, j + 1) = c.m;
        b(0) += c.m * c.e * v1;
        b(j + 1) = c.m * (c.e * v1 + (1 - c.e) * v0);
    }
    return solve_first(a, b);
}

bool cellwise_weak_monotone(const DgpSpec& dgp) {
    for (const auto& c : dgp.cells) {
        if (c.shares[kComplier] > 0.0 && c.shares[kDefier] > 0.0) return false;
    }
    return true;
}

struct Ratio {
    Real num = 0, den = 0;
    std::optional<double> value(Real scale) const {
        if (!(std::abs(den) > 1e-12L * scale) || scale <= 0) return std::nullopt;
        return static_cast<double>(num / den);
    }
};

struct Line {
    Real intercept = 0, slope = 0;
    Real at(Real x) const { return intercept + slope * x; }
};

Line weighted_line(const std::vector<Real>& w, const std::vector<Real>& x, const std::vector<Real>& v) {
    Real sw = 0, mx = 0, mv = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        mx += w[i] * x[i];
        mv += w[i] * v[i];
    }
    mx /= sw;
    mv /= sw;
    Real sxx = 0, sxv = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxv += w[i] * (x[i] - mx) * (v[i] - mv);
    }
    Line l;
    l.slope = sxx > 0 ? sxv / sxx : 0;
    l.intercept = mv - l.slope * mx;
    return l;
}

} // namespace

PopulationEstimands population_estimands(const DgpSpec& dgp) {
    validate(dgp);
    PopulationEstimands out;
    const bool wm = cellwise_weak_monotone(dgp);

    // Closed forms from the latent strata.
    Ratio iv, tsls, riv, late_strata, late_obs, fs, rf;
    Real abs_scale = 0, v_total = 0;
    for (const auto& c : dgp.cells) {
        if (!(c.mass > 0.0)) continue;
        const Real m = c.mass, v = static_cast<Real>(c.e) * (1 - static_cast<Real>(c.e));
        const Real pi = c.pi();
        const auto tau = c.tau();
        if (tau) {
            iv.num += m * c.c() * pi * v * *tau;
            tsls.num += m * pi * pi * v * *tau;
            riv.num += m * pi * v * *tau;
        }
        iv.den += m * c.c() * pi * v;
        tsls.den += m * pi * pi * v;
        riv.den += m * pi * v;
        abs_scale += m * pi * v;
        const Real effect_c = c.means[kComplier][1] - c.means[kComplier][0];
        const Real effect_f = c.means[kDefier][1] - c.means[kDefier][0];
        late_strata.num += m * (c.shares[kComplier] * effect_c + c.shares[kDefier] * effect_f);
        late_strata.den += m * pi;
        const Real omega = static_cast<Real>(c.p_treated(1)) - c.p_treated(0);
        const Real rform = static_cast<Real>(c.mean_y(1)) - c.mean_y(0);
        if (omega != 0) {
            late_obs.num += m * std::abs(omega) * (rform / omega);
            late_obs.den += m * std::abs(omega);
        }
        fs.num += m * v * omega;
        rf.num += m * v * rform;
        v_total += m * v;
    }
    fs.den = v_total;
    rf.den = v_total;

    const auto ms = moments(dgp);
    const bool iv_defined = std::abs(iv.den) > 1e-12L * abs_scale;
    if (iv_defined) {
        out.beta_iv.direct = moment_iv(ms);
        if (wm) out.beta_iv.closed = iv.value(abs_scale);
        out.iv_weight_denominator = static_cast<double>(iv.den);
        out.iv_weights.reserve(dgp.cells.size());
        for (const auto& c : dgp.cells) {
            const Real v = static_cast<Real>(c.e) * (1 - static_cast<Real>(c.e));
            out.iv_weights.push_back(static_cast<double>(c.mass * c.c() * c.pi() * v / iv.den));
        }
    }
    if (tsls.den > 0) {
        out.beta_2sls.direct = moment_2sls(ms);
        if (wm) out.beta_2sls.closed = static_cast<double>(tsls.num / tsls.den);
    }
    out.tau_late.direct = late_strata.value(1);
    out.tau_late.closed = late_obs.value(1);
    out.first_stage_coef.direct = moment_projection(ms, false);
    out.first_stage_coef.closed = fs.value(1);
    out.reduced_form_coef.direct = moment_projection(ms, true);
    out.reduced_form_coef.closed = rf.value(1);

    // Reordered population.
    const DgpSpec r = reorder_instrument(dgp);
    const auto rms = moments(r);
    if (riv.den > 0) {
        out.beta_riv.direct = moment_iv(rms);
        if (wm) out.beta_riv.closed = riv.value(abs_scale);
    }

    Real theta = 0;
    Ratio pi1_direct, pi0_direct, latt_direct, latu_direct, pi1_closed, pi0_closed, latt_closed, latu_closed;
    for (const auto& c : r.cells) {
        if (!(c.mass > 0.0)) continue;
        const Real m = c.mass, e = c.e;
        theta += m * e;
        const Real comp = c.shares[kComplier];
        const Real effect = c.means[kComplier][1] - c.means[kComplier][0];
        pi1_direct.num += m * e * comp;
        pi0_direct.num += m * (1 - e) * comp;
        latt_direct.num += m * e * comp * effect;
        latt_direct.den += m * e * comp;
        latu_direct.num += m * (1 - e) * comp * effect;
        latu_direct.den += m * (1 - e) * comp;

        const Real omega = static_cast<Real>(c.p_treated(1)) - c.p_treated(0);
        const Real rform = static_cast<Real>(c.mean_y(1)) - c.mean_y(0);
        pi1_closed.num += m * e * omega;
        pi0_closed.num += m * (1 - e) * omega;
        latt_closed.num += m * e * rform;
        latt_closed.den += m * e * omega;
        latu_closed.num += m * (1 - e) * rform;
        latu_closed.den += m * (1 - e) * omega;
    }
    out.theta = static_cast<double>(theta);
    pi1_direct.den = pi1_closed.den = theta;
    pi0_direct.den = pi0_closed.den = 1 - theta;
    if (wm) {
        out.pi1.direct = pi1_direct.value(1);
        out.pi0.direct = pi0_direct.value(1);
        out.tau_latt.direct = latt_direct.value(1);
        out.tau_latu.direct = latu_direct.value(1);
    }
    out.pi1.closed = pi1_closed.value(1);
    out.pi0.closed = pi0_closed.value(1);
    out.tau_latt.closed = latt_closed.value(1);
    out.tau_latu.closed = latu_closed.value(1);

    Real m1 = 0, m0 = 0;
    std::vector<Real> e, a1, a0, y1, y0, d1, d0;
    for (const auto& c : r.cells) {
        if (!(c.mass > 0.0)) continue;
        e.push_back(c.e);
        a1.push_back(c.mass * static_cast<Real>(c.e));
        a0.push_back(c.mass * (1 - static_cast<Real>(c.e)));
        y1.push_back(c.mean_y(1));
        y0.push_back(c.mean_y(0));
        d1.push_back(c.p_treated(1));
        d0.push_back(c.p_treated(0));
        m1 += a1.back() * e.back();
        m0 += a0.back() * e.back();
    }
    m1 /= theta;
    m0 /= 1 - theta;
    Real var1 = 0, var0 = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        var1 += a1[i] * (e[i] - m1) * (e[i] - m1);
        var0 += a0[i] * (e[i] - m0) * (e[i] - m0);
    }
    var1 /= theta;
    var0 /= 1 - theta;
    out.var_e_z1 = static_cast<double>(var1);
    out.var_e_z0 = static_cast<double>(var0);

    if (out.pi1.closed && out.pi0.closed && *out.pi1.closed > 0.0 && *out.pi0.closed > 0.0) {
        const Real p1 = *out.pi1.closed, p0 = *out.pi0.closed;
        const Real t0 = (1 - theta) * var0 * p1, t1 = theta * var1 * p0;
        if (t0 + t1 > 0) {
            out.w_latt = static_cast<double>(t0 / (t0 + t1));
            out.lambda = static_cast<double>(t0 / (t0 + t1) - theta * p1 / (theta * p1 + (1 - theta) * p0));
        }
        out.lambda_equal_variance = lambda_rule_of_thumb(out.theta, static_cast<double>(p1), static_cast<double>(p0));
    }

    const Line ly1 = weighted_line(a1, e, y1), ly0 = weighted_line(a0, e, y0);
    const Line ld1 = weighted_line(a1, e, d1), ld0 = weighted_line(a0, e, d0);
    const Real pp1 = ld1.at(m1) - ld0.at(m1);
    const Real pp0 = ld1.at(m0) - ld0.at(m0);
    if (pp1 > 0 && pp0 > 0) {
        const Real latt = (ly1.at(m1) - ly0.at(m1)) / pp1;
        const Real latu = (ly1.at(m0) - ly0.at(m0)) / pp0;
        const Real t0 = (1 - theta) * var0 * pp1, t1 = theta * var1 * pp0;
        out.pi1_proj = static_cast<double>(pp1);
        out.pi0_proj = static_cast<double>(pp0);
        out.tau_latt_proj = static_cast<double>(latt);
        out.tau_latu_proj = static_cast<double>(latu);
        if (t0 + t1 > 0) {
            const Real w = t0 / (t0 + t1);
            out.w_latt_proj = static_cast<double>(w);
            out.beta_reconstructed_proj = static_cast<double>(w * latt + (1 - w) * latu);
        }
    }
    return out;
}

} // namespace ivlate
