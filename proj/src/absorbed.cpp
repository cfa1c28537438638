#include "ivlate/absorbed.hpp"

#include "ivlate/error.hpp"

#include <cmath>
#include <vector>

namespace ivlate {

namespace {

struct Demeaned {
    std::vector<double> y, d, z;
};

// Two-pass within-group demeaning.
Demeaned demean(std::span<const double> y, std::span<const std::uint8_t> d, std::span<const std::uint8_t> z,
                std::span<const std::size_t> group, std::size_t groups) {
    const std::size_t n = y.size();
    if (d.size() != n || z.size() != n || group.size() != n) throw InputError("absorbed fit: length mismatch");
    std::vector<double> cnt(groups, 0.0), my(groups, 0.0), md(groups, 0.0), mz(groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t g = group[i];
        if (g >= groups) throw InputError("absorbed fit: group index out of range");
        cnt[g] += 1.0;
        my[g] += y[i];
        md[g] += d[i];
        mz[g] += z[i];
    }
    for (std::size_t g = 0; g < groups; ++g) {
        if (cnt[g] > 0.0) {
            my[g] /= cnt[g];
            md[g] /= cnt[g];
            mz[g] /= cnt[g];
        }
    }
    std::vector<double> cy(groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) cy[group[i]] += y[i] - my[group[i]];
    for (std::size_t g = 0; g < groups; ++g) {
        if (cnt[g] > 0.0) my[g] += cy[g] / cnt[g];
    }
    Demeaned out{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t g = group[i];
        out.y[i] = y[i] - my[g];
        out.d[i] = d[i] - md[g];
        out.z[i] = z[i] - mz[g];
    }
    return out;
}

std::size_t occupied(std::span<const std::size_t> group, std::size_t groups) {
    std::vector<char> seen(groups, 0);
    std::size_t k = 0;
    for (const auto g : group) {
        if (!seen[g]) {
            seen[g] = 1;
            ++k;
        }
    }
    return k;
}

double dof_factor(std::size_t n, std::size_t k) {
    if (n <= k) throw SingularityError("no residual degrees of freedom for the robust covariance");
    return static_cast<double>(n) / static_cast<double>(n - k);
}

} // namespace

AbsorbedFit absorbed_iv(std::span<const double> y, std::span<const std::uint8_t> d, std::span<const std::uint8_t> z,
                        std::span<const std::size_t> group, std::size_t groups) {
    const auto t = demean(y, d, z, group, groups);
    const std::size_t n = y.size();
    const std::size_t k = occupied(group, groups);

    double szd = 0.0, szy = 0.0, szz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        szd += t.z[i] * t.d[i];
        szy += t.z[i] * t.y[i];
        szz += t.z[i] * t.z[i];
    }
    if (szz <= 0.0) throw SingularityError("instrument has no variation within cells");
    if (std::abs(szd) <= 1e-12 * std::sqrt(szz * static_cast<double>(n))) {
        throw SingularityError("instrument is uncorrelated with treatment within cells");
    }

    AbsorbedFit fit;
    fit.n = n;
    fit.groups = k;
    fit.coefficient = szy / szd;
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = t.y[i] - fit.coefficient * t.d[i];
        meat += t.z[i] * t.z[i] * e * e;
    }
    fit.se = std::sqrt(meat / (szd * szd) * dof_factor(n, k + 1));

    const double pi = szd / szz;
    double meat_fs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = t.d[i] - pi * t.z[i];
        meat_fs += t.z[i] * t.z[i] * u * u;
    }
    const double v_pi = meat_fs / (szz * szz) * dof_factor(n, k + 1);
    if (v_pi > 0.0) fit.robust_f = pi * pi / v_pi;
    return fit;
}

AbsorbedFit absorbed_tsls_interacted(std::span<const double> y, std::span<const std::uint8_t> d,
                                     std::span<const std::uint8_t> z, std::span<const std::size_t> group,
                                     std::size_t groups) {
    const auto t = demean(y, d, z, group, groups);
    const std::size_t n = y.size();
    const std::size_t k = occupied(group, groups);

    // Within-cell first stages: slope of D on Z in each group.
    std::vector<double> szd(groups, 0.0), szz(groups, 0.0);
    std::vector<std::size_t> cnt(groups, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++cnt[group[i]];
        szd[group[i]] += t.z[i] * t.d[i];
        szz[group[i]] += t.z[i] * t.z[i];
    }
    std::vector<double> pi(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        if (szz[g] > 0.0) {
            pi[g] = szd[g] / szz[g];
        } else if (cnt[g] > 0) {
            throw SingularityError("a cell has only one instrument value; restrict cells first");
        }
    }

    double shy = 0.0, shd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dh = pi[group[i]] * t.z[i];
        shy += dh * t.y[i];
        shd += dh * t.d[i];
    }
    if (shd <= 0.0) throw SingularityError("interacted first stage has no explanatory power");

    AbsorbedFit fit;
    fit.n = n;
    fit.groups = k;
    fit.coefficient = shy / shd;
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dh = pi[group[i]] * t.z[i];
        const double e = t.y[i] - fit.coefficient * t.d[i];
        meat += dh * dh * e * e;
    }
    fit.se = std::sqrt(meat / (shd * shd) * dof_factor(n, k + 1));

    // The excluded instruments live in disjoint cells, so the first-stage covariance is diagonal.
    std::vector<double> meat_fs(groups, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t g = group[i];
        const double u = t.d[i] - pi[g] * t.z[i];
        meat_fs[g] += t.z[i] * t.z[i] * u * u;
    }
    const double factor = dof_factor(n, 2 * k);
    double wald = 0.0;
    bool singular = false;
    for (std::size_t g = 0; g < groups; ++g) {
        if (szz[g] <= 0.0) continue;
        const double v = meat_fs[g] / (szz[g] * szz[g]) * factor;
        if (!(v > 0.0)) {
            singular = true;
            break;
        }
        wald += pi[g] * pi[g] / v;
    }
    if (!singular) fit.robust_f = wald / static_cast<double>(k);
    return fit;
}

} // namespace ivlate
