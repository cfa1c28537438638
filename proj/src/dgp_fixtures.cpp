#include "ivlate/verify.hpp"

#include "ivlate/error.hpp"
#include "ivlate/rng.hpp"

#include <cmath>
#include <string>

namespace ivlate {

namespace {

double between(Stream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform(); }

void fill_strata(Stream& s, PopCell& c, double min_pi, bool defiers) {
    const double pi = between(s, min_pi, 0.8);
    const double always = (1.0 - pi) * s.uniform();
    c.shares = {};
    c.shares[kAlways] = always;
    c.shares[kNever] = 1.0 - pi - always;
    c.shares[defiers ? kDefier : kComplier] = pi;
    for (auto& m : c.means) {
        m[0] = between(s, -1.0, 1.0);
        m[1] = m[0] + between(s, -1.0, 2.0);
    }
}

void normalize_masses(DgpSpec& dgp) {
    double total = 0.0;
    for (const auto& c : dgp.cells) total += c.mass;
    for (auto& c : dgp.cells) c.mass /= total;
}

} // namespace

double equal_variance_mass(double e_a, double e_b) {
    if (!(e_a > 0.0 && e_a < 1.0 && e_b > 0.0 && e_b < 1.0)) throw InputError("e values must lie in (0, 1)");
    const double r = std::sqrt(e_b * (1.0 - e_b) / (e_a * (1.0 - e_a)));
    return r / (1.0 + r);
}

DgpSpec random_dgp(std::uint64_t seed, const RandomDgpOptions& o) {
    if (o.min_cells < 1 || o.max_cells < o.min_cells) throw InputError("invalid cell-count range");
    if (!(o.e_lo > 0.0 && o.e_lo < o.e_hi && o.e_hi < 1.0)) throw InputError("invalid e range");
    Stream s(seed, 0);
    std::size_t k = o.min_cells + static_cast<std::size_t>(s.below(o.max_cells - o.min_cells + 1));
    if (o.two_point_e) k = std::max<std::size_t>(k, 2);

    DgpSpec dgp;
    dgp.name = "random-" + std::to_string(seed);
    dgp.covariates = {"x"};
    dgp.weak_monotone = true;
    const std::size_t half = (k + 1) / 2;
    double e_a = between(s, o.e_lo, o.e_hi);
    double e_b = between(s, o.e_lo, o.e_hi);
    while (std::abs(e_a - e_b) < 0.1 * (o.e_hi - o.e_lo)) e_b = between(s, o.e_lo, o.e_hi);
    if (o.symmetric_e) {
        if (std::abs(e_a - 0.5) < 0.05) e_a = e_a < 0.5 ? 0.45 : 0.55;
        e_b = 1.0 - e_a;
    }

    for (std::size_t i = 0; i < k; ++i) {
        PopCell c;
        c.key = {static_cast<std::int64_t>(i)};
        c.mass = between(s, 0.2, 1.0);
        c.e = o.two_point_e ? (i < half ? e_a : e_b) : between(s, o.e_lo, o.e_hi);
        c.noise_sd = o.noise_sd;
        const bool defiers = o.monotonicity == Monotonicity::Weak && s.uniform() < 0.4;
        fill_strata(s, c, o.min_pi, defiers);
        if (o.constant_effect) {
            for (auto& m : c.means) m[1] = m[0] + *o.constant_effect;
        }
        dgp.cells.push_back(c);
    }
    if (o.two_point_e && o.equal_variance) {
        const double target_a = equal_variance_mass(e_a, e_b);
        double group_a = 0.0, group_b = 0.0;
        for (std::size_t i = 0; i < k; ++i) (i < half ? group_a : group_b) += dgp.cells[i].mass;
        for (std::size_t i = 0; i < k; ++i) {
            auto& m = dgp.cells[i].mass;
            m = i < half ? m / group_a * target_a : m / group_b * (1.0 - target_a);
        }
    }
    normalize_masses(dgp);
    return dgp;
}

DgpSpec find_sign_reversal(std::uint64_t seed, std::size_t max_tries) {
    for (std::size_t t = 0; t < max_tries; ++t) {
        Stream s(seed, t);
        const std::size_t k = 2 + static_cast<std::size_t>(s.below(3));
        DgpSpec dgp;
        dgp.name = "sign-reversal";
        dgp.covariates = {"x"};
        bool has_c = false, has_f = false;
        for (std::size_t i = 0; i < k; ++i) {
            PopCell c;
            c.key = {static_cast<std::int64_t>(i)};
            c.mass = between(s, 0.1, 1.0);
            c.e = between(s, 0.1, 0.9);
            c.noise_sd = 1.0;
            const bool defiers = s.uniform() < 0.5;
            has_c = has_c || !defiers;
            has_f = has_f || defiers;
            const double pi = between(s, 0.1, 0.6);
            const double always = (1.0 - pi) * s.uniform();
            c.shares[kAlways] = always;
            c.shares[kNever] = 1.0 - pi - always;
            c.shares[defiers ? kDefier : kComplier] = pi;
            for (auto& m : c.means) {
                m[0] = between(s, -0.5, 0.5);
                m[1] = m[0] + between(s, 0.1, 2.0);
            }
            dgp.cells.push_back(c);
        }
        if (!has_c || !has_f) continue;
        normalize_masses(dgp);

        double den = 0.0, scale = 0.0;
        for (const auto& c : dgp.cells) {
            den += c.mass * c.c() * c.pi() * c.e * (1.0 - c.e);
            scale += c.mass * c.pi() * c.e * (1.0 - c.e);
        }
        if (std::abs(den) < 0.05 * scale) continue; // keep away from an exploding ratio
        const auto p = population_estimands(dgp);
        if (p.beta_iv.direct && *p.beta_iv.direct < 0.0) return dgp;
    }
    throw EstimationError("no sign-reversing DGP found");
}

std::vector<DgpSpec> monte_carlo_fixtures() {
    std::vector<DgpSpec> out;
    std::uint64_t seed = 2024;
    while (out.size() < 20) {
        RandomDgpOptions o;
        o.min_cells = 2;
        o.max_cells = 6;
        o.monotonicity = out.size() % 2 == 0 ? Monotonicity::Strong : Monotonicity::Weak;
        o.two_point_e = out.size() % 5 == 4;
        o.e_lo = 0.2;
        o.e_hi = 0.8;
        o.min_pi = 0.2;
        o.noise_sd = 1.0;
        DgpSpec dgp = random_dgp(seed++, o);
        double den = 0.0, scale = 0.0;
        for (const auto& c : dgp.cells) {
            den += c.mass * c.c() * c.pi() * c.e * (1.0 - c.e);
            scale += c.mass * c.pi() * c.e * (1.0 - c.e);
        }
        // A small IV denominator makes the sampling distribution heavy tailed.
        if (std::abs(den) < 0.3 * scale) continue;
        dgp.name = "mc-" + std::to_string(out.size() + 1);
        out.push_back(std::move(dgp));
    }
    return out;
}

} // namespace ivlate
