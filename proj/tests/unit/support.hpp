#pragma once

#include "ivlate/cells.hpp"
#include "ivlate/dgp.hpp"
#include "ivlate/sample.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace test {

// Relative-or-absolute closeness used across the unit tests.
inline bool near(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline ivlate::PopCell pop_cell(std::int64_t key, double mass, double e, double complier, double defier,
                                double always, double tau, double base = 0.0, double noise = 0.0) {
    ivlate::PopCell c;
    c.key = {key};
    c.mass = mass;
    c.e = e;
    c.shares = {always, 1.0 - complier - defier - always, complier, defier};
    for (std::size_t s = 0; s < 4; ++s) c.means[s] = {base + 0.1 * static_cast<double>(s), base + 0.1 * static_cast<double>(s) + tau};
    c.noise_sd = noise;
    return c;
}

inline ivlate::DgpSpec dgp_of(std::vector<ivlate::PopCell> cells) {
    ivlate::DgpSpec d;
    d.name = "test";
    d.covariates = {"x"};
    d.cells = std::move(cells);
    return d;
}

// Heterogeneous sample with a few cells, some with a negative first stage.
inline ivlate::Sample mixed_sample(std::size_t n, std::uint64_t seed) {
    auto dgp = dgp_of({pop_cell(0, 0.3, 0.3, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0), pop_cell(1, 0.25, 0.6, 0.0, 0.3, 0.2, 2.0, 1.0, 1.0),
                       pop_cell(2, 0.25, 0.5, 0.4, 0.0, 0.3, -0.5, 0.5, 0.5), pop_cell(3, 0.2, 0.8, 0.2, 0.0, 0.2, 0.3, 2.0, 2.0)});
    return ivlate::draw_sample(dgp, n, seed);
}

// Population cell table: masses as shares, population conditional means as arm means.
inline ivlate::CellTable population_table(const ivlate::DgpSpec& dgp) {
    ivlate::CellTable t;
    t.covariates = dgp.covariates;
    t.total_mass = 1.0;
    for (const auto& pc : dgp.cells) {
        ivlate::Cell c;
        c.key = pc.key;
        c.n = c.n_z1 = c.n_z0 = 1;
        c.mass = pc.mass;
        c.mass_z1 = pc.mass * pc.e;
        c.mass_z0 = pc.mass * (1.0 - pc.e);
        c.mean_y_z1 = pc.mean_y(1);
        c.mean_y_z0 = pc.mean_y(0);
        c.mean_d_z1 = pc.p_treated(1);
        c.mean_d_z0 = pc.p_treated(0);
        c.share = pc.mass;
        c.var_z = pc.e * (1.0 - pc.e);
        t.cells.push_back(c);
    }
    return t;
}

} // namespace test
