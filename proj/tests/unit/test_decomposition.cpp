#include "doctest.h"

#include "ivlate/decomposition.hpp"
#include "ivlate/error.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/weights.hpp"
#include "support.hpp"

using namespace ivlate;

namespace {

struct Reordered {
    Sample sample;
    CellTable table;
    CellEstimates est;
};

Reordered reordered(const Sample& s) {
    const CellTable t = build_cells(s, s.covariate_names());
    Reordered r{reorder_instrument(s, t, cell_estimates(t)), {}, {}};
    r.table = build_cells(r.sample, r.sample.covariate_names());
    r.est = cell_estimates(r.table);
    return r;
}

} // namespace

TEST_CASE("rule-of-thumb lambda: zero at one half, antisymmetric, equal-pi line") {
    CHECK(std::abs(lambda_rule_of_thumb(0.5, 0.3, 0.1)) < 1e-15);
    for (const double th : {0.1, 0.3, 0.62, 0.9}) {
        CHECK(test::near(lambda_rule_of_thumb(th, 0.3, 0.1), -lambda_rule_of_thumb(1.0 - th, 0.1, 0.3), 1e-14));
        CHECK(test::near(lambda_rule_of_thumb(th, 0.2, 0.2), 1.0 - 2.0 * th, 1e-14));
    }
    double prev = 2.0;
    for (int i = 1; i < 20; ++i) {
        const double w = w_latt_equal_variance(i / 20.0, 0.4, 0.2);
        CHECK(w < prev);
        prev = w;
    }
    CHECK_THROWS_AS(lambda_rule_of_thumb(0.0, 0.3, 0.1), InputError);
    CHECK_THROWS_AS(lambda_rule_of_thumb(1.2, 0.3, 0.1), InputError);
    CHECK_THROWS_AS(w_latt_equal_variance(0.5, 0.0, 0.0), InputError);
}

TEST_CASE("decomposition identities hold in sample") {
    const Reordered r = reordered(test::mixed_sample(30000, 41));
    const Decomposition dec = decompose(r.table, r.est);
    const double riv = estimate_beta_iv(r.sample, ControlSpec{r.sample.covariate_names(), {}}).estimate;

    CHECK(test::near(dec.beta_reconstructed, riv, 1e-10));
    CHECK(test::near(dec.w_latt * dec.tau_latt + dec.w_latu * dec.tau_latu, riv, 1e-10));
    CHECK(test::near(dec.w_latt + dec.w_latu, 1.0, 1e-12));
    CHECK(test::near(dec.lambda, dec.w_latt - dec.desired_w_latt, 1e-12));
    CHECK(test::near(dec.desired_w_latt, dec.theta * dec.pi1 / (dec.theta * dec.pi1 + (1 - dec.theta) * dec.pi0), 1e-12));
    const double reversed = (1 - dec.theta) * dec.var_e_z0 * dec.pi1 /
                            (dec.theta * dec.var_e_z1 * dec.pi0 + (1 - dec.theta) * dec.var_e_z0 * dec.pi1);
    CHECK(test::near(dec.w_latt, reversed, 1e-12));
    CHECK(test::near(dec.w_latt_equal_variance, w_latt_equal_variance(dec.theta, dec.pi1, dec.pi0), 1e-12));

    // Cell-average versions reproduce the LATE as a convex combination.
    const double a = dec.theta * dec.pi1_np, b = (1 - dec.theta) * dec.pi0_np;
    CHECK(test::near((a * dec.tau_latt_np + b * dec.tau_latu_np) / (a + b), dec.tau_late, 1e-10));
    CHECK(test::near(dec.tau_late, estimate_tau_late(r.table, r.est).estimate, 1e-12));

    // Theta is the share of Z = 1 rows.
    CHECK(test::near(dec.theta, static_cast<double>(r.sample.count_z1()) / r.sample.size(), 1e-12));
}

TEST_CASE("two-point propensity: projection and cell-average versions coincide") {
    auto dgp = test::dgp_of({test::pop_cell(0, 0.2, 0.3, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                             test::pop_cell(1, 0.3, 0.3, 0.3, 0.0, 0.2, 2.0, 1.0, 1.0),
                             test::pop_cell(2, 0.25, 0.7, 0.4, 0.0, 0.3, -0.5, 0.5, 0.5),
                             test::pop_cell(3, 0.25, 0.7, 0.2, 0.0, 0.2, 0.3, 2.0, 2.0)});
    const CellTable t = test::population_table(dgp);
    const Decomposition dec = decompose(t, cell_estimates(t));
    CHECK(test::near(dec.pi1, dec.pi1_np, 1e-10));
    CHECK(test::near(dec.pi0, dec.pi0_np, 1e-10));
    CHECK(test::near(dec.tau_latt, dec.tau_latt_np, 1e-10));
    CHECK(test::near(dec.tau_latu, dec.tau_latu_np, 1e-10));
}

TEST_CASE("constant propensity falls back to the equal-variance weights") {
    auto dgp = test::dgp_of({test::pop_cell(0, 0.5, 0.4, 0.5, 0.0, 0.1, 1.0, 0.0),
                             test::pop_cell(1, 0.5, 0.4, 0.3, 0.0, 0.2, 2.0, 1.0)});
    const CellTable t = test::population_table(dgp);
    const Decomposition dec = decompose(t, cell_estimates(t));
    CHECK(dec.equal_variance_fallback);
    CHECK(dec.var_e_z1 == doctest::Approx(0.0));
    CHECK(test::near(dec.w_latt, dec.w_latt_equal_variance, 1e-12));
    CHECK(test::near(dec.theta, 0.4, 1e-12));
}

TEST_CASE("decompose requires non-negative first stages") {
    const Sample s = test::mixed_sample(5000, 42);
    const CellTable t = build_cells(s, s.covariate_names());
    CHECK_THROWS_AS(decompose(t, cell_estimates(t)), PreconditionError);
}

TEST_CASE("sweep: weight 2 equals duplicating the Z = 0 rows; weight 1 is the sample") {
    const Reordered r = reordered(test::mixed_sample(6000, 43));
    const std::vector<double> grid{1.0, 2.0};
    const SweepCurve curve = bias_sweep(r.sample, r.sample.covariate_names(), grid);
    REQUIRE(curve.points.size() == 2);
    // Ascending in theta: w = 2 has the smaller theta.
    const SweepPoint& p2 = curve.points[0];
    const SweepPoint& p1 = curve.points[1];
    CHECK(p2.w == 2.0);
    CHECK(test::near(p1.theta, static_cast<double>(r.sample.count_z1()) / r.sample.size(), 1e-12));
    CHECK(test::near(p1.beta_riv, estimate_beta_riv(r.sample, r.table).estimate, 1e-10));
    CHECK(test::near(p1.tau_late, estimate_tau_late(r.table, r.est).estimate, 1e-10));

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < r.sample.size(); ++i) {
        rows.push_back(i);
        if (r.sample.z()[i] == 0) rows.push_back(i);
    }
    const Sample dup = r.sample.take(rows);
    const CellTable td = build_cells(dup, dup.covariate_names());
    const CellEstimates ed = cell_estimates(td);
    const Decomposition dd = decompose(td, ed);
    CHECK(test::near(p2.theta, dd.theta, 1e-12));
    CHECK(test::near(p2.beta_riv, estimate_beta_riv(dup, td).estimate, 1e-10));
    CHECK(test::near(p2.tau_latt, dd.tau_latt_np, 1e-10));
    CHECK(test::near(p2.tau_latu, dd.tau_latu_np, 1e-10));
    CHECK(test::near(p2.tau_late, dd.tau_late, 1e-10));
}

TEST_CASE("default sweep grid spans the requested theta range") {
    const Reordered r = reordered(test::mixed_sample(6000, 44));
    const auto grid = default_sweep_grid(r.table, 9, 0.1, 0.9);
    REQUIRE(grid.size() == 9);
    const SweepCurve curve = bias_sweep(r.sample, r.sample.covariate_names(), grid);
    CHECK(test::near(curve.points.front().theta, 0.1, 1e-10));
    CHECK(test::near(curve.points.back().theta, 0.9, 1e-10));
    for (std::size_t i = 1; i < curve.points.size(); ++i) CHECK(curve.points[i].theta > curve.points[i - 1].theta);
    // Lambda changes sign somewhere inside the range for this sample.
    const auto zc = curve.zero_crossing();
    if (zc) {
        CHECK(*zc > 0.1);
        CHECK(*zc < 0.9);
    }
}

TEST_CASE("zero crossing interpolates linearly") {
    SweepCurve c;
    SweepPoint a, b, d;
    a.theta = 0.2;
    a.lambda = 0.4;
    b.theta = 0.4;
    b.lambda = -0.2;
    d.theta = 0.6;
    d.lambda = -0.5;
    c.points = {a, b, d};
    REQUIRE(c.zero_crossing().has_value());
    CHECK(*c.zero_crossing() == doctest::Approx(0.2 + 0.2 * (0.4 / 0.6)));
    c.points = {b, d};
    CHECK_FALSE(c.zero_crossing().has_value());
}
