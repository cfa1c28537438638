#include "doctest.h"

#include "ivlate/decomposition.hpp"
#include "ivlate/error.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/montecarlo.hpp"
#include "ivlate/population.hpp"
#include "ivlate/verify.hpp"
#include "support.hpp"

#include <cstdio>
#include <filesystem>

using namespace ivlate;

namespace {

DgpSpec four_cell() {
    return test::dgp_of({test::pop_cell(0, 0.2, 0.3, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                         test::pop_cell(1, 0.3, 0.6, 0.0, 0.3, 0.2, 2.0, 1.0, 1.0),
                         test::pop_cell(2, 0.25, 0.5, 0.4, 0.0, 0.3, -0.5, 0.5, 0.5),
                         test::pop_cell(3, 0.25, 0.8, 0.2, 0.0, 0.2, 0.3, 2.0, 2.0)});
}

void check_report(const IdentityReport& r) {
    for (const auto& c : r.checks) {
        INFO(r.dgp_name << " " << c.name << " lhs=" << c.lhs << " rhs=" << c.rhs << " " << c.detail);
        CHECK(c.status != CheckStatus::Fail);
    }
}

} // namespace

TEST_CASE("validation rejects malformed DGPs") {
    DgpSpec d = four_cell();
    CHECK_NOTHROW(validate(d));
    SUBCASE("masses") {
        d.cells[0].mass = 0.5;
        CHECK_THROWS_AS(validate(d), InputError);
    }
    SUBCASE("propensity") {
        d.cells[1].e = 1.0;
        CHECK_THROWS_AS(validate(d), InputError);
    }
    SUBCASE("strata shares") {
        d.cells[2].shares[0] += 0.1;
        CHECK_THROWS_AS(validate(d), InputError);
    }
    SUBCASE("weak monotonicity") {
        d.cells[2].shares = {0.2, 0.2, 0.3, 0.3};
        CHECK_THROWS_AS(validate(d), InputError);
        d.weak_monotone = false;
        CHECK_NOTHROW(validate(d));
    }
    SUBCASE("duplicate keys") {
        d.cells[1].key = d.cells[0].key;
        CHECK_THROWS_AS(validate(d), InputError);
    }
}

TEST_CASE("DGP JSON round trip") {
    const DgpSpec d = random_dgp(17, RandomDgpOptions{2, 6, Monotonicity::Weak});
    const std::string text = dgp_to_json(d);
    const DgpSpec back = dgp_from_json(text);
    CHECK(dgp_to_json(back) == text);
    REQUIRE(back.cells.size() == d.cells.size());
    for (std::size_t i = 0; i < d.cells.size(); ++i) {
        CHECK(back.cells[i].mass == d.cells[i].mass);
        CHECK(back.cells[i].e == d.cells[i].e);
        CHECK(back.cells[i].shares == d.cells[i].shares);
        CHECK(back.cells[i].means == d.cells[i].means);
    }
    const auto path = std::filesystem::temp_directory_path() / "ivlate_dgp_roundtrip.json";
    save_dgp(path.string(), d);
    CHECK(dgp_to_json(load_dgp(path.string())) == text);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(dgp_from_json("{\"cells\": 3}"), InputError);
    CHECK_THROWS_AS(dgp_from_json("not json"), InputError);
}

TEST_CASE("draws are deterministic and independent of threading") {
    const DgpSpec d = four_cell();
    const Sample a = draw_sample(d, 20000, 5);
    const Sample b = draw_sample_serial(d, 20000, 5);
    const Sample c = draw_sample(d, 20000, 6);
    CHECK(std::equal(a.y().begin(), a.y().end(), b.y().begin()));
    CHECK(std::equal(a.d().begin(), a.d().end(), b.d().begin()));
    CHECK(std::equal(a.z().begin(), a.z().end(), b.z().begin()));
    CHECK(std::equal(a.covariate("x").begin(), a.covariate("x").end(), b.covariate("x").begin()));
    CHECK_FALSE(std::equal(a.y().begin(), a.y().end(), c.y().begin()));
}

TEST_CASE("draw frequencies match the population within 3 standard errors") {
    const DgpSpec d = four_cell();
    const std::size_t n = 100000;
    const Sample s = draw_sample(d, n, 8);
    double pz = 0.0, pd = 0.0;
    for (const auto& c : d.cells) {
        pz += c.mass * c.e;
        pd += c.mass * (c.e * c.p_treated(1) + (1 - c.e) * c.p_treated(0));
    }
    const double fz = static_cast<double>(s.count_z1()) / n;
    double fd = 0.0;
    for (const auto v : s.d()) fd += v;
    fd /= n;
    CHECK(std::abs(fz - pz) <= 3.0 * std::sqrt(pz * (1 - pz) / n));
    CHECK(std::abs(fd - pd) <= 3.0 * std::sqrt(pd * (1 - pd) / n));
}

TEST_CASE("noise-free constant effect: population and sample estimands equal the effect") {
    DgpSpec d = four_cell();
    d.cells[1].shares = {0.2, 0.5, 0.3, 0.0};
    for (auto& c : d.cells) {
        c.noise_sd = 0.0;
        for (auto& m : c.means) m = {0.5, 2.5};
    }
    const PopulationEstimands pe = population_estimands(d);
    CHECK(test::near(*pe.beta_iv.direct, 2.0, 1e-12));
    CHECK(test::near(*pe.beta_riv.direct, 2.0, 1e-12));
    CHECK(test::near(*pe.tau_late.direct, 2.0, 1e-12));
    const auto est = sample_estimates(draw_sample(d, 5000, 9));
    for (const double v : est) CHECK(test::near(v, 2.0, 1e-10));
}

TEST_CASE("identities hold for 200 random DGPs of both monotonicity types") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RandomDgpOptions o;
        o.monotonicity = seed % 2 ? Monotonicity::Weak : Monotonicity::Strong;
        o.two_point_e = seed % 5 == 0;
        o.equal_variance = seed % 10 == 0;
        const DgpSpec d = random_dgp(1000 + seed, o);
        CHECK_NOTHROW(validate(d));
        check_report(verify_identities(d));
    }
}

TEST_CASE("strong monotonicity: RIV equals IV and IV weights are non-negative") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const DgpSpec d = random_dgp(5000 + seed, RandomDgpOptions{1, 8, Monotonicity::Strong});
        CHECK(d.strong_monotone());
        const IdentityReport r = verify_identities(d);
        check_report(r);
        const auto it = std::find_if(r.checks.begin(), r.checks.end(),
                                     [](const IdentityCheck& c) { return c.name == "strong_monotone_riv_equals_iv"; });
        REQUIRE(it != r.checks.end());
        CHECK(it->status == CheckStatus::Pass);
        for (const double w : population_estimands(d).iv_weights) CHECK(w >= -1e-15);
    }
}

TEST_CASE("weak monotonicity: complier and defier cells give IV weights of both signs") {
    const DgpSpec d = test::dgp_of({test::pop_cell(0, 0.5, 0.4, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                                    test::pop_cell(1, 0.5, 0.6, 0.0, 0.3, 0.2, 2.0, 1.0, 1.0)});
    const PopulationEstimands pe = population_estimands(d);
    REQUIRE(pe.iv_weights.size() == 2);
    CHECK(pe.iv_weights[0] > 0.0);
    CHECK(pe.iv_weights[1] < 0.0);
    CHECK(test::near(pe.iv_weights[0] + pe.iv_weights[1], 1.0, 1e-12));
    // Hand computation: beta_iv = sum m V omega beta / sum m V omega.
    const double v0 = 0.24, v1 = 0.24, om0 = 0.5, om1 = -0.3;
    const double b0 = 1.0, b1 = 2.0; // defiers have the same effect magnitude
    CHECK(test::near(*pe.beta_iv.closed, (v0 * om0 * b0 + v1 * om1 * b1) / (v0 * om0 + v1 * om1), 1e-12));
    CHECK(test::near(*pe.beta_riv.closed, (v0 * om0 * b0 - v1 * om1 * b1) / (v0 * om0 - v1 * om1), 1e-12));
    CHECK(test::near(*pe.tau_late.closed, (0.5 * b0 + 0.3 * b1) / 0.8, 1e-12));
    check_report(verify_identities(d));
}

TEST_CASE("equal variances at theta one half: reordered IV equals LATE") {
    // Symmetric two-point propensity with equal group masses.
    const DgpSpec d = test::dgp_of({test::pop_cell(0, 0.25, 0.3, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                                    test::pop_cell(1, 0.25, 0.3, 0.2, 0.0, 0.2, 3.0, 1.0, 1.0),
                                    test::pop_cell(2, 0.25, 0.7, 0.4, 0.0, 0.3, -0.5, 0.5, 0.5),
                                    test::pop_cell(3, 0.25, 0.7, 0.3, 0.0, 0.2, 0.8, 2.0, 2.0)});
    const PopulationEstimands pe = population_estimands(d);
    CHECK(test::near(pe.theta, 0.5, 1e-15));
    CHECK(test::near(pe.var_e_z1, pe.var_e_z0, 1e-14));
    CHECK(std::abs(*pe.beta_riv.direct - *pe.tau_late.direct) < 1e-10);
    CHECK(equal_variance_mass(0.3, 0.7) == doctest::Approx(0.5));
    check_report(verify_identities(d));
}

TEST_CASE("equal-variance solver equates the arm variances") {
    for (const auto& [a, b] : std::vector<std::pair<double, double>>{{0.2, 0.6}, {0.35, 0.9}, {0.1, 0.5}}) {
        const double m = equal_variance_mass(a, b);
        const DgpSpec d = test::dgp_of({test::pop_cell(0, m, a, 0.5, 0.0, 0.1, 1.0), test::pop_cell(1, 1 - m, b, 0.3, 0.0, 0.2, 2.0)});
        const PopulationEstimands pe = population_estimands(d);
        CHECK(test::near(pe.var_e_z1, pe.var_e_z0, 1e-12));
    }
}

TEST_CASE("relabeling and reordering a population DGP") {
    const DgpSpec d = four_cell();
    const DgpSpec r = relabel_instrument(d);
    const PopulationEstimands a = population_estimands(d), b = population_estimands(r);
    CHECK(test::near(*a.beta_iv.direct, *b.beta_iv.direct, 1e-12));
    CHECK(test::near(*a.beta_riv.direct, *b.beta_riv.direct, 1e-12));
    CHECK(test::near(*a.tau_late.direct, *b.tau_late.direct, 1e-12));
    const DgpSpec o = reorder_instrument(d);
    CHECK(o.strong_monotone());
    for (const auto& c : o.cells) CHECK(c.omega() >= 0.0);
    CHECK(test::near(*population_estimands(o).beta_iv.direct, *a.beta_riv.direct, 1e-12));
}

TEST_CASE("sign-reversal search finds a negative IV estimand with positive effects") {
    const DgpSpec d = find_sign_reversal(1);
    const PopulationEstimands pe = population_estimands(d);
    CHECK(*pe.beta_iv.direct < 0.0);
    for (const auto& c : d.cells) {
        if (c.pi() > 0.0) {
            CHECK(c.tau() >= 0.1);
            CHECK(c.tau() <= 2.0);
        }
    }
    check_report(verify_identities(d));
}

TEST_CASE("Monte Carlo fixtures: 20 valid DGPs; serial and parallel runs agree") {
    const auto fx = monte_carlo_fixtures();
    REQUIRE(fx.size() == 20);
    for (const auto& d : fx) {
        CHECK_NOTHROW(validate(d));
        check_report(verify_identities(d));
    }
    const McResult a = run_monte_carlo(fx[0], 2000, 20, 100);
    const McResult b = run_monte_carlo_serial(fx[0], 2000, 20, 100);
    REQUIRE(a.estimators.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a.estimators[i].mean == b.estimators[i].mean);
        CHECK(a.estimators[i].sd == b.estimators[i].sd);
    }
}
