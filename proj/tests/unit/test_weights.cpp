#include "doctest.h"

#include "ivlate/error.hpp"
#include "ivlate/weights.hpp"
#include "support.hpp"

using namespace ivlate;

namespace {

WeightTable table_for(const Sample& s) {
    const CellTable t = build_cells(s, s.covariate_names());
    return weight_table(t, cell_estimates(t));
}

} // namespace

TEST_CASE("weights sum to one; sign properties hold per scheme") {
    const WeightTable wt = table_for(test::mixed_sample(20000, 31));
    for (const Scheme s : kSchemes) CHECK(test::near(wt.weight_sum(s), 1.0, 1e-12));
    bool any_negative_iv = false;
    for (const auto& r : wt.rows) {
        CHECK(r.w(Scheme::Tsls) >= 0.0);
        CHECK(r.w(Scheme::RIV) >= 0.0);
        CHECK(r.w(Scheme::Late) >= 0.0);
        // IV weight shares the sign of the first stage (the normalizing total is positive here).
        CHECK((r.w(Scheme::IV) < 0.0) == (r.omega_hat < 0.0));
        any_negative_iv = any_negative_iv || r.w(Scheme::IV) < 0.0;
        CHECK(test::near(r.raw[0], r.share * r.var_z * r.omega_hat, 1e-12));
        CHECK(test::near(r.raw[1], r.share * r.var_z * r.omega_hat * r.omega_hat, 1e-12));
        CHECK(test::near(r.raw[2], r.share * r.var_z * std::abs(r.omega_hat), 1e-12));
        CHECK(test::near(r.raw[3], r.share * std::abs(r.omega_hat), 1e-12));
    }
    CHECK(any_negative_iv);
    CHECK(to_string(Scheme::IV) == "w_iv");
    CHECK(to_string(Scheme::Late) == "w_late");
}

TEST_CASE("negative-weight report splits cells by first-stage sign") {
    const WeightTable wt = table_for(test::mixed_sample(20000, 32));
    const NegativeWeightReport r = negative_weight_report(wt);
    CHECK(r.cells == wt.rows.size());
    CHECK(r.negative_cells == 1);
    double neg_share = 0.0, pos = 0.0, neg = 0.0, num = 0.0, den = 0.0;
    for (const auto& row : wt.rows) {
        if (row.omega_hat < 0.0) {
            neg_share += row.share;
            neg += row.w(Scheme::IV);
            num += row.share * std::abs(row.omega_hat) * *row.beta_hat;
            den += row.share * std::abs(row.omega_hat);
        } else {
            pos += row.w(Scheme::IV);
        }
    }
    CHECK(test::near(r.negative_obs_share, neg_share, 1e-12));
    CHECK(test::near(r.positive_w_iv_sum, pos, 1e-12));
    CHECK(test::near(r.negative_w_iv_sum, neg, 1e-12));
    CHECK(r.negative_w_iv_sum < 0.0);
    REQUIRE(r.mean_beta_negative.has_value());
    CHECK(test::near(*r.mean_beta_negative, num / den, 1e-12));
}

TEST_CASE("no negative cells: empty negative group") {
    auto dgp = test::dgp_of({test::pop_cell(0, 0.5, 0.4, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                             test::pop_cell(1, 0.5, 0.6, 0.3, 0.0, 0.2, 2.0, 1.0, 1.0)});
    const WeightTable wt = table_for(draw_sample(dgp, 4000, 33));
    const auto r = negative_weight_report(wt);
    CHECK(r.negative_cells == 0);
    CHECK(r.negative_obs_share == 0.0);
    CHECK_FALSE(r.mean_beta_negative.has_value());
    for (const auto& row : wt.rows) CHECK(test::near(row.w(Scheme::IV), row.w(Scheme::RIV), 1e-12));
}

TEST_CASE("all first stages zero is degenerate") {
    const Sample s({1, 2, 3, 4}, {1, 1, 0, 0}, {1, 0, 1, 0}, {"x"}, {{0, 0, 0, 0}});
    const CellTable t = build_cells(s, s.covariate_names());
    CHECK_THROWS_AS(weight_table(t, cell_estimates(t)), DegenerateEstimandError);
}
