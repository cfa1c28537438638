#include "doctest.h"

#include "ivlate/cells.hpp"
#include "ivlate/error.hpp"
#include "support.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace ivlate;

namespace {

ColumnMap basic_map() {
    ColumnMap m;
    m.outcome = "y";
    m.treatment = "d";
    m.instrument = "z";
    m.covariates = {"x"};
    return m;
}

} // namespace

TEST_CASE("four-row CSV echoes the hand-parsed values") {
    std::istringstream in("y,d,z,x,junk\n1.5,0,1,3,a\n-2.25,1,0,3,b\n0.125,1,1,7,\n1e3,0,0,-1,c\n");
    const Sample s = read_sample_csv(in, basic_map(), {});
    REQUIRE(s.size() == 4);
    const std::vector<double> y{1.5, -2.25, 0.125, 1000.0};
    const std::vector<std::uint8_t> d{0, 1, 1, 0}, z{1, 0, 1, 0};
    const std::vector<std::int64_t> x{3, 3, 7, -1};
    CHECK(std::equal(y.begin(), y.end(), s.y().begin()));
    CHECK(std::equal(d.begin(), d.end(), s.d().begin()));
    CHECK(std::equal(z.begin(), z.end(), s.z().begin()));
    CHECK(std::equal(x.begin(), x.end(), s.covariate("x").begin()));
}

TEST_CASE("treatment rule binarizes a count") {
    std::istringstream in("y,educ,z\n1,12,1\n2,13,0\n3,16,1\n");
    ColumnMap m;
    m.outcome = "y";
    m.treatment = "educ";
    m.instrument = "z";
    const Sample s = read_sample_csv(in, m, BinaryRule::parse(">12"));
    CHECK(s.d()[0] == 0);
    CHECK(s.d()[1] == 1);
    CHECK(s.d()[2] == 1);
    CHECK(BinaryRule::parse(">=16").apply(16.0) == 1);
    CHECK(BinaryRule::parse("<3").apply(3.0) == 0);
    CHECK(BinaryRule::parse(">12").to_string() == ">12");
    CHECK_THROWS_AS(BinaryRule::parse("12"), InputError);
}

TEST_CASE("loader errors") {
    SUBCASE("empty input is a schema error") {
        std::istringstream in("");
        CHECK_THROWS_AS(read_sample_csv(in, basic_map(), {}), SchemaError);
    }
    SUBCASE("missing column is named") {
        std::istringstream in("y,d,x\n1,0,1\n");
        try {
            read_sample_csv(in, basic_map(), {});
            FAIL("expected a schema error");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("'z'") != std::string::npos);
        }
    }
    SUBCASE("non-binary instrument reports its row") {
        std::istringstream in("y,d,z,x\n1,0,1,1\n2,1,0,1\n3,1,2,1\n");
        try {
            read_sample_csv(in, basic_map(), {});
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(e.row() == 2);
        }
    }
    SUBCASE("non-finite outcome") {
        std::istringstream in("y,d,z,x\n1,0,1,1\nnan,1,0,1\n");
        CHECK_THROWS_AS(read_sample_csv(in, basic_map(), {}), ValidationError);
    }
    SUBCASE("non-integer covariate") {
        std::istringstream in("y,d,z,x\n1,0,1,1.5\n2,1,0,1\n");
        CHECK_THROWS_AS(read_sample_csv(in, basic_map(), {}), ValidationError);
    }
    SUBCASE("single instrument value") {
        std::istringstream in("y,d,z,x\n1,0,1,1\n2,1,1,1\n");
        CHECK_THROWS_AS(read_sample_csv(in, basic_map(), {}), ValidationError);
    }
    SUBCASE("missing file names the path") {
        try {
            load_sample("/nonexistent/file.csv", basic_map(), {});
            FAIL("expected an input error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("/nonexistent/file.csv") != std::string::npos);
        }
    }
}

TEST_CASE("CSV round trip is exact") {
    const Sample s = test::mixed_sample(500, 3);
    std::stringstream buf;
    write_sample_csv(buf, s);
    const Sample t = read_sample_csv(buf, basic_map(), {});
    CHECK(std::equal(s.y().begin(), s.y().end(), t.y().begin()));
    CHECK(std::equal(s.d().begin(), s.d().end(), t.d().begin()));
    CHECK(std::equal(s.z().begin(), s.z().end(), t.z().begin()));
}

TEST_CASE("cells: constant covariate gives one cell with share 1") {
    const Sample s({1, 2, 3, 4}, {0, 1, 1, 0}, {1, 1, 0, 0}, {"x"}, {{5, 5, 5, 5}});
    const CellTable t = build_cells(s, s.covariate_names());
    REQUIRE(t.cells.size() == 1);
    CHECK(t.cells[0].share == 1.0);
    CHECK(t.cells[0].mean_y_z1 == doctest::Approx(1.5));
    CHECK(t.cells[0].mean_d_z0 == doctest::Approx(0.5));
    CHECK(t.cells[0].var_z == doctest::Approx(0.25));
}

TEST_CASE("cells: restriction to min_n with sizes 3, 5, 7") {
    std::vector<double> y;
    std::vector<std::uint8_t> d, z;
    std::vector<std::int64_t> x;
    for (const auto& [key, size] : std::vector<std::pair<int, int>>{{0, 3}, {1, 5}, {2, 7}}) {
        for (int i = 0; i < size; ++i) {
            y.push_back(i);
            d.push_back(static_cast<std::uint8_t>(i % 2));
            z.push_back(static_cast<std::uint8_t>((i / 2) % 2));
            x.push_back(key);
        }
    }
    const Sample s(y, d, z, {"x"}, {x});
    const CellTable t = build_cells(s, s.covariate_names());
    const auto r = restrict_cells(t, 5);
    REQUIRE(r.table.cells.size() == 2);
    REQUIRE(r.dropped.size() == 1);
    CHECK(r.dropped[0].n == 3);
    CHECK(r.table.cells[0].share == doctest::Approx(5.0 / 12.0));
    CHECK(r.table.cells[1].share == doctest::Approx(7.0 / 12.0));
    CHECK(r.table.total_n == 12);
    CHECK(retain_rows(s, r.table).size() == 12);

    const auto same = restrict_cells(t, 1);
    CHECK(same.table.cells.size() == t.cells.size());
    CHECK(same.dropped.empty());
    CHECK_THROWS_AS(restrict_cells(t, 100), DegenerateEstimandError);
    CHECK_THROWS_AS(restrict_cells(t, 0), InputError);
}

TEST_CASE("cells: sorted keys, shares sum to one, permutation invariance") {
    const Sample s = test::mixed_sample(3000, 11);
    const CellTable t = build_cells(s, s.covariate_names());
    double total = 0.0;
    for (const auto& c : t.cells) total += c.share;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::is_sorted(t.cells.begin(), t.cells.end(), [](const Cell& a, const Cell& b) { return a.key < b.key; }));

    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[0], perm[perm.size() / 2]);
    const CellTable u = build_cells(s.take(perm), s.covariate_names());
    REQUIRE(u.cells.size() == t.cells.size());
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
        CHECK(u.cells[c].key == t.cells[c].key);
        CHECK(u.cells[c].n_z1 == t.cells[c].n_z1);
        CHECK(test::near(u.cells[c].mean_y_z1, t.cells[c].mean_y_z1, 1e-12));
        CHECK(test::near(u.cells[c].mean_y_z0, t.cells[c].mean_y_z0, 1e-12));
        CHECK(test::near(u.cells[c].mean_d_z1, t.cells[c].mean_d_z1, 1e-12));
    }
}

TEST_CASE("cells: unidentified cells are kept and flagged") {
    const Sample s({1, 2, 3, 4, 5}, {0, 1, 1, 0, 1}, {1, 0, 1, 0, 1}, {"x"}, {{0, 0, 1, 1, 2}});
    const CellTable t = build_cells(s, s.covariate_names());
    REQUIRE(t.cells.size() == 3);
    CHECK(t.unidentified_count() == 1);
    CHECK_FALSE(t.cells[2].identified());
}

TEST_CASE("cells: means of a large draw match the population within 3 standard errors") {
    std::vector<PopCell> cells;
    for (int k = 0; k < 8; ++k) {
        cells.push_back(test::pop_cell(k, 0.125, 0.2 + 0.08 * k, 0.3 + 0.02 * k, 0.0, 0.1, 0.5 * k, 0.2 * k, 1.0));
    }
    const DgpSpec dgp = test::dgp_of(cells);
    const Sample s = draw_sample(dgp, 200000, 99);
    const CellTable t = build_cells(s, s.covariate_names());
    REQUIRE(t.cells.size() == 8);
    for (std::size_t k = 0; k < 8; ++k) {
        const PopCell& pc = dgp.cells[k];
        const Cell& c = t.cells[k];
        const double p = pc.mass;
        CHECK(std::abs(c.share - p) <= 3.0 * std::sqrt(p * (1 - p) / 200000.0));
        const double pd = pc.p_treated(1);
        CHECK(std::abs(c.mean_d_z1 - pd) <= 3.0 * std::sqrt(pd * (1 - pd) / static_cast<double>(c.n_z1)));
        // Outcome variance: noise plus the spread of stratum means.
        double m2 = 0.0;
        for (std::size_t st = 0; st < 4; ++st) {
            const int dd = st == kAlways ? 1 : (st == kNever ? 0 : (st == kComplier ? 1 : 0));
            m2 += pc.shares[st] * std::pow(pc.means[st][static_cast<std::size_t>(dd)], 2);
        }
        const double var_y = pc.noise_sd * pc.noise_sd + m2 - std::pow(pc.mean_y(1), 2);
        CHECK(std::abs(c.mean_y_z1 - pc.mean_y(1)) <= 3.0 * std::sqrt(var_y / static_cast<double>(c.n_z1)));
    }
}
