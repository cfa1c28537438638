#include "doctest.h"

#include "ivlate/cli.hpp"
#include "ivlate/estimators.hpp"
#include "support.hpp"

#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace ivlate;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ivlate");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("ivlate_cli_" + std::to_string(std::rand()))) { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

DgpSpec fixture() {
    return test::dgp_of({test::pop_cell(0, 0.3, 0.3, 0.5, 0.0, 0.1, 1.0, 0.0, 1.0),
                         test::pop_cell(1, 0.25, 0.6, 0.0, 0.3, 0.2, 2.0, 1.0, 1.0),
                         test::pop_cell(2, 0.25, 0.5, 0.4, 0.0, 0.3, -0.5, 0.5, 0.5),
                         test::pop_cell(3, 0.2, 0.8, 0.2, 0.0, 0.2, 0.3, 2.0, 2.0)});
}

// Rows of a "## name" block of TSV output, keyed by the first column.
std::map<std::string, std::vector<std::string>> tsv_table(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::vector<std::string>> rows;
    bool inside = false, header = false;
    while (std::getline(in, line)) {
        if (line.rfind("## ", 0) == 0) {
            inside = line == "## " + name;
            header = inside;
            continue;
        }
        if (!inside || line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, '\t')) f.push_back(cell);
        rows[f[0]] = f;
    }
    return rows;
}

std::string g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

TEST_CASE("cli: simulate then estimate reproduces the library bit for bit") {
    TempDir dir;
    save_dgp(dir.file("dgp.json"), fixture());
    const Run sim = run({"simulate", "--dgp", dir.file("dgp.json"), "--n", "4000", "--seed", "11", "--out", dir.file("s.csv")});
    REQUIRE(sim.code == 0);
    const Run est = run({"estimate", "--data", dir.file("s.csv"), "--covariates", "x", "--boot-reps", "0"});
    REQUIRE(est.code == 0);
    const json j = json::parse(est.out);

    const Sample s = draw_sample(fixture(), 4000, 11);
    const CellTable t = build_cells(s, s.covariate_names());
    const double iv = estimate_beta_iv(s, ControlSpec{{"x"}, {}}).estimate;
    const double riv = estimate_beta_riv(s, t).estimate;
    const double late = estimate_tau_late(t, cell_estimates(t)).estimate;
    std::map<std::string, double> got;
    for (const auto& row : j["tables"]["estimates"]) got[row["method"]] = row["estimate"].get<double>();
    CHECK(got.at("iv") == iv);
    CHECK(got.at("riv") == riv);
    CHECK(got.at("late-np") == late);
}

TEST_CASE("cli: JSON and TSV carry the same numbers") {
    TempDir dir;
    save_dgp(dir.file("dgp.json"), fixture());
    REQUIRE(run({"simulate", "--dgp", dir.file("dgp.json"), "--n", "3000", "--out", dir.file("s.csv")}).code == 0);
    for (const std::string cmd : {"estimate", "weights"}) {
        const Run a = run({cmd, "--data", dir.file("s.csv"), "--covariates", "x", "--boot-reps", "50"});
        const Run b = run({cmd, "--data", dir.file("s.csv"), "--covariates", "x", "--boot-reps", "50", "--format", "tsv"});
        REQUIRE(a.code == 0);
        REQUIRE(b.code == 0);
        const json j = json::parse(a.out);
        for (const auto& [name, rows] : j["tables"].items()) {
            const auto t = tsv_table(b.out, name);
            REQUIRE(t.size() == rows.size());
            for (const auto& row : rows) {
                const auto first = row.begin();
                const std::string key = first->is_string() ? first->get<std::string>() : g6(first->get<double>());
                REQUIRE(t.count(key) == 1);
                const auto& fields = t.at(key);
                std::size_t col = 0;
                for (const auto& [field, v] : row.items()) {
                    INFO(cmd << " " << name << " " << key << " " << field);
                    if (v.is_null()) CHECK(fields[col] == "NA");
                    else if (v.is_number()) CHECK(fields[col] == g6(v.get<double>()));
                    else if (v.is_string()) CHECK(fields[col] == v.get<std::string>());
                    ++col;
                }
            }
        }
    }
}

TEST_CASE("cli: exit codes") {
    TempDir dir;
    CHECK(run({"estimate", "--data", dir.file("missing.csv")}).code == cli::kInputError);
    {
        std::ofstream f(dir.file("bad.csv"));
        f << "y,d,z,x\n1,0,1,0\n2,1,0,0\n";
    }
    CHECK(run({"estimate", "--data", dir.file("bad.csv"), "--outcome", "wage"}).code == cli::kInputError);
    CHECK(run({"estimate", "--data", dir.file("bad.csv"), "--format", "xml"}).code == cli::kInputError);
    CHECK(run({"frobnicate"}).code == cli::kInputError);
    {
        std::ofstream f(dir.file("bad.ini"));
        f << "no-such-key = 3\n";
    }
    CHECK(run({"estimate", "--config", dir.file("bad.ini"), "--data", dir.file("bad.csv")}).code == cli::kInputError);

    save_dgp(dir.file("dgp.json"), fixture());
    REQUIRE(run({"simulate", "--dgp", dir.file("dgp.json"), "--n", "500", "--out", dir.file("s.csv")}).code == 0);
    const Run tiny = run({"estimate", "--data", dir.file("s.csv"), "--covariates", "x", "--min-cell-n", "100000"});
    CHECK(tiny.code == cli::kEstimationFailure);
    CHECK_FALSE(tiny.err.empty());
    // Decomposing without reordering is done automatically; a negative cell is not an error.
    CHECK(run({"decompose", "--data", dir.file("s.csv"), "--covariates", "x", "--boot-reps", "0"}).code == 0);
}

TEST_CASE("cli: config file supplies defaults that flags override") {
    TempDir dir;
    save_dgp(dir.file("dgp.json"), fixture());
    REQUIRE(run({"simulate", "--dgp", dir.file("dgp.json"), "--n", "2000", "--out", dir.file("s.csv")}).code == 0);
    {
        std::ofstream f(dir.file("run.ini"));
        f << "covariates = x\nboot-reps = 0\nmin-cell-n = 7\nmethods = iv,riv\n";
    }
    const Run a = run({"estimate", "--config", dir.file("run.ini"), "--data", dir.file("s.csv")});
    REQUIRE(a.code == 0);
    const json j = json::parse(a.out);
    CHECK(j["config"]["min-cell-n"] == "7");
    CHECK(j["config"]["covariates"] == "x");
    CHECK(j["tables"]["estimates"].size() == 2);
    const Run b = run({"estimate", "--config", dir.file("run.ini"), "--data", dir.file("s.csv"), "--min-cell-n", "9"});
    CHECK(json::parse(b.out)["config"]["min-cell-n"] == "9");
}

TEST_CASE("cli: D identical to Z passes the sign check") {
    TempDir dir;
    {
        std::ofstream f(dir.file("dz.csv"));
        f << "y,d,z,x\n";
        for (int i = 0; i < 400; ++i) {
            const int z = (i * 7 + i / 3) % 2;
            f << (i % 11) * 0.1 + z << "," << z << "," << z << "," << i % 4 << "\n";
        }
    }
    const Run r = run({"diagnose", "--data", dir.file("dz.csv"), "--covariates", "x"});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["tables"]["verdict"][0]["monotonicity_sign_check"] == "satisfied");
}

TEST_CASE("cli: verify exits zero on the default fixtures") {
    const Run r = run({"verify"});
    CHECK(r.code == 0);
    CHECK(r.out.find("\"FAIL\"") == std::string::npos);
}
