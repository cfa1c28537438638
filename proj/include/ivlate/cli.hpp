#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ivlate::cli {

enum ExitCode : int { kOk = 0, kEstimationFailure = 1, kInputError = 2 };

/// Resolved settings of one run. Every field is echoed into the report.
struct RunConfig {
    std::string command;
    std::string data;
    std::string outcome = "y";
    std::string treatment = "d";
    std::string instrument = "z";
    std::string treatment_rule;  // e.g. ">12"; empty means the column is already 0/1
    std::string instrument_rule;
    std::vector<std::string> covariates;
    std::vector<std::string> linear_controls; // when set, iv uses these instead of cell indicators
    std::vector<std::string> methods{"iv", "2sls-interacted", "riv", "late-np"};
    std::size_t min_cell_n = 5;
    std::size_t boot_reps = 1000;
    std::uint64_t seed = 1;
    std::string format = "json";
    std::string solver = "auto";
    char delimiter = ',';
    std::vector<std::string> dgp;
    std::size_t n = 10000;
    std::string out;
    double tol = 1e-10;
    std::size_t sweep_points = 25;
    double theta_lo = 0.05;
    double theta_hi = 0.95;

    std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Parses argv (subcommand first, then flags; `--config FILE` supplies flat key = value
/// defaults with the same names as the long flags) and runs the command.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ivlate::cli
