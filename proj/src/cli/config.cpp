#include "ivlate/cli.hpp"

#include "ivlate/report.hpp"

#include <charconv>

namespace ivlate::cli {

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> e{
        {"data", data},
        {"outcome", outcome},
        {"treatment", treatment},
        {"instrument", instrument},
        {"treatment-rule", treatment_rule},
        {"instrument-rule", instrument_rule},
        {"covariates", join(covariates)},
        {"linear-controls", join(linear_controls)},
        {"methods", join(methods)},
        {"min-cell-n", std::to_string(min_cell_n)},
        {"boot-reps", std::to_string(boot_reps)},
        {"seed", std::to_string(seed)},
        {"format", format},
        {"solver", solver},
        {"delimiter", std::string(1, delimiter)},
        {"dgp", join(dgp)},
        {"n", std::to_string(n)},
        {"out", out},
        {"tol", num(tol)},
        {"sweep-points", std::to_string(sweep_points)},
        {"theta-lo", num(theta_lo)},
        {"theta-hi", num(theta_hi)},
    };
    return e;
}

} // namespace ivlate::cli
