#include "ivlate/montecarlo.hpp"

#include "ivlate/error.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/population.hpp"

#include <cmath>
#include <limits>

namespace ivlate {

namespace {

constexpr std::size_t kEstimators = 4;
constexpr const char* kNames[kEstimators] = {"iv", "2sls-interacted", "riv", "late-np"};

std::vector<double> one_seed(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    try {
        // The outer loop is already parallel, so draw this sample serially.
        return sample_estimates(draw_sample_serial(dgp, n, seed));
    } catch (const Error&) {
        return std::vector<double>(kEstimators, std::numeric_limits<double>::quiet_NaN());
    }
}

McResult summarize(const DgpSpec& dgp, std::size_t n, const std::vector<double>& buf, std::size_t seeds) {
    const PopulationEstimands p = population_estimands(dgp);
    const std::optional<double> truth[kEstimators] = {p.beta_iv.direct, p.beta_2sls.direct, p.beta_riv.direct,
                                                      p.tau_late.direct};
    McResult out;
    out.dgp = dgp.name;
    out.n = n;
    for (std::size_t j = 0; j < kEstimators; ++j) {
        McSummary s;
        s.estimator = kNames[j];
        s.population = truth[j].value_or(std::numeric_limits<double>::quiet_NaN());
        double sum = 0.0;
        for (std::size_t r = 0; r < seeds; ++r) {
            const double v = buf[r * kEstimators + j];
            if (std::isfinite(v)) {
                sum += v;
                ++s.seeds;
            }
        }
        s.failures = seeds - s.seeds;
        s.mean = s.seeds ? sum / static_cast<double>(s.seeds) : std::numeric_limits<double>::quiet_NaN();
        double ss = 0.0;
        for (std::size_t r = 0; r < seeds; ++r) {
            const double v = buf[r * kEstimators + j];
            if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
        }
        s.sd = s.seeds > 1 ? std::sqrt(ss / static_cast<double>(s.seeds - 1)) : std::numeric_limits<double>::quiet_NaN();
        out.estimators.push_back(s);
    }
    return out;
}

} // namespace

double McSummary::mc_se() const { return sd / std::sqrt(static_cast<double>(seeds)); }

bool McSummary::consistent(double k) const {
    if (seeds < 2 || !std::isfinite(population)) return false;
    return std::abs(mean - population) <= k * mc_se();
}

std::vector<double> sample_estimates(const Sample& sample) {
    std::vector<std::string> covs = sample.covariate_names();
    const CellTable table = build_cells(sample, covs);
    const CellEstimates est = cell_estimates(table);
    ControlSpec controls;
    controls.saturated = covs;
    return {estimate_beta_iv(sample, controls).estimate, estimate_beta_2sls_interacted(sample, table).estimate,
            estimate_beta_riv(sample, table).estimate, estimate_tau_late(table, est).estimate};
}

McResult run_monte_carlo(const DgpSpec& dgp, std::size_t n, std::size_t seeds, std::uint64_t base_seed) {
    validate(dgp);
    std::vector<double> buf(seeds * kEstimators);
    const auto count = static_cast<std::ptrdiff_t>(seeds);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
        const auto u = static_cast<std::size_t>(r);
        const auto v = one_seed(dgp, n, base_seed + u);
        for (std::size_t j = 0; j < kEstimators; ++j) buf[u * kEstimators + j] = v[j];
    }
    return summarize(dgp, n, buf, seeds);
}

McResult run_monte_carlo_serial(const DgpSpec& dgp, std::size_t n, std::size_t seeds, std::uint64_t base_seed) {
    validate(dgp);
    std::vector<double> buf(seeds * kEstimators);
    for (std::size_t r = 0; r < seeds; ++r) {
        const auto v = one_seed(dgp, n, base_seed + r);
        for (std::size_t j = 0; j < kEstimators; ++j) buf[r * kEstimators + j] = v[j];
    }
    return summarize(dgp, n, buf, seeds);
}

} // namespace ivlate
