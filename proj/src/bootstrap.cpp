#include "ivlate/bootstrap.hpp"

#include "ivlate/error.hpp"
#include "ivlate/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ivlate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check(const Sample& sample, const BootstrapConfig& cfg) {
    if (cfg.replications < 2) throw InputError("bootstrap needs at least two replications");
    if (sample.size() == 0) throw InputError("bootstrap needs a non-empty sample");
}

std::vector<double> evaluate(const Sample& sample, const VectorStatistic& statistic, std::size_t dim,
                             std::uint64_t seed, std::size_t r) {
    try {
        const auto idx = bootstrap_indices(sample.size(), seed, r);
        auto v = statistic(sample.take(idx));
        if (v.size() != dim) return std::vector<double>(dim, kNaN);
        return v;
    } catch (const std::exception&) {
        return std::vector<double>(dim, kNaN);
    }
}

// Serial reduction over the indexed buffer, so the result does not depend on the schedule.
std::vector<BootstrapResult> reduce(const std::vector<double>& buf, std::size_t dim, std::size_t reps) {
    std::vector<BootstrapResult> out(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        BootstrapResult& res = out[j];
        res.replications = reps;
        double sum = 0.0;
        std::size_t ok = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double v = buf[r * dim + j];
            if (std::isfinite(v)) {
                sum += v;
                ++ok;
            }
        }
        res.failures = reps - ok;
        if (2 * res.failures > reps) {
            throw UnreliableBootstrapError(std::to_string(res.failures) + " of " + std::to_string(reps) +
                                           " bootstrap replicates failed");
        }
        if (ok < 2) throw UnreliableBootstrapError("fewer than two bootstrap replicates succeeded");
        res.mean = sum / static_cast<double>(ok);
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double v = buf[r * dim + j];
            if (std::isfinite(v)) ss += (v - res.mean) * (v - res.mean);
        }
        res.se = std::sqrt(ss / static_cast<double>(ok - 1));
    }
    return out;
}

VectorStatistic lift(const Statistic& statistic) {
    return [&statistic](const Sample& s) { return std::vector<double>{statistic(s)}; };
}

} // namespace

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t r) {
    Stream stream(seed, r);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(stream.below(n));
    return idx;
}

std::vector<BootstrapResult> bootstrap_se(const Sample& sample, const VectorStatistic& statistic, std::size_t dim,
                                          const BootstrapConfig& cfg) {
    check(sample, cfg);
    const std::size_t reps = cfg.replications;
    std::vector<double> buf(reps * dim);
    const auto count = static_cast<std::ptrdiff_t>(reps);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t r = 0; r < count; ++r) {
        const auto u = static_cast<std::size_t>(r);
        const auto v = evaluate(sample, statistic, dim, cfg.seed, u);
        std::copy(v.begin(), v.end(), buf.begin() + static_cast<std::ptrdiff_t>(u * dim));
    }
    return reduce(buf, dim, reps);
}

BootstrapResult bootstrap_se(const Sample& sample, const Statistic& statistic, const BootstrapConfig& cfg) {
    return bootstrap_se(sample, lift(statistic), 1, cfg).front();
}

BootstrapResult bootstrap_se_serial(const Sample& sample, const Statistic& statistic, const BootstrapConfig& cfg) {
    check(sample, cfg);
    const auto vs = lift(statistic);
    std::vector<double> buf(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) buf[r] = evaluate(sample, vs, 1, cfg.seed, r).front();
    return reduce(buf, 1, cfg.replications).front();
}

} // namespace ivlate
