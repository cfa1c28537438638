#pragma once

#include "ivlate/sample.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ivlate {

/// Principal strata by (D(0), D(1)).
enum Stratum : std::size_t { kAlways = 0, kNever = 1, kComplier = 2, kDefier = 3 };

/// One covariate value of a finite population. Potential outcomes depend on D only.
struct PopCell {
    CovariateKey key;
    double mass = 0.0;
    double e = 0.5; // P[Z=1 | X=x]
    std::array<double, 4> shares{};              // indexed by Stratum
    std::array<std::array<double, 2>, 4> means{}; // means[stratum][d] = E[Y(d) | stratum, x]
    double noise_sd = 0.0;

    double p_treated(int z) const;  // P[D=1 | Z=z, x]
    double mean_y(int z) const;     // E[Y | Z=z, x]
    double omega() const { return p_treated(1) - p_treated(0); }
    double pi() const { return shares[kComplier] + shares[kDefier]; }
    int c() const;                  // sign of compliers minus defiers
    /// Average effect among units moved by the instrument; absent when nobody is moved.
    std::optional<double> tau() const;
};

struct DgpSpec {
    std::string name;
    std::vector<std::string> covariates;
    std::vector<PopCell> cells;
    /// When set, no cell may contain both compliers and defiers.
    bool weak_monotone = true;

    bool strong_monotone() const;
    /// Number of distinct values of e(X) among cells with positive mass.
    std::size_t distinct_e(double tol = 1e-12) const;
};

/// Throws InputError describing the first violated invariant.
void validate(const DgpSpec& dgp);

/// Z -> 1 - Z: e becomes 1 - e and compliers trade places with defiers.
DgpSpec relabel_instrument(const DgpSpec& dgp);
/// Relabels the instrument in cells with more defiers than compliers.
DgpSpec reorder_instrument(const DgpSpec& dgp);

std::string dgp_to_json(const DgpSpec& dgp, int indent = 2);
DgpSpec dgp_from_json(const std::string& text);
DgpSpec load_dgp(const std::string& path);
void save_dgp(const std::string& path, const DgpSpec& dgp);

/// Rows per RNG substream in draw_sample.
inline constexpr std::size_t kDrawChunk = 4096;

/// n i.i.d. rows; chunk c of kDrawChunk rows uses substream c of `seed`, so the
/// draw is identical for any thread count. Throws ValidationError if one
/// instrument arm comes out empty.
Sample draw_sample(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);
Sample draw_sample_serial(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

} // namespace ivlate
