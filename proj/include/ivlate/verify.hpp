#pragma once

#include "ivlate/dgp.hpp"
#include "ivlate/population.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivlate {

enum class CheckStatus { Pass, Fail, Skipped };

std::string_view to_string(CheckStatus status);

struct IdentityCheck {
    std::string name;
    CheckStatus status = CheckStatus::Skipped;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string detail; // reason when skipped
};

struct IdentityReport {
    std::string dgp_name;
    double tol = 0.0;
    std::vector<IdentityCheck> checks;

    bool all_passed() const; // no failures; skipped checks are fine
    std::size_t count(CheckStatus status) const;
};

/// |a - b| <= tol * max(1, |a|, |b|).
bool close_enough(double a, double b, double tol);

/// Compares every applicable identity between the direct and closed-form population values.
/// Identities whose assumptions the DGP does not meet are skipped with a reason.
IdentityReport verify_identities(const DgpSpec& dgp, double tol = 1e-10);

// Fixture construction.

enum class Monotonicity { Strong, Weak };

struct RandomDgpOptions {
    std::size_t min_cells = 1;
    std::size_t max_cells = 8;
    Monotonicity monotonicity = Monotonicity::Strong;
    /// e(X) takes exactly two values (e_a in the first half of the cells, e_b in the rest).
    bool two_point_e = false;
    /// With two_point_e: solve the group masses so Var[e|Z=1] = Var[e|Z=0].
    bool equal_variance = false;
    /// With two_point_e: the second value is 1 - e_a, so equal variances also give theta = 0.5.
    bool symmetric_e = false;
    /// When set, every stratum in every cell has this treatment effect.
    std::optional<double> constant_effect;
    double e_lo = 0.05;
    double e_hi = 0.95;
    double min_pi = 0.05;
    double noise_sd = 1.0;
};

DgpSpec random_dgp(std::uint64_t seed, const RandomDgpOptions& options);

/// Share of total mass on the e_a group that equates Var[e(X)|Z=1] and Var[e(X)|Z=0]
/// when e(X) takes the two values e_a and e_b.
double equal_variance_mass(double e_a, double e_b);

/// Weak-monotone DGP with every tau(x) in [0.1, 2] and a negative saturated IV estimand,
/// from randomized search starting at `seed`. Throws if none is found within `max_tries`.
DgpSpec find_sign_reversal(std::uint64_t seed, std::size_t max_tries = 100000);

/// The fixed set of DGPs used for the Monte Carlo consistency checks.
std::vector<DgpSpec> monte_carlo_fixtures();

} // namespace ivlate
