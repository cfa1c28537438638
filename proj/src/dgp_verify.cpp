#include "ivlate/verify.hpp"

#include "ivlate/decomposition.hpp"

#include <algorithm>
#include <cmath>

namespace ivlate {

namespace {

class Checker {
public:
    explicit Checker(IdentityReport& report) : report_(report) {}

    void compare(const std::string& name, std::optional<double> lhs, std::optional<double> rhs,
                 const std::string& undefined_reason = "estimand undefined for this population") {
        if (!lhs || !rhs) {
            skip(name, undefined_reason);
            return;
        }
        IdentityCheck c{name, close_enough(*lhs, *rhs, report_.tol) ? CheckStatus::Pass : CheckStatus::Fail, *lhs, *rhs,
                        ""};
        report_.checks.push_back(std::move(c));
    }

    void truth(const std::string& name, bool ok, double lhs, double rhs, const std::string& detail = "") {
        report_.checks.push_back({name, ok ? CheckStatus::Pass : CheckStatus::Fail, lhs, rhs, detail});
    }

    void skip(const std::string& name, const std::string& reason) {
        report_.checks.push_back({name, CheckStatus::Skipped, 0.0, 0.0, reason});
    }

private:
    IdentityReport& report_;
};

std::optional<double> sum(std::optional<double> a, std::optional<double> b) {
    if (!a || !b) return std::nullopt;
    return *a + *b;
}

} // namespace

std::string_view to_string(CheckStatus status) {
    switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Skipped: return "skipped";
    }
    return "?";
}

bool IdentityReport::all_passed() const { return count(CheckStatus::Fail) == 0; }

std::size_t IdentityReport::count(CheckStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [status](const IdentityCheck& c) { return c.status == status; }));
}

bool close_enough(double a, double b, double tol) {
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

IdentityReport verify_identities(const DgpSpec& dgp, double tol) {
    IdentityReport report;
    report.dgp_name = dgp.name;
    report.tol = tol;
    Checker check(report);

    const PopulationEstimands p = population_estimands(dgp);
    bool cellwise_wm = true;
    for (const auto& c : dgp.cells) cellwise_wm = cellwise_wm && (c.shares[kComplier] == 0.0 || c.shares[kDefier] == 0.0);
    const std::string no_wm = "compliers and defiers coexist in a cell (weak monotonicity fails)";

    // Weighted-average representations of the three linear estimands.
    if (cellwise_wm) {
        check.compare("tsls_convex_combination", p.beta_2sls.direct, p.beta_2sls.closed);
        check.compare("iv_weighted_representation", p.beta_iv.direct, p.beta_iv.closed,
                      "IV denominator E[c*pi*Var(Z|X)] is zero");
        check.compare("riv_weighted_representation", p.beta_riv.direct, p.beta_riv.closed);
    } else {
        check.skip("tsls_convex_combination", no_wm);
        check.skip("iv_weighted_representation", no_wm);
        check.skip("riv_weighted_representation", no_wm);
    }

    if (dgp.strong_monotone()) {
        check.compare("strong_monotone_iv_form", p.beta_iv.direct, p.beta_riv.closed);
        check.compare("strong_monotone_riv_equals_iv", p.beta_riv.direct, p.beta_iv.direct);
    } else {
        check.skip("strong_monotone_iv_form", "population has defiers");
        check.skip("strong_monotone_riv_equals_iv", "population has defiers");
    }

    if (cellwise_wm && !p.iv_weights.empty()) {
        // Weights are c*pi*V over a normalizing sum that may itself be negative.
        const double den_sign = p.iv_weight_denominator > 0.0 ? 1.0 : -1.0;
        bool signs = true;
        for (std::size_t i = 0; i < dgp.cells.size(); ++i) {
            const auto& c = dgp.cells[i];
            if (c.mass > 0.0 && c.pi() > 0.0) signs = signs && ((p.iv_weights[i] * den_sign > 0.0) == (c.c() > 0));
        }
        check.truth("iv_weight_sign_matches_c", signs, den_sign, den_sign);
    } else {
        check.skip("iv_weight_sign_matches_c", cellwise_wm ? "IV estimand undefined" : no_wm);
    }

    check.compare("late_representation", p.tau_late.direct, p.tau_late.closed);
    if (cellwise_wm) {
        check.compare("pi1_representation", p.pi1.direct, p.pi1.closed);
        check.compare("pi0_representation", p.pi0.direct, p.pi0.closed);
        check.compare("latt_representation", p.tau_latt.direct, p.tau_latt.closed);
        check.compare("latu_representation", p.tau_latu.direct, p.tau_latu.closed);
    } else {
        for (const char* n : {"pi1_representation", "pi0_representation", "latt_representation", "latu_representation"}) {
            check.skip(n, no_wm);
        }
    }

    // LATE as a convex combination of LATT and LATU.
    if (p.pi1.closed && p.pi0.closed && p.tau_latt.closed && p.tau_latu.closed) {
        const double a = p.theta * *p.pi1.closed, b = (1.0 - p.theta) * *p.pi0.closed;
        const double rhs = (a * *p.tau_latt.closed + b * *p.tau_latu.closed) / (a + b);
        check.compare("late_convex_latt_latu", p.tau_late.closed, rhs);
    } else {
        check.skip("late_convex_latt_latu", "complier share is zero in one instrument arm");
    }

    check.compare("variance_weighting_lemma_first_stage", p.first_stage_coef.direct, p.first_stage_coef.closed);
    check.compare("variance_weighting_lemma_reduced_form", p.reduced_form_coef.direct, p.reduced_form_coef.closed);
    check.compare("projection_decomposition_lemma", p.beta_riv.direct, p.beta_reconstructed_proj,
                  "within-arm projections leave no complier share in one arm");

    // Reversed weights and the bias formula need the reordered e(X) to take exactly two values.
    const DgpSpec reordered = reorder_instrument(dgp);
    const bool two_point = reordered.distinct_e() == 2;
    const std::string not_two_point = "reordered e(X) does not take exactly two values, so linearity in e(X) is not guaranteed";
    const bool applicable = two_point && cellwise_wm && p.w_latt && p.tau_latt.closed && p.tau_latu.closed;
    if (applicable) {
        const double w = *p.w_latt;
        check.compare("reversed_weights", p.beta_riv.direct, w * *p.tau_latt.closed + (1.0 - w) * *p.tau_latu.closed);
        const double gap = *p.tau_latt.closed - *p.tau_latu.closed;
        check.compare("bias_decomposition", sum(p.beta_riv.direct, -*p.tau_late.closed), *p.lambda * gap);
    } else {
        check.skip("reversed_weights", two_point ? "decomposition undefined" : not_two_point);
        check.skip("bias_decomposition", two_point ? "decomposition undefined" : not_two_point);
    }

    const bool equal_var = applicable && close_enough(p.var_e_z1, p.var_e_z0, tol);
    if (equal_var) {
        check.compare("equal_variance_lambda", p.lambda, p.lambda_equal_variance);
        const double bias = *p.beta_riv.direct - *p.tau_late.closed;
        const bool estimand_equal = close_enough(*p.beta_riv.direct, *p.tau_late.closed, tol);
        const bool condition = close_enough(p.theta, 0.5, tol) || close_enough(*p.tau_latt.closed, *p.tau_latu.closed, tol);
        if (condition) {
            check.truth("equal_variance_sufficiency", estimand_equal, *p.beta_riv.direct, *p.tau_late.closed,
                        "theta = 0.5 or LATT = LATU implies IV = LATE");
        } else {
            check.skip("equal_variance_sufficiency", "neither theta = 0.5 nor LATT = LATU");
        }
        check.truth("equal_variance_necessity", estimand_equal == condition, bias, condition ? 0.0 : 1.0,
                    "IV = LATE only when theta = 0.5 or LATT = LATU");
    } else {
        const std::string reason = applicable ? "conditional variances of e(X) differ across instrument arms" : not_two_point;
        check.skip("equal_variance_lambda", reason);
        check.skip("equal_variance_sufficiency", reason);
        check.skip("equal_variance_necessity", reason);
    }

    // Relabeling the instrument leaves the four estimands unchanged.
    const PopulationEstimands q = population_estimands(relabel_instrument(dgp));
    check.compare("relabel_invariance_iv", p.beta_iv.direct, q.beta_iv.direct);
    check.compare("relabel_invariance_2sls", p.beta_2sls.direct, q.beta_2sls.direct);
    check.compare("relabel_invariance_riv", p.beta_riv.direct, q.beta_riv.direct);
    check.compare("relabel_invariance_late", p.tau_late.direct, q.tau_late.direct);
    return report;
}

} // namespace ivlate
