#include "ivlate/weights.hpp"

#include "ivlate/error.hpp"

#include <cmath>

namespace ivlate {

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
    case Scheme::IV: return "w_iv";
    case Scheme::Tsls: return "w_2sls";
    case Scheme::RIV: return "w_riv";
    case Scheme::Late: return "w_late";
    }
    return "?";
}

double WeightTable::dot(Scheme s) const {
    double acc = 0.0;
    for (const auto& r : rows) {
        if (r.beta_hat) acc += r.w(s) * *r.beta_hat;
    }
    return acc;
}

double WeightTable::weight_sum(Scheme s) const {
    double acc = 0.0;
    for (const auto& r : rows) acc += r.w(s);
    return acc;
}

WeightTable weight_table(const CellTable& table, const CellEstimates& est) {
    if (est.cells.size() != table.cells.size()) throw InputError("cell estimates do not match the cell table");
    WeightTable wt;
    wt.covariates = table.covariates;
    wt.warnings = est.warnings;
    wt.rows.reserve(table.cells.size());
    for (std::size_t c = 0; c < table.cells.size(); ++c) {
        const Cell& cell = table.cells[c];
        const CellEstimate& ce = est.cells[c];
        WeightRow r;
        r.key = cell.key;
        r.n = cell.n;
        r.share = cell.share;
        r.var_z = cell.var_z;
        r.e_hat = ce.e_hat;
        r.omega_hat = ce.omega_hat;
        r.beta_hat = ce.beta_hat;
        if (ce.beta_hat) {
            const double sv = cell.share * cell.var_z;
            r.raw = {sv * ce.omega_hat, sv * ce.omega_hat * ce.omega_hat, sv * std::abs(ce.omega_hat),
                     cell.share * std::abs(ce.omega_hat)};
            for (std::size_t s = 0; s < 4; ++s) wt.raw_total[s] += r.raw[s];
        }
        wt.rows.push_back(std::move(r));
    }
    for (std::size_t s = 0; s < 4; ++s) {
        if (wt.raw_total[s] == 0.0 || !std::isfinite(wt.raw_total[s])) {
            throw DegenerateEstimandError(std::string("weights ") + std::string(to_string(static_cast<Scheme>(s))) +
                                          " have a zero normalizing sum (no first stage)");
        }
    }
    for (auto& r : wt.rows) {
        for (std::size_t s = 0; s < 4; ++s) r.weight[s] = r.raw[s] / wt.raw_total[s];
    }
    return wt;
}

NegativeWeightReport negative_weight_report(const WeightTable& wt) {
    NegativeWeightReport rep;
    rep.cells = wt.rows.size();
    double num_pos = 0.0, den_pos = 0.0, num_neg = 0.0, den_neg = 0.0;
    double vnum_pos = 0.0, vden_pos = 0.0, vnum_neg = 0.0, vden_neg = 0.0;
    for (const auto& r : wt.rows) {
        const bool negative = r.omega_hat < 0.0;
        if (negative) {
            ++rep.negative_cells;
            rep.negative_obs_share += r.share;
        }
        const double wiv = r.w(Scheme::IV);
        if (wiv > 0.0) rep.positive_w_iv_sum += wiv;
        if (wiv < 0.0) rep.negative_w_iv_sum += wiv;
        if (!r.beta_hat) continue;
        const double w = r.share * std::abs(r.omega_hat);
        const double vw = w * r.var_z;
        if (negative) {
            num_neg += w * *r.beta_hat;
            den_neg += w;
            vnum_neg += vw * *r.beta_hat;
            vden_neg += vw;
        } else {
            num_pos += w * *r.beta_hat;
            den_pos += w;
            vnum_pos += vw * *r.beta_hat;
            vden_pos += vw;
        }
    }
    if (den_pos > 0.0) rep.mean_beta_positive = num_pos / den_pos;
    if (den_neg > 0.0) rep.mean_beta_negative = num_neg / den_neg;
    if (vden_pos > 0.0) rep.var_mean_beta_positive = vnum_pos / vden_pos;
    if (vden_neg > 0.0) rep.var_mean_beta_negative = vnum_neg / vden_neg;
    return rep;
}

} // namespace ivlate
