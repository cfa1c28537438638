#include "ivlate/estimators.hpp"

#include "ivlate/absorbed.hpp"
#include "ivlate/error.hpp"
#include "ivlate/projection.hpp"

#include <cmath>
#include <sstream>

namespace ivlate {

namespace {

std::string key_text(const CovariateKey& key) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < key.size(); ++i) os << (i ? "," : "") << key[i];
    os << ')';
    return os.str();
}

bool table_matches(const Sample& sample, const CellTable& table) {
    return table.row_cell.size() == sample.size();
}

bool has_dropped_rows(const CellTable& table) {
    for (const auto c : table.row_cell) {
        if (c == CellTable::npos) return true;
    }
    return false;
}

// Rows of `sample` kept by `table`, and the table rebuilt over them so that row_cell is dense.
struct Aligned {
    Sample sample;
    CellTable table;
};

Aligned align(const Sample& sample, const CellTable& table) {
    if (!table_matches(sample, table)) throw InputError("cell table was not built from this sample");
    if (!has_dropped_rows(table)) return {sample, table};
    Sample kept = retain_rows(sample, table);
    CellTable rebuilt = build_cells(kept, table.covariates);
    return {std::move(kept), std::move(rebuilt)};
}

Eigen::MatrixXd cell_indicators(const CellTable& table) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.row_cell.size()),
                                              static_cast<Eigen::Index>(table.cells.size()));
    for (std::size_t i = 0; i < table.row_cell.size(); ++i) {
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(table.row_cell[i])) = 1.0;
    }
    return g;
}

Eigen::VectorXd to_vector(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd to_vector(std::span<const std::uint8_t> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

Eigen::VectorXd linear_column(const Sample& sample, const std::string& name) {
    if (sample.has_control(name)) return to_vector(sample.control(name));
    if (sample.has_covariate(name)) {
        const auto col = sample.covariate(name);
        Eigen::VectorXd out(static_cast<Eigen::Index>(col.size()));
        for (std::size_t i = 0; i < col.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<double>(col[i]);
        return out;
    }
    throw SchemaError("unknown control column '" + name + "'");
}

EstimateResult from_fit(Method method, const FitResult& fit, std::optional<double> f) {
    EstimateResult r;
    r.method = method;
    r.estimate = *fit.coefficient(0);
    r.se = fit.standard_error(0);
    r.robust_f = f;
    r.n = static_cast<std::size_t>(fit.n);
    return r;
}

EstimateResult from_fit(Method method, const AbsorbedFit& fit) {
    EstimateResult r;
    r.method = method;
    r.estimate = fit.coefficient;
    r.se = fit.se;
    r.robust_f = fit.robust_f;
    r.n = fit.n;
    if (!fit.robust_f) r.warnings.push_back("robust first-stage F is undefined (singular first-stage covariance)");
    return r;
}

std::optional<double> try_first_stage_f(const DesignMatrices& dm, std::vector<std::string>& warnings) {
    try {
        return first_stage_f(dm);
    } catch (const SingularityError& e) {
        warnings.push_back(std::string("robust first-stage F is undefined: ") + e.what());
        return std::nullopt;
    }
}

void require_identified(const CellTable& table) {
    for (const auto& c : table.cells) {
        if (!c.identified()) {
            throw PreconditionError("cell " + key_text(c.key) +
                                    " has only one instrument value; restrict cells first (e.g. --min-cell-n)");
        }
    }
}

} // namespace

std::size_t CellEstimates::excluded_count() const {
    std::size_t k = 0;
    for (const auto& c : cells) k += c.beta_hat ? 0 : 1;
    return k;
}

CellEstimates cell_estimates(const CellTable& table) {
    require_identified(table);
    CellEstimates out;
    out.cells.reserve(table.cells.size());
    for (const auto& c : table.cells) {
        CellEstimate ce;
        ce.omega_hat = c.mean_d_z1 - c.mean_d_z0;
        ce.reduced_form = c.mean_y_z1 - c.mean_y_z0;
        ce.e_hat = c.e_hat();
        if (std::abs(ce.omega_hat) >= kWaldFloor) {
            ce.beta_hat = ce.reduced_form / ce.omega_hat;
        } else {
            out.warnings.push_back("cell " + key_text(c.key) + " has a zero first stage; its Wald ratio is undefined");
        }
        out.cells.push_back(ce);
    }
    return out;
}

std::string_view to_string(Method method) {
    switch (method) {
    case Method::IV: return "iv";
    case Method::TslsInteracted: return "2sls-interacted";
    case Method::RIV: return "riv";
    case Method::LateNp: return "late-np";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view text) {
    for (const Method m : {Method::IV, Method::TslsInteracted, Method::RIV, Method::LateNp}) {
        if (text == to_string(m)) return m;
    }
    return std::nullopt;
}

EstimateResult estimate_beta_iv(const Sample& sample, const ControlSpec& controls, SolverPath path) {
    if (path == SolverPath::Absorbed && !controls.linear.empty()) {
        throw InputError("the absorbed solver only handles saturated controls");
    }
    const CellTable table = build_cells(sample, controls.saturated);
    const bool absorbed = path == SolverPath::Absorbed || (path == SolverPath::Auto && controls.linear.empty());
    if (absorbed) {
        const auto fit = absorbed_iv(sample.y(), sample.d(), sample.z(), table.row_cell, table.cells.size());
        return from_fit(Method::IV, fit);
    }

    DesignMatrices dm;
    dm.y = to_vector(sample.y());
    dm.endogenous = to_vector(sample.d());
    dm.excluded = to_vector(sample.z());
    const Eigen::MatrixXd g = cell_indicators(table);
    dm.controls.resize(g.rows(), g.cols() + static_cast<Eigen::Index>(controls.linear.size()));
    dm.controls.leftCols(g.cols()) = g;
    for (std::size_t j = 0; j < controls.linear.size(); ++j) {
        dm.controls.col(g.cols() + static_cast<Eigen::Index>(j)) = linear_column(sample, controls.linear[j]);
    }
    const FitResult fit = iv_just_identified(dm);
    EstimateResult r;
    auto f = try_first_stage_f(dm, r.warnings);
    auto out = from_fit(Method::IV, fit, f);
    out.warnings = std::move(r.warnings);
    if (!fit.dropped.empty()) {
        out.warnings.push_back(std::to_string(fit.dropped.size()) + " collinear control column(s) dropped");
    }
    return out;
}

EstimateResult estimate_beta_2sls_interacted(const Sample& sample, const CellTable& table, SolverPath path) {
    const auto [s, t] = align(sample, table);
    require_identified(t);
    if (path != SolverPath::Dense) {
        return from_fit(Method::TslsInteracted,
                        absorbed_tsls_interacted(s.y(), s.d(), s.z(), t.row_cell, t.cells.size()));
    }
    DesignMatrices dm;
    dm.y = to_vector(s.y());
    dm.endogenous = to_vector(s.d());
    dm.controls = cell_indicators(t);
    dm.excluded = dm.controls.array().colwise() * to_vector(s.z()).array();
    const FitResult fit = tsls(dm);
    std::vector<std::string> warnings;
    auto f = try_first_stage_f(dm, warnings);
    auto out = from_fit(Method::TslsInteracted, fit, f);
    out.warnings = std::move(warnings);
    return out;
}

Sample reorder_instrument(const Sample& sample, const CellTable& table, const CellEstimates& est) {
    if (!table_matches(sample, table)) throw InputError("cell table was not built from this sample");
    if (est.cells.size() != table.cells.size()) throw InputError("cell estimates do not match the cell table");
    const auto z = sample.z();
    std::vector<std::uint8_t> zr(z.begin(), z.end());
    for (std::size_t i = 0; i < zr.size(); ++i) {
        const std::size_t c = table.row_cell[i];
        if (c != CellTable::npos && est.cells[c].omega_hat < 0.0) zr[i] = static_cast<std::uint8_t>(1 - zr[i]);
    }
    return sample.with_instrument(std::move(zr));
}

EstimateResult estimate_beta_riv(const Sample& sample, const CellTable& table, SolverPath path) {
    const auto [s, t] = align(sample, table);
    const CellEstimates est = cell_estimates(t);
    const Sample reordered = reorder_instrument(s, t, est);

    double negative_share = 0.0;
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
        if (est.cells[c].omega_hat < 0.0) negative_share += t.cells[c].share;
    }
    ControlSpec controls;
    controls.saturated = t.covariates;
    EstimateResult out = estimate_beta_iv(reordered, controls, path);
    out.method = Method::RIV;
    out.negative_weight_share = negative_share;
    out.warnings.insert(out.warnings.begin(), est.warnings.begin(), est.warnings.end());
    return out;
}

EstimateResult estimate_tau_late(const CellTable& table, const CellEstimates& est) {
    if (est.cells.size() != table.cells.size()) throw InputError("cell estimates do not match the cell table");
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < table.cells.size(); ++c) {
        const auto& ce = est.cells[c];
        if (!ce.beta_hat) continue;
        const double w = table.cells[c].share * std::abs(ce.omega_hat);
        num += w * *ce.beta_hat;
        den += w;
    }
    if (!(den > 0.0)) throw DegenerateEstimandError("every cell has a zero first stage; LATE is undefined");
    EstimateResult r;
    r.method = Method::LateNp;
    r.estimate = num / den;
    r.n = table.total_n;
    r.warnings = est.warnings;
    return r;
}

} // namespace ivlate
