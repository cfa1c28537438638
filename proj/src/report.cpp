#include "ivlate/report.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace ivlate {

using ojson = nlohmann::ordered_json;

namespace {

ojson to_json(const Value& v) {
    return std::visit(
        [](const auto& x) -> ojson {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return nullptr;
            } else if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(x)) return nullptr;
                return x;
            } else {
                return x;
            }
        },
        v);
}

std::string to_tsv(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                return "NA";
            } else if constexpr (std::is_same_v<T, double>) {
                return std::isfinite(x) ? format_number(x) : "NA";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else {
                return x;
            }
        },
        v);
}

Value count(std::size_t n) { return static_cast<std::int64_t>(n); }

} // namespace

Value value_of(const std::optional<double>& v) { return v ? Value(*v) : Value(); }

void Table::add(std::vector<Value> row) {
    row.resize(columns.size());
    rows.push_back(std::move(row));
}

const Table* Report::find(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_json(std::ostream& out, const Report& report) {
    ojson j;
    j["command"] = report.command;
    j["config"] = ojson::object();
    for (const auto& [k, v] : report.config) j["config"][k] = v;
    j["notes"] = report.notes;
    j["tables"] = ojson::object();
    for (const auto& t : report.tables) {
        ojson rows = ojson::array();
        for (const auto& r : t.rows) {
            ojson row = ojson::object();
            for (std::size_t c = 0; c < t.columns.size(); ++c) row[t.columns[c]] = to_json(r[c]);
            rows.push_back(std::move(row));
        }
        j["tables"][t.name] = std::move(rows);
    }
    out << j.dump(2) << '\n';
}

void write_tsv(std::ostream& out, const Report& report) {
    out << "# command\t" << report.command << '\n';
    for (const auto& [k, v] : report.config) out << "# config\t" << k << '\t' << v << '\n';
    for (const auto& n : report.notes) out << "# note\t" << n << '\n';
    for (const auto& t : report.tables) {
        out << "## " << t.name << '\n';
        for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "\t" : "") << t.columns[c];
        out << '\n';
        for (const auto& r : t.rows) {
            for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "\t" : "") << to_tsv(r[c]);
            out << '\n';
        }
    }
}

std::string key_string(const CovariateKey& key) {
    std::string s;
    for (std::size_t i = 0; i < key.size(); ++i) s += (i ? "," : "") + std::to_string(key[i]);
    return s.empty() ? "()" : s;
}

Table estimates_table(std::span<const EstimateResult> results, std::span<const std::string> se_types) {
    Table t{"estimates", {"method", "estimate", "se", "se_type", "robust_f", "n", "negative_weight_share"}, {}};
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        t.add({std::string(to_string(r.method)), r.estimate, value_of(r.se),
               i < se_types.size() && r.se ? Value(se_types[i]) : Value(), value_of(r.robust_f), count(r.n),
               value_of(r.negative_weight_share)});
    }
    return t;
}

Table weight_rows_table(const WeightTable& wt) {
    Table t{"weights",
            {"cell", "n", "share", "var_z", "omega_hat", "beta_hat", "w_iv", "w_2sls", "w_riv", "w_late", "raw_iv",
             "raw_2sls", "raw_riv", "raw_late"},
            {}};
    for (const auto& r : wt.rows) {
        t.add({key_string(r.key), count(r.n), r.share, r.var_z, r.omega_hat, value_of(r.beta_hat), r.weight[0],
               r.weight[1], r.weight[2], r.weight[3], r.raw[0], r.raw[1], r.raw[2], r.raw[3]});
    }
    return t;
}

Table negative_weight_table(const NegativeWeightReport& rep) {
    Table t{"negative_weights", {"quantity", "value"}, {}};
    t.add({std::string("cells"), count(rep.cells)});
    t.add({std::string("negative_cells"), count(rep.negative_cells)});
    t.add({std::string("negative_obs_share"), rep.negative_obs_share});
    t.add({std::string("mean_beta_positive"), value_of(rep.mean_beta_positive)});
    t.add({std::string("mean_beta_negative"), value_of(rep.mean_beta_negative)});
    t.add({std::string("var_weighted_mean_beta_positive"), value_of(rep.var_mean_beta_positive)});
    t.add({std::string("var_weighted_mean_beta_negative"), value_of(rep.var_mean_beta_negative)});
    t.add({std::string("positive_w_iv_sum"), rep.positive_w_iv_sum});
    t.add({std::string("negative_w_iv_sum"), rep.negative_w_iv_sum});
    return t;
}

std::vector<std::string> decomposition_fields() {
    return {"theta",    "pi1",      "pi0",          "tau_latt",    "tau_latu",    "w_latt",      "w_latu",
            "lambda",   "var_e_z1", "var_e_z0",     "beta_riv",    "tau_late",    "desired_w_latt",
            "w_latt_equal_variance", "pi1_np", "pi0_np", "tau_latt_np", "tau_latu_np"};
}

std::vector<double> decomposition_values(const Decomposition& d) {
    return {d.theta,    d.pi1,      d.pi0,      d.tau_latt, d.tau_latu, d.w_latt,         d.w_latu,
            d.lambda,   d.var_e_z1, d.var_e_z0, d.beta_reconstructed, d.tau_late, d.desired_w_latt,
            d.w_latt_equal_variance, d.pi1_np, d.pi0_np, d.tau_latt_np, d.tau_latu_np};
}

Table decomposition_table(const Decomposition& dec, const std::vector<std::optional<double>>& se) {
    Table t{"decomposition", {"quantity", "estimate", "bootstrap_se"}, {}};
    const auto names = decomposition_fields();
    const auto values = decomposition_values(dec);
    for (std::size_t i = 0; i < names.size(); ++i) {
        t.add({names[i], values[i], i < se.size() ? value_of(se[i]) : Value()});
    }
    return t;
}

Table sweep_table(const SweepCurve& curve) {
    Table t{"sweep", {"theta", "lambda", "w", "beta_riv", "tau_late", "tau_latt", "tau_latu"}, {}};
    for (const auto& p : curve.points) {
        t.add({p.theta, value_of(p.lambda), p.w, p.beta_riv, p.tau_late, p.tau_latt, p.tau_latu});
    }
    return t;
}

Table identity_table(const IdentityReport& report) {
    Table t{"identities", {"dgp", "identity", "status", "lhs", "rhs", "detail"}, {}};
    for (const auto& c : report.checks) {
        const bool has_values = c.status != CheckStatus::Skipped;
        t.add({report.dgp_name, c.name, std::string(to_string(c.status)), has_values ? Value(c.lhs) : Value(),
               has_values ? Value(c.rhs) : Value(), c.detail});
    }
    return t;
}

} // namespace ivlate
