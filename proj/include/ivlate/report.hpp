#pragma once

#include "ivlate/decomposition.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/verify.hpp"
#include "ivlate/weights.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ivlate {

/// A report cell. Empty means "not available".
using Value = std::variant<std::monostate, double, std::int64_t, std::string, bool>;

Value value_of(const std::optional<double>& v);

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Value>> rows;

    void add(std::vector<Value> row);
};

/// Everything a command prints. `config` holds the fully resolved settings so a run can be repeated.
struct Report {
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> notes;
    std::vector<Table> tables;

    const Table* find(const std::string& name) const;
};

/// Six significant digits, as used in TSV output.
std::string format_number(double v);

/// Doubles at full round-trip precision.
void write_json(std::ostream& out, const Report& report);
/// Config and notes as '#' lines, then each table under a "## name" line.
void write_tsv(std::ostream& out, const Report& report);

std::string key_string(const CovariateKey& key);

Table estimates_table(std::span<const EstimateResult> results, std::span<const std::string> se_types);
Table weight_rows_table(const WeightTable& wt);
Table negative_weight_table(const NegativeWeightReport& rep);
Table decomposition_table(const Decomposition& dec, const std::vector<std::optional<double>>& se = {});
Table sweep_table(const SweepCurve& curve);
Table identity_table(const IdentityReport& report);

/// Row order of decomposition_table, for callers that attach bootstrap SEs.
std::vector<std::string> decomposition_fields();
std::vector<double> decomposition_values(const Decomposition& dec);

} // namespace ivlate
