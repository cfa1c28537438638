#include "ivlate/sample.hpp"

#include "ivlate/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ivlate {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.emplace_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.emplace_back(trim(field));
    return fields;
}

double parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = std::numeric_limits<double>::quiet_NaN();
    if (text.empty()) return value;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::numeric_limits<double>::quiet_NaN();
    return value;
}

} // namespace

BinaryRule BinaryRule::parse(std::string_view text) {
    text = trim(text);
    BinaryRule rule;
    if (text.empty() || text == "asis") return rule;
    std::string_view rest;
    if (text.starts_with(">=")) {
        rule.op = Op::GreaterEqual;
        rest = text.substr(2);
    } else if (text.starts_with("<=")) {
        rule.op = Op::LessEqual;
        rest = text.substr(2);
    } else if (text.starts_with("==")) {
        rule.op = Op::Equal;
        rest = text.substr(2);
    } else if (text.starts_with('>')) {
        rule.op = Op::Greater;
        rest = text.substr(1);
    } else if (text.starts_with('<')) {
        rule.op = Op::Less;
        rest = text.substr(1);
    } else {
        throw InputError("cannot parse binarization rule '" + std::string(text) + "'");
    }
    rule.threshold = parse_number(rest);
    if (!std::isfinite(rule.threshold)) {
        throw InputError("cannot parse threshold in binarization rule '" + std::string(text) + "'");
    }
    return rule;
}

std::string BinaryRule::to_string() const {
    std::ostringstream os;
    os << std::setprecision(17);
    switch (op) {
    case Op::AsIs: return "";
    case Op::Greater: os << '>'; break;
    case Op::GreaterEqual: os << ">="; break;
    case Op::Less: os << '<'; break;
    case Op::LessEqual: os << "<="; break;
    case Op::Equal: os << "=="; break;
    }
    os << threshold;
    return os.str();
}

int BinaryRule::apply(double value) const {
    if (!std::isfinite(value)) return -1;
    switch (op) {
    case Op::AsIs: return value == 0.0 ? 0 : (value == 1.0 ? 1 : -1);
    case Op::Greater: return value > threshold ? 1 : 0;
    case Op::GreaterEqual: return value >= threshold ? 1 : 0;
    case Op::Less: return value < threshold ? 1 : 0;
    case Op::LessEqual: return value <= threshold ? 1 : 0;
    case Op::Equal: return value == threshold ? 1 : 0;
    }
    return -1;
}

Sample::Sample(std::vector<double> y, std::vector<std::uint8_t> d, std::vector<std::uint8_t> z,
               std::vector<std::string> covariate_names, std::vector<std::vector<std::int64_t>> covariates,
               std::vector<std::string> control_names, std::vector<std::vector<double>> controls)
    : y_(std::move(y)), d_(std::move(d)), z_(std::move(z)), covariate_names_(std::move(covariate_names)),
      covariates_(std::move(covariates)), control_names_(std::move(control_names)), controls_(std::move(controls)) {
    const std::size_t n = y_.size();
    if (d_.size() != n || z_.size() != n) throw ValidationError("y, d and z must have the same length");
    if (covariate_names_.size() != covariates_.size()) throw ValidationError("covariate names/columns mismatch");
    if (control_names_.size() != controls_.size()) throw ValidationError("control names/columns mismatch");
    for (const auto& col : covariates_) {
        if (col.size() != n) throw ValidationError("covariate column length differs from outcome length");
    }
    for (const auto& col : controls_) {
        if (col.size() != n) throw ValidationError("control column length differs from outcome length");
    }
    bool any_z1 = false;
    bool any_z0 = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y_[i])) throw ValidationError("non-finite outcome", i);
        if (d_[i] > 1) throw ValidationError("treatment is not binary", i);
        if (z_[i] > 1) throw ValidationError("instrument is not binary", i);
        (z_[i] ? any_z1 : any_z0) = true;
        for (std::size_t c = 0; c < controls_.size(); ++c) {
            if (!std::isfinite(controls_[c][i])) throw ValidationError("non-finite control '" + control_names_[c] + "'", i);
        }
    }
    if (n > 0 && !(any_z1 && any_z0)) {
        throw ValidationError("instrument must take both values 0 and 1 in the sample");
    }
}

std::size_t Sample::covariate_index(std::string_view name) const {
    const auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
    if (it == covariate_names_.end()) throw SchemaError("unknown covariate '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - covariate_names_.begin());
}

std::span<const std::int64_t> Sample::covariate(std::string_view name) const {
    return covariates_[covariate_index(name)];
}

std::span<const double> Sample::control(std::string_view name) const {
    const auto it = std::find(control_names_.begin(), control_names_.end(), name);
    if (it == control_names_.end()) throw SchemaError("unknown control '" + std::string(name) + "'");
    return controls_[static_cast<std::size_t>(it - control_names_.begin())];
}

bool Sample::has_covariate(std::string_view name) const {
    return std::find(covariate_names_.begin(), covariate_names_.end(), name) != covariate_names_.end();
}

bool Sample::has_control(std::string_view name) const {
    return std::find(control_names_.begin(), control_names_.end(), name) != control_names_.end();
}

CovariateKey Sample::key(std::size_t row, std::span<const std::string> names) const {
    CovariateKey k;
    k.reserve(names.size());
    for (const auto& name : names) k.push_back(covariates_[covariate_index(name)][row]);
    return k;
}

std::size_t Sample::count_z1() const {
    return static_cast<std::size_t>(std::count(z_.begin(), z_.end(), std::uint8_t{1}));
}

Sample Sample::with_instrument(std::vector<std::uint8_t> z) const {
    return Sample(y_, d_, std::move(z), covariate_names_, covariates_, control_names_, controls_);
}

Sample Sample::with_outcome(std::vector<double> y) const {
    return Sample(std::move(y), d_, z_, covariate_names_, covariates_, control_names_, controls_);
}

Sample Sample::take(std::span<const std::size_t> rows) const {
    const std::size_t m = rows.size();
    std::vector<double> y(m);
    std::vector<std::uint8_t> d(m), z(m);
    std::vector<std::vector<std::int64_t>> cov(covariates_.size(), std::vector<std::int64_t>(m));
    std::vector<std::vector<double>> ctl(controls_.size(), std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = rows[i];
        y[i] = y_[r];
        d[i] = d_[r];
        z[i] = z_[r];
        for (std::size_t c = 0; c < cov.size(); ++c) cov[c][i] = covariates_[c][r];
        for (std::size_t c = 0; c < ctl.size(); ++c) ctl[c][i] = controls_[c][r];
    }
    return Sample(std::move(y), std::move(d), std::move(z), covariate_names_, std::move(cov), control_names_,
                  std::move(ctl));
}

Sample read_sample_csv(std::istream& in, const ColumnMap& columns, const BinaryRule& treatment_rule,
                       const BinaryRule& instrument_rule, const CsvOptions& options) {
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw SchemaError("empty input: a header row is required");
    const auto header = split_line(line, options.delimiter);

    auto column_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    if (columns.outcome.empty() || columns.treatment.empty() || columns.instrument.empty()) {
        throw SchemaError("column map must name the outcome, treatment and instrument columns");
    }
    const std::size_t iy = column_of(columns.outcome);
    const std::size_t id = column_of(columns.treatment);
    const std::size_t iz = column_of(columns.instrument);
    std::vector<std::size_t> icov, ictl;
    for (const auto& c : columns.covariates) icov.push_back(column_of(c));
    for (const auto& c : columns.controls) ictl.push_back(column_of(c));

    std::vector<double> y;
    std::vector<std::uint8_t> d, z;
    std::vector<std::vector<std::int64_t>> cov(icov.size());
    std::vector<std::vector<double>> ctl(ictl.size());

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_line(line, options.delimiter);
        if (fields.size() != header.size()) {
            throw ValidationError("expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()),
                                  row);
        }
        const double yv = parse_number(fields[iy]);
        if (!std::isfinite(yv)) throw ValidationError("non-finite outcome '" + columns.outcome + "'", row);
        y.push_back(yv);

        const int dv = treatment_rule.apply(parse_number(fields[id]));
        if (dv < 0) throw ValidationError("treatment '" + columns.treatment + "' is not binary under the rule", row);
        d.push_back(static_cast<std::uint8_t>(dv));

        const int zv = instrument_rule.apply(parse_number(fields[iz]));
        if (zv < 0) throw ValidationError("instrument '" + columns.instrument + "' is not binary under the rule", row);
        z.push_back(static_cast<std::uint8_t>(zv));

        for (std::size_t c = 0; c < icov.size(); ++c) {
            const double v = parse_number(fields[icov[c]]);
            if (!std::isfinite(v) || std::floor(v) != v || std::fabs(v) > 9.0e15) {
                throw ValidationError("covariate '" + columns.covariates[c] + "' is not an integer", row);
            }
            cov[c].push_back(static_cast<std::int64_t>(v));
        }
        for (std::size_t c = 0; c < ictl.size(); ++c) {
            const double v = parse_number(fields[ictl[c]]);
            if (!std::isfinite(v)) throw ValidationError("non-finite control '" + columns.controls[c] + "'", row);
            ctl[c].push_back(v);
        }
        ++row;
    }
    if (row == 0) throw SchemaError("input has a header but no data rows");
    return Sample(std::move(y), std::move(d), std::move(z), columns.covariates, std::move(cov), columns.controls,
                  std::move(ctl));
}

Sample load_sample(const std::string& path, const ColumnMap& columns, const BinaryRule& treatment_rule,
                   const BinaryRule& instrument_rule, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    return read_sample_csv(in, columns, treatment_rule, instrument_rule, options);
}

void write_sample_csv(std::ostream& out, const Sample& sample, const std::string& outcome,
                      const std::string& treatment, const std::string& instrument) {
    out << outcome << ',' << treatment << ',' << instrument;
    for (const auto& c : sample.covariate_names()) out << ',' << c;
    for (const auto& c : sample.control_names()) out << ',' << c;
    out << '\n';
    std::vector<std::span<const std::int64_t>> cov;
    std::vector<std::span<const double>> ctl;
    for (const auto& c : sample.covariate_names()) cov.push_back(sample.covariate(c));
    for (const auto& c : sample.control_names()) ctl.push_back(sample.control(c));
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        out << sample.y()[i] << ',' << int(sample.d()[i]) << ',' << int(sample.z()[i]);
        for (const auto& col : cov) out << ',' << col[i];
        for (const auto& col : ctl) out << ',' << col[i];
        out << '\n';
    }
    out.precision(old);
}

} // namespace ivlate
