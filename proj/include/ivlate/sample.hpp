#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ivlate {

/// Ordered tuple of discrete covariate values identifying a cell.
using CovariateKey = std::vector<std::int64_t>;

/// Names of the source columns that make up a sample.
struct ColumnMap {
    std::string outcome;
    std::string treatment;
    std::string instrument;
    std::vector<std::string> covariates; // discrete, integer-valued
    std::vector<std::string> controls;   // continuous, regression-only
};

/// Maps a raw numeric column onto {0,1}. `AsIs` requires the column to be 0/1 already.
struct BinaryRule {
    enum class Op { AsIs, Greater, GreaterEqual, Less, LessEqual, Equal };

    Op op = Op::AsIs;
    double threshold = 0.0;

    /// Parses "", ">12", ">=16", "<3", "<=3", "==1".
    static BinaryRule parse(std::string_view text);
    std::string to_string() const;

    /// Returns 0/1, or -1 when `AsIs` and the value is not exactly 0 or 1.
    int apply(double value) const;
};

struct CsvOptions {
    char delimiter = ',';
};

/// Per-unit observations (Y, D, Z, X). Immutable once constructed.
class Sample {
public:
    Sample() = default;
    Sample(std::vector<double> y, std::vector<std::uint8_t> d, std::vector<std::uint8_t> z,
           std::vector<std::string> covariate_names, std::vector<std::vector<std::int64_t>> covariates,
           std::vector<std::string> control_names = {}, std::vector<std::vector<double>> controls = {});

    std::size_t size() const noexcept { return y_.size(); }

    std::span<const double> y() const noexcept { return y_; }
    std::span<const std::uint8_t> d() const noexcept { return d_; }
    std::span<const std::uint8_t> z() const noexcept { return z_; }

    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    const std::vector<std::string>& control_names() const noexcept { return control_names_; }
    std::span<const std::int64_t> covariate(std::string_view name) const;
    std::span<const double> control(std::string_view name) const;
    bool has_covariate(std::string_view name) const;
    bool has_control(std::string_view name) const;

    /// Key of row `row` over the given covariate names.
    CovariateKey key(std::size_t row, std::span<const std::string> names) const;

    std::size_t count_z1() const;

    Sample with_instrument(std::vector<std::uint8_t> z) const;
    Sample with_outcome(std::vector<double> y) const;
    /// Rows in the order given (repeats allowed).
    Sample take(std::span<const std::size_t> rows) const;

private:
    std::size_t covariate_index(std::string_view name) const;

    std::vector<double> y_;
    std::vector<std::uint8_t> d_;
    std::vector<std::uint8_t> z_;
    std::vector<std::string> covariate_names_;
    std::vector<std::vector<std::int64_t>> covariates_;
    std::vector<std::string> control_names_;
    std::vector<std::vector<double>> controls_;
};

Sample read_sample_csv(std::istream& in, const ColumnMap& columns, const BinaryRule& treatment_rule,
                       const BinaryRule& instrument_rule = {}, const CsvOptions& options = {});

/// Reads a CSV with a header row. Row order is preserved.
Sample load_sample(const std::string& path, const ColumnMap& columns, const BinaryRule& treatment_rule,
                   const BinaryRule& instrument_rule = {}, const CsvOptions& options = {});

/// Writes y,d,z, covariates and controls with full round-trip precision.
void write_sample_csv(std::ostream& out, const Sample& sample, const std::string& outcome = "y",
                      const std::string& treatment = "d", const std::string& instrument = "z");

} // namespace ivlate
