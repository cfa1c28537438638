#include "ivlate/cells.hpp"

#include "ivlate/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ivlate {

namespace {

constexpr std::size_t kDenseCodeLimit = std::size_t{1} << 22;

// Assigns each row a cell index such that cell order is lexicographic in the key.
// Returns the keys of the cells in that order.
std::vector<CovariateKey> assign_cells(const Sample& sample, std::span<const std::string> covariates,
                                       std::vector<std::size_t>& row_cell) {
    const std::size_t n = sample.size();
    row_cell.assign(n, 0);
    if (covariates.empty()) return {CovariateKey{}};

    std::vector<std::span<const std::int64_t>> cols;
    std::vector<std::vector<std::int64_t>> levels;
    for (const auto& name : covariates) {
        cols.push_back(sample.covariate(name));
        std::vector<std::int64_t> lv(cols.back().begin(), cols.back().end());
        std::sort(lv.begin(), lv.end());
        lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
        levels.push_back(std::move(lv));
    }

    // Mixed-radix code with the first covariate most significant preserves lexicographic order.
    std::uint64_t radix_product = 1;
    bool overflow = false;
    for (const auto& lv : levels) {
        if (radix_product > std::numeric_limits<std::uint64_t>::max() / lv.size() / 2) {
            overflow = true;
            break;
        }
        radix_product *= lv.size();
    }

    if (overflow) {
        std::map<CovariateKey, std::size_t> index;
        std::vector<CovariateKey> row_keys(n);
        for (std::size_t i = 0; i < n; ++i) {
            row_keys[i] = sample.key(i, covariates);
            index.emplace(row_keys[i], 0);
        }
        std::vector<CovariateKey> keys;
        for (auto& [k, idx] : index) {
            idx = keys.size();
            keys.push_back(k);
        }
        for (std::size_t i = 0; i < n; ++i) row_cell[i] = index.at(row_keys[i]);
        return keys;
    }

    std::vector<std::uint64_t> codes(n, 0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& lv = levels[c];
        const std::uint64_t radix = lv.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto rank = static_cast<std::uint64_t>(std::lower_bound(lv.begin(), lv.end(), cols[c][i]) - lv.begin());
            codes[i] = codes[i] * radix + rank;
        }
    }

    std::vector<std::uint64_t> distinct;
    if (radix_product <= std::max<std::uint64_t>(kDenseCodeLimit, 4 * n)) {
        std::vector<std::size_t> slot(radix_product, CellTable::npos);
        for (const auto code : codes) slot[code] = 0;
        for (std::uint64_t code = 0; code < radix_product; ++code) {
            if (slot[code] != CellTable::npos) {
                slot[code] = distinct.size();
                distinct.push_back(code);
            }
        }
        for (std::size_t i = 0; i < n; ++i) row_cell[i] = slot[codes[i]];
    } else {
        distinct = codes;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (std::size_t i = 0; i < n; ++i) {
            row_cell[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), codes[i]) -
                                                   distinct.begin());
        }
    }

    std::vector<CovariateKey> keys(distinct.size(), CovariateKey(cols.size()));
    for (std::size_t k = 0; k < distinct.size(); ++k) {
        std::uint64_t code = distinct[k];
        for (std::size_t c = cols.size(); c-- > 0;) {
            keys[k][c] = levels[c][code % levels[c].size()];
            code /= levels[c].size();
        }
    }
    return keys;
}

void finalize_shares(CellTable& table) {
    table.total_n = 0;
    table.total_mass = 0.0;
    for (const auto& c : table.cells) {
        table.total_n += c.n;
        table.total_mass += c.mass;
    }
    for (auto& c : table.cells) {
        c.share = table.total_mass > 0.0 ? c.mass / table.total_mass : 0.0;
        const double e = c.e_hat();
        c.var_z = e * (1.0 - e);
    }
}

} // namespace

std::optional<std::size_t> CellTable::find(const CovariateKey& key) const {
    const auto it = std::lower_bound(cells.begin(), cells.end(), key,
                                     [](const Cell& c, const CovariateKey& k) { return c.key < k; });
    if (it == cells.end() || it->key != key) return std::nullopt;
    return static_cast<std::size_t>(it - cells.begin());
}

std::size_t CellTable::unidentified_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const Cell& c) { return !c.identified(); }));
}

CellTable build_cells(const Sample& sample, std::span<const std::string> covariates,
                      std::span<const double> row_weights) {
    const std::size_t n = sample.size();
    if (n == 0) throw ValidationError("cannot build cells from an empty sample");
    if (!row_weights.empty() && row_weights.size() != n) {
        throw ValidationError("row weights must have one entry per row");
    }
    for (std::size_t i = 0; i < row_weights.size(); ++i) {
        if (!(row_weights[i] >= 0.0) || !std::isfinite(row_weights[i])) {
            throw ValidationError("row weights must be finite and non-negative", i);
        }
    }

    CellTable table;
    table.covariates.assign(covariates.begin(), covariates.end());
    const auto keys = assign_cells(sample, covariates, table.row_cell);
    const std::size_t k = keys.size();
    table.cells.resize(k);
    for (std::size_t c = 0; c < k; ++c) table.cells[c].key = keys[c];

    const auto y = sample.y();
    const auto d = sample.d();
    const auto z = sample.z();
    auto weight = [&](std::size_t i) { return row_weights.empty() ? 1.0 : row_weights[i]; };

    // Index 2*c + z holds the arm statistics of cell c.
    std::vector<double> mass(2 * k, 0.0), sum_y(2 * k, 0.0), sum_d(2 * k, 0.0);
    std::vector<std::size_t> count(2 * k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = 2 * table.row_cell[i] + z[i];
        const double w = weight(i);
        ++count[a];
        mass[a] += w;
        sum_y[a] += w * y[i];
        sum_d[a] += w * d[i];
    }
    std::vector<double> mean_y(2 * k), mean_d(2 * k);
    for (std::size_t a = 0; a < 2 * k; ++a) {
        mean_y[a] = mass[a] > 0.0 ? sum_y[a] / mass[a] : std::numeric_limits<double>::quiet_NaN();
        mean_d[a] = mass[a] > 0.0 ? sum_d[a] / mass[a] : std::numeric_limits<double>::quiet_NaN();
    }
    // Second pass: add the mean residual to correct first-pass rounding.
    std::vector<double> corr_y(2 * k, 0.0), corr_d(2 * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = 2 * table.row_cell[i] + z[i];
        const double w = weight(i);
        corr_y[a] += w * (y[i] - mean_y[a]);
        corr_d[a] += w * (d[i] - mean_d[a]);
    }
    for (std::size_t c = 0; c < k; ++c) {
        Cell& cell = table.cells[c];
        for (int arm = 0; arm < 2; ++arm) {
            const std::size_t a = 2 * c + static_cast<std::size_t>(arm);
            const double my = mass[a] > 0.0 ? mean_y[a] + corr_y[a] / mass[a] : mean_y[a];
            const double md = mass[a] > 0.0 ? std::clamp(mean_d[a] + corr_d[a] / mass[a], 0.0, 1.0) : mean_d[a];
            if (arm == 1) {
                cell.n_z1 = count[a];
                cell.mass_z1 = mass[a];
                cell.mean_y_z1 = my;
                cell.mean_d_z1 = md;
            } else {
                cell.n_z0 = count[a];
                cell.mass_z0 = mass[a];
                cell.mean_y_z0 = my;
                cell.mean_d_z0 = md;
            }
        }
        cell.n = cell.n_z1 + cell.n_z0;
        cell.mass = cell.mass_z1 + cell.mass_z0;
    }
    finalize_shares(table);
    return table;
}

RestrictResult restrict_cells(const CellTable& table, std::size_t min_n) {
    if (min_n < 1) throw InputError("min_n must be at least 1");
    RestrictResult out;
    out.table.covariates = table.covariates;
    std::vector<std::size_t> remap(table.cells.size(), CellTable::npos);
    for (std::size_t c = 0; c < table.cells.size(); ++c) {
        if (table.cells[c].n >= min_n) {
            remap[c] = out.table.cells.size();
            out.table.cells.push_back(table.cells[c]);
        } else {
            out.dropped.push_back(table.cells[c]);
        }
    }
    if (out.table.cells.empty()) {
        throw DegenerateEstimandError("every cell has fewer than " + std::to_string(min_n) + " observations");
    }
    out.table.row_cell.resize(table.row_cell.size());
    for (std::size_t i = 0; i < table.row_cell.size(); ++i) {
        const std::size_t c = table.row_cell[i];
        out.table.row_cell[i] = c == CellTable::npos ? CellTable::npos : remap[c];
    }
    finalize_shares(out.table);
    return out;
}

Sample retain_rows(const Sample& sample, const CellTable& table) {
    if (table.row_cell.size() != sample.size()) {
        throw InputError("cell table was not built from this sample");
    }
    std::vector<std::size_t> rows;
    rows.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (table.row_cell[i] != CellTable::npos) rows.push_back(i);
    }
    return sample.take(rows);
}

} // namespace ivlate
