#pragma once

#include "ivlate/sample.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivlate {

/// Sufficient statistics of one covariate cell, split by instrument arm.
///
/// `mass*` are sums of row weights; they equal the row counts when the table
/// is built without weights. Arm means are NaN when the arm is empty.
struct Cell {
    CovariateKey key;
    std::size_t n = 0;
    std::size_t n_z1 = 0;
    std::size_t n_z0 = 0;
    double mass = 0.0;
    double mass_z1 = 0.0;
    double mass_z0 = 0.0;
    double mean_y_z1 = 0.0;
    double mean_y_z0 = 0.0;
    double mean_d_z1 = 0.0;
    double mean_d_z0 = 0.0;
    double share = 0.0; // mass / total mass
    double var_z = 0.0; // e(1-e), the in-cell variance of Z

    /// Both instrument arms are non-empty, so the first stage is defined.
    bool identified() const noexcept { return mass_z1 > 0.0 && mass_z0 > 0.0; }
    /// Empirical P[Z=1 | X=x].
    double e_hat() const noexcept { return mass > 0.0 ? mass_z1 / mass : 0.0; }
};

struct CellTable {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::vector<std::string> covariates;
    std::vector<Cell> cells; // sorted lexicographically by key
    std::size_t total_n = 0;
    double total_mass = 0.0;
    /// Cell index of every row of the source sample; npos for rows whose cell was dropped.
    std::vector<std::size_t> row_cell;

    std::optional<std::size_t> find(const CovariateKey& key) const;
    std::size_t unidentified_count() const;
};

/// One cell per observed covariate combination. Optional row weights must be
/// non-negative and have one entry per row.
CellTable build_cells(const Sample& sample, std::span<const std::string> covariates,
                      std::span<const double> row_weights = {});

struct RestrictResult {
    CellTable table;
    std::vector<Cell> dropped;
};

/// Removes cells with fewer than `min_n` rows and renormalizes shares.
RestrictResult restrict_cells(const CellTable& table, std::size_t min_n);

/// The rows of `sample` that belong to a surviving cell of `table`, in original order.
Sample retain_rows(const Sample& sample, const CellTable& table);

} // namespace ivlate
