#include "ivlate/cli.hpp"

#include "ivlate/bootstrap.hpp"
#include "ivlate/decomposition.hpp"
#include "ivlate/error.hpp"
#include "ivlate/estimators.hpp"
#include "ivlate/report.hpp"
#include "ivlate/verify.hpp"
#include "ivlate/weights.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <ostream>

namespace ivlate::cli {

namespace {

struct Prepared {
    std::size_t rows_read = 0;
    std::size_t cells_observed = 0;
    std::vector<Cell> dropped;
    Sample sample;  // rows in retained cells
    CellTable table; // built on `sample`
};

Sample load(const RunConfig& cfg) {
    if (cfg.data.empty()) throw InputError("no data file given (use --data)");
    ColumnMap cols;
    cols.outcome = cfg.outcome;
    cols.treatment = cfg.treatment;
    cols.instrument = cfg.instrument;
    cols.covariates = cfg.covariates;
    for (const auto& c : cfg.linear_controls) {
        if (std::find(cfg.covariates.begin(), cfg.covariates.end(), c) == cfg.covariates.end()) cols.controls.push_back(c);
    }
    CsvOptions opts;
    opts.delimiter = cfg.delimiter;
    return load_sample(cfg.data, cols, BinaryRule::parse(cfg.treatment_rule), BinaryRule::parse(cfg.instrument_rule),
                       opts);
}

Prepared prepare(const RunConfig& cfg) {
    Prepared p;
    const Sample full = load(cfg);
    p.rows_read = full.size();
    const CellTable all = build_cells(full, cfg.covariates);
    p.cells_observed = all.cells.size();
    auto restricted = restrict_cells(all, cfg.min_cell_n);
    p.dropped = std::move(restricted.dropped);
    p.sample = retain_rows(full, restricted.table);
    p.table = build_cells(p.sample, cfg.covariates);
    return p;
}

void describe(const Prepared& p, const RunConfig& cfg, Report& report) {
    report.notes.push_back(std::to_string(p.rows_read) + " rows read; " + std::to_string(p.cells_observed) +
                           " covariate cells observed");
    report.notes.push_back(std::to_string(p.dropped.size()) + " cells with fewer than " + std::to_string(cfg.min_cell_n) +
                           " rows dropped; " + std::to_string(p.table.cells.size()) + " cells and " +
                           std::to_string(p.sample.size()) + " rows retained");
}

SolverPath solver_path(const std::string& s) {
    if (s == "dense") return SolverPath::Dense;
    if (s == "absorbed") return SolverPath::Absorbed;
    return SolverPath::Auto;
}

// Statistics recomputed on each bootstrap replicate from cell sufficient statistics.
std::vector<double> riv_and_late(const Sample& s, const std::vector<std::string>& covs) {
    const CellTable t = build_cells(s, covs);
    const CellEstimates est = cell_estimates(t);
    const WeightTable wt = weight_table(t, est);
    return {wt.dot(Scheme::RIV), wt.dot(Scheme::Late)};
}

struct Reordered {
    Sample sample;
    CellTable table;
    CellEstimates est;
    std::size_t flipped_cells = 0;
    double flipped_share = 0.0;
};

Reordered reorder(const Sample& s, const CellTable& t, const std::vector<std::string>& covs) {
    const CellEstimates est = cell_estimates(t);
    Reordered r;
    r.sample = reorder_instrument(s, t, est);
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
        if (est.cells[c].omega_hat < 0.0) {
            ++r.flipped_cells;
            r.flipped_share += t.cells[c].share;
        }
    }
    r.table = build_cells(r.sample, covs);
    r.est = cell_estimates(r.table);
    return r;
}

std::vector<double> decomposition_statistic(const Sample& s, const std::vector<std::string>& covs) {
    const CellTable t = build_cells(s, covs);
    const Reordered r = reorder(s, t, covs);
    return decomposition_values(decompose(r.table, r.est));
}

int cmd_estimate(const RunConfig& cfg, Report& report, std::ostream& err) {
    const Prepared p = prepare(cfg);
    describe(p, cfg, report);
    const SolverPath path = solver_path(cfg.solver);
    std::vector<EstimateResult> results;
    std::vector<std::string> se_types;
    int status = kOk;

    const bool want_boot = cfg.boot_reps >= 2 && std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const auto& m) {
                               return m == "riv" || m == "late-np";
                           });
    std::vector<BootstrapResult> boot;
    if (want_boot) {
        try {
            const auto covs = cfg.covariates;
            boot = bootstrap_se(p.sample, [&covs](const Sample& s) { return riv_and_late(s, covs); }, 2,
                                BootstrapConfig{cfg.boot_reps, cfg.seed});
            report.notes.push_back("bootstrap: " + std::to_string(cfg.boot_reps) + " row-resampled replicates; " +
                                   std::to_string(boot[0].failures) + " undefined replicates excluded");
        } catch (const EstimationError& e) {
            err << "error: bootstrap: " << e.what() << '\n';
            status = kEstimationFailure;
        }
    }

    for (const auto& name : cfg.methods) {
        const auto method = parse_method(name);
        if (!method) throw InputError("unknown method '" + name + "' (expected iv, 2sls-interacted, riv, late-np)");
        try {
            EstimateResult r;
            std::string se_type = "robust";
            switch (*method) {
            case Method::IV: {
                ControlSpec controls;
                if (cfg.linear_controls.empty()) {
                    controls.saturated = cfg.covariates;
                } else {
                    controls.linear = cfg.linear_controls;
                }
                r = estimate_beta_iv(p.sample, controls, path);
                break;
            }
            case Method::TslsInteracted: r = estimate_beta_2sls_interacted(p.sample, p.table, path); break;
            case Method::RIV:
                r = estimate_beta_riv(p.sample, p.table, path);
                report.notes.push_back("riv: first stage negative in cells holding " +
                                       format_number(100.0 * *r.negative_weight_share) +
                                       "% of observations; the instrument was flipped there");
                if (!boot.empty()) {
                    r.se = boot[0].se;
                    se_type = "bootstrap";
                } else {
                    r.se.reset();
                }
                break;
            case Method::LateNp: {
                const CellEstimates est = cell_estimates(p.table);
                r = estimate_tau_late(p.table, est);
                if (!boot.empty()) r.se = boot[1].se;
                se_type = "bootstrap";
                break;
            }
            }
            for (const auto& w : r.warnings) report.notes.push_back(name + ": " + w);
            results.push_back(std::move(r));
            se_types.push_back(se_type);
        } catch (const EstimationError& e) {
            err << "error: " << name << ": " << e.what() << '\n';
            status = kEstimationFailure;
        }
    }
    report.tables.push_back(estimates_table(results, se_types));
    return status;
}

WeightTable weights_for(const Prepared& p, Report& report) {
    const CellEstimates est = cell_estimates(p.table);
    WeightTable wt = weight_table(p.table, est);
    for (const auto& w : wt.warnings) report.notes.push_back(w);
    return wt;
}

int cmd_weights(const RunConfig& cfg, Report& report) {
    const Prepared p = prepare(cfg);
    describe(p, cfg, report);
    const WeightTable wt = weights_for(p, report);
    report.tables.push_back(weight_rows_table(wt));
    Table sums{"weight_sums", {"scheme", "sum", "dot_beta"}, {}};
    for (const auto s : kSchemes) sums.add({std::string(to_string(s)), wt.weight_sum(s), wt.dot(s)});
    report.tables.push_back(std::move(sums));
    return kOk;
}

int cmd_diagnose(const RunConfig& cfg, Report& report) {
    const Prepared p = prepare(cfg);
    describe(p, cfg, report);
    const WeightTable wt = weights_for(p, report);
    const NegativeWeightReport rep = negative_weight_report(wt);
    bool pos = false, neg = false;
    for (const auto& r : wt.rows) {
        pos = pos || r.omega_hat > 0.0;
        neg = neg || r.omega_hat < 0.0;
    }
    const bool satisfied = !(pos && neg);
    report.tables.push_back(weight_rows_table(wt));
    report.tables.push_back(negative_weight_table(rep));
    Table verdict{"verdict", {"monotonicity_sign_check", "negative_cells", "cells", "negative_obs_share"}, {}};
    verdict.add({std::string(satisfied ? "satisfied" : "violated"), static_cast<std::int64_t>(rep.negative_cells),
                 static_cast<std::int64_t>(rep.cells), rep.negative_obs_share});
    report.tables.push_back(std::move(verdict));
    report.notes.push_back(satisfied ? "verdict: satisfied (the first stage has the same sign in every cell)"
                                     : "verdict: violated (the first stage changes sign across cells)");
    return kOk;
}

int cmd_decompose(const RunConfig& cfg, Report& report, std::ostream& err) {
    const Prepared p = prepare(cfg);
    describe(p, cfg, report);
    const Reordered r = reorder(p.sample, p.table, cfg.covariates);
    report.notes.push_back("instrument reordered before decomposing: flipped in " + std::to_string(r.flipped_cells) +
                           " of " + std::to_string(p.table.cells.size()) + " cells (" +
                           format_number(100.0 * r.flipped_share) + "% of observations)");
    const Decomposition dec = decompose(r.table, r.est);
    if (dec.equal_variance_fallback) {
        report.notes.push_back("e_hat is constant within both instrument arms; equal-variance weights used");
    }
    std::vector<std::optional<double>> se;
    int status = kOk;
    if (cfg.boot_reps >= 2) {
        try {
            const auto covs = cfg.covariates;
            const auto names = decomposition_fields();
            const auto boot = bootstrap_se(
                p.sample, [&covs](const Sample& s) { return decomposition_statistic(s, covs); }, names.size(),
                BootstrapConfig{cfg.boot_reps, cfg.seed});
            for (const auto& b : boot) se.push_back(b.se);
            report.notes.push_back("bootstrap: " + std::to_string(cfg.boot_reps) +
                                   " row-resampled replicates with the reordering re-estimated in each; " +
                                   std::to_string(boot[0].failures) + " undefined replicates excluded");
        } catch (const EstimationError& e) {
            err << "error: bootstrap: " << e.what() << '\n';
            status = kEstimationFailure;
        }
    }
    report.tables.push_back(decomposition_table(dec, se));
    return status;
}

int cmd_sweep(const RunConfig& cfg, Report& report) {
    const Prepared p = prepare(cfg);
    describe(p, cfg, report);
    const Reordered r = reorder(p.sample, p.table, cfg.covariates);
    const auto grid = default_sweep_grid(r.table, cfg.sweep_points, cfg.theta_lo, cfg.theta_hi);
    const SweepCurve curve = bias_sweep(r.sample, cfg.covariates, grid);
    report.tables.push_back(sweep_table(curve));
    const auto zero = curve.zero_crossing();
    report.notes.push_back(zero ? "lambda crosses zero at implied theta " + format_number(*zero)
                                : std::string("lambda does not change sign on this grid"));
    return kOk;
}

int cmd_simulate(const RunConfig& cfg, Report& report, std::ostream& out) {
    if (cfg.dgp.size() != 1) throw InputError("simulate needs exactly one --dgp file");
    const DgpSpec dgp = load_dgp(cfg.dgp.front());
    const Sample s = draw_sample(dgp, cfg.n, cfg.seed);
    if (cfg.out.empty()) {
        write_sample_csv(out, s, cfg.outcome, cfg.treatment, cfg.instrument);
        return -1; // data already written; no report
    }
    std::ofstream f(cfg.out);
    if (!f) throw InputError("cannot write '" + cfg.out + "'");
    write_sample_csv(f, s, cfg.outcome, cfg.treatment, cfg.instrument);
    report.notes.push_back("wrote " + std::to_string(s.size()) + " rows to " + cfg.out);
    return kOk;
}

int cmd_verify(const RunConfig& cfg, Report& report) {
    std::vector<DgpSpec> dgps;
    if (cfg.dgp.empty()) {
        dgps = monte_carlo_fixtures();
        report.notes.push_back("no --dgp given; verifying the bundled fixture DGPs");
    } else {
        for (const auto& path : cfg.dgp) dgps.push_back(load_dgp(path));
    }
    Table all{"identities", {}, {}};
    Table summary{"summary", {"dgp", "passed", "failed", "skipped"}, {}};
    bool ok = true;
    for (const auto& dgp : dgps) {
        const IdentityReport rep = verify_identities(dgp, cfg.tol);
        Table t = identity_table(rep);
        if (all.columns.empty()) all.columns = t.columns;
        for (auto& row : t.rows) all.rows.push_back(std::move(row));
        summary.add({rep.dgp_name, static_cast<std::int64_t>(rep.count(CheckStatus::Pass)),
                     static_cast<std::int64_t>(rep.count(CheckStatus::Fail)),
                     static_cast<std::int64_t>(rep.count(CheckStatus::Skipped))});
        ok = ok && rep.all_passed();
    }
    report.tables.push_back(std::move(summary));
    report.tables.push_back(std::move(all));
    return ok ? kOk : kEstimationFailure;
}

void define_options(CLI::App& app, RunConfig& cfg) {
    app.add_option("--data", cfg.data, "CSV file with a header row");
    app.add_option("--outcome", cfg.outcome, "outcome column");
    app.add_option("--treatment", cfg.treatment, "treatment column");
    app.add_option("--instrument", cfg.instrument, "instrument column");
    app.add_option("--treatment-rule", cfg.treatment_rule, "binarize the treatment, e.g. '>12'");
    app.add_option("--instrument-rule", cfg.instrument_rule, "binarize the instrument");
    app.add_option("--covariates", cfg.covariates, "discrete covariates defining the cells")->delimiter(',');
    app.add_option("--linear-controls", cfg.linear_controls, "controls entered linearly in iv (with a constant)")
        ->delimiter(',');
    app.add_option("--methods", cfg.methods, "iv, 2sls-interacted, riv, late-np")->delimiter(',');
    app.add_option("--min-cell-n", cfg.min_cell_n, "drop cells with fewer rows")->check(CLI::PositiveNumber);
    app.add_option("--boot-reps", cfg.boot_reps, "bootstrap replications (0 disables)");
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--format", cfg.format, "json or tsv")->check(CLI::IsMember({"json", "tsv"}));
    app.add_option("--solver", cfg.solver, "auto, dense or absorbed")->check(CLI::IsMember({"auto", "dense", "absorbed"}));
    app.add_option("--delimiter", cfg.delimiter, "CSV field delimiter");
    app.add_option("--dgp", cfg.dgp, "DGP file (JSON)");
    app.add_option("--n", cfg.n, "rows to simulate")->check(CLI::PositiveNumber);
    app.add_option("--out", cfg.out, "output file for simulate");
    app.add_option("--tol", cfg.tol, "identity tolerance for verify");
    app.add_option("--sweep-points", cfg.sweep_points, "grid size for sweep");
    app.add_option("--theta-lo", cfg.theta_lo, "smallest implied theta for sweep");
    app.add_option("--theta-hi", cfg.theta_hi, "largest implied theta for sweep");
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Instrumental-variable estimands, their implicit weights, and LATT/LATU diagnostics", "ivlate"};
    app.set_config("--config", "", "flat key = value file using the long flag names");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    define_options(app, cfg);
    const std::vector<std::pair<std::string, std::string>> commands{
        {"estimate", "IV, interacted 2SLS, reordered IV and nonparametric LATE"},
        {"diagnose", "negative-weight diagnostics and the first-stage sign check"},
        {"weights", "per-cell implicit weights"},
        {"decompose", "LATT/LATU decomposition of the reordered IV estimate"},
        {"sweep", "bias of reordered IV as the instrument arms are reweighted"},
        {"simulate", "draw a sample from a DGP file"},
        {"verify", "check every population identity on DGP files"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->fallthrough();
    }
    bool format_given = false;
    try {
        app.parse(argc, argv);
        format_given = app.get_option("--format")->count() > 0;
        if (!format_given) {
            // A config file may also set the format.
            format_given = !app.get_option("--format")->empty();
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    if (!format_given && cfg.command == "sweep") cfg.format = "tsv";

    Report report;
    report.command = cfg.command;
    report.config = cfg.entries();
    int status = kOk;
    try {
        if (cfg.command == "estimate") status = cmd_estimate(cfg, report, err);
        else if (cfg.command == "diagnose") status = cmd_diagnose(cfg, report);
        else if (cfg.command == "weights") status = cmd_weights(cfg, report);
        else if (cfg.command == "decompose") status = cmd_decompose(cfg, report, err);
        else if (cfg.command == "sweep") status = cmd_sweep(cfg, report);
        else if (cfg.command == "simulate") status = cmd_simulate(cfg, report, out);
        else status = cmd_verify(cfg, report);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const EstimationError& e) {
        err << "error: " << cfg.command << ": " << e.what() << '\n';
        return kEstimationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kEstimationFailure;
    }
    if (status < 0) return kOk;
    if (cfg.format == "tsv") {
        write_tsv(out, report);
    } else {
        write_json(out, report);
    }
    return status;
}

} // namespace ivlate::cli
