#pragma once

// Ensemble orchestration: worker pool, per-cell result bundles, sweeps, Wigner runs and oracle reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "qam/config.hpp"
#include "qam/errors.hpp"
#include "qam/evolver.hpp"
#include "qam/io.hpp"
#include "qam/moments.hpp"
#include "qam/observables.hpp"
#include "qam/ou.hpp"
#include "qam/wigner.hpp"

namespace qam {

namespace fs = std::filesystem;
using nlohmann::json;

/// Runs f(0..n-1) on up to `workers` threads; results are stored by index, so the output
/// does not depend on scheduling. f must not throw (capture failures in R).
template <class R, class F>
std::vector<R> run_ordered(std::size_t n, int workers, F&& f) {
    std::vector<R> out(n);
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = f(i);
        });
    for (auto& th : pool) th.join();
    return out;
}

inline int default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

enum class FailureKind { None, Blowup, Truncation, Other };

struct TrajectoryOutcome {
    std::uint64_t seed = 0;
    FailureKind failure = FailureKind::None;
    std::string error;
    double failure_time = 0.0;
    TrajectoryResult quantum;
    std::vector<MomentRecord> oracle;
    std::vector<double> drive_x2; ///< x_c^2 at the record times

    bool ok() const { return failure == FailureKind::None; }
};

inline TrajectoryOutcome run_trajectory(const SimulationConfig& cfg, std::uint64_t seed, bool with_oracle = true) {
    TrajectoryOutcome out;
    out.seed = seed;
    try {
        const auto traj = generate_trajectory(cfg.ou, cfg.dt, cfg.t_final, seed);
        for (auto k : cfg.record.steps(cfg.steps(), cfg.dt)) out.drive_x2.push_back(traj.samples[k].x * traj.samples[k].x);
        if (with_oracle) out.oracle = oracle_series(traj, cfg);
        out.quantum = evolve(traj, cfg);
    } catch (const NumericalBlowup& e) {
        out.failure = FailureKind::Blowup;
        out.error = e.what();
        out.failure_time = e.time();
    } catch (const TruncationError& e) {
        out.failure = FailureKind::Truncation;
        out.error = e.what();
        out.failure_time = e.time();
    } catch (const std::exception& e) {
        out.failure = FailureKind::Other;
        out.error = e.what();
    }
    return out;
}

/// Largest deviation between density-matrix and oracle moments.
struct OracleComparison {
    double max_rel_err = 0.0; ///< over points whose absolute error exceeds abs_tol
    double max_abs_err = 0.0;
    double argmax_t = 0.0;    ///< time of the worst point (relative to the tolerances)
    double worst_ratio = 0.0; ///< max over points of min(rel/rel_tol, abs/abs_tol); pass iff <= 1
    std::size_t n_points = 0;
    bool pass = true;

    void merge(const OracleComparison& o) {
        max_rel_err = std::max(max_rel_err, o.max_rel_err);
        max_abs_err = std::max(max_abs_err, o.max_abs_err);
        if (o.worst_ratio > worst_ratio) {
            worst_ratio = o.worst_ratio;
            argmax_t = o.argmax_t;
        }
        n_points += o.n_points;
        pass = pass && o.pass;
    }
};

inline OracleComparison compare_with_oracle(const std::vector<Record>& q, const std::vector<MomentRecord>& o,
                                            const OracleOptions& tol, double t_max = std::numeric_limits<double>::infinity()) {
    if (q.size() != o.size()) throw PairingError("density-matrix and oracle series have different record grids");
    OracleComparison c;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i].t != o[i].t) throw PairingError("density-matrix and oracle record times differ");
        if (q[i].t > t_max) break;
        const double pairs[3][2] = {{q[i].mean_x, o[i].mean_x}, {q[i].mean_p, o[i].mean_p}, {q[i].mean_x2, o[i].mean_x2}};
        for (const auto& pr : pairs) {
            const double abs_err = std::abs(pr[0] - pr[1]);
            const double rel_err = pr[1] != 0.0 ? abs_err / std::abs(pr[1]) : (abs_err == 0.0 ? 0.0 : INFINITY);
            c.max_abs_err = std::max(c.max_abs_err, abs_err);
            if (abs_err > tol.abs_tol) c.max_rel_err = std::max(c.max_rel_err, rel_err);
            const double ratio = std::min(rel_err / tol.rel_tol, abs_err / tol.abs_tol);
            if (ratio > c.worst_ratio) {
                c.worst_ratio = ratio;
                c.argmax_t = q[i].t;
            }
            ++c.n_points;
        }
    }
    c.pass = c.worst_ratio <= 1.0;
    return c;
}

inline json to_json(const OracleComparison& c) {
    return {{"max_rel_err", c.max_rel_err}, {"max_abs_err", c.max_abs_err}, {"argmax_t", c.argmax_t},
            {"worst_tolerance_ratio", c.worst_ratio}, {"n_points", c.n_points}, {"pass", c.pass}};
}

/// Extremes of the integrator diagnostics over a set of trajectories.
struct HealthSummary {
    double max_trace_dev = 0.0;
    double max_herm_dev = 0.0;
    double max_purity = 0.0;
    double min_eig = std::numeric_limits<double>::infinity();
    double max_top_pop = 0.0;
    std::size_t truncation_warnings = 0;

    void add(const TrajectoryResult& r) {
        for (const auto& rec : r.records) {
            max_trace_dev = std::max(max_trace_dev, rec.diag.trace_dev);
            max_herm_dev = std::max(max_herm_dev, rec.diag.herm_dev);
            max_purity = std::max(max_purity, rec.purity);
            if (!std::isnan(rec.diag.min_eig)) min_eig = std::min(min_eig, rec.diag.min_eig);
            max_top_pop = std::max(max_top_pop, rec.diag.top_pop);
        }
        if (r.truncation_warning) ++truncation_warnings;
    }
    void merge(const HealthSummary& o) {
        max_trace_dev = std::max(max_trace_dev, o.max_trace_dev);
        max_herm_dev = std::max(max_herm_dev, o.max_herm_dev);
        max_purity = std::max(max_purity, o.max_purity);
        min_eig = std::min(min_eig, o.min_eig);
        max_top_pop = std::max(max_top_pop, o.max_top_pop);
        truncation_warnings += o.truncation_warnings;
    }
};

inline json to_json(const HealthSummary& h) {
    return {{"max_trace_dev", h.max_trace_dev},   {"max_herm_dev", h.max_herm_dev},
            {"max_purity", h.max_purity},         {"min_eig", h.min_eig},
            {"max_top_pop", h.max_top_pop},       {"truncation_warnings", h.truncation_warnings}};
}

struct CellResult {
    std::string label;
    SimulationConfig cfg;
    MSDSeries quantum;
    MSDSeries oracle;
    MSDSeries driving;
    OracleComparison comparison;
    HealthSummary health;
    double driving_max_z = 0.0; ///< max |driving - analytic| / stderr
    std::vector<std::string> failures;
    json fits = json::array();

    bool complete() const { return failures.empty(); }
};

inline std::string cell_label(const SimulationConfig& cfg) {
    return std::string(to_string(cfg.dissipator.kind)) + "_nu_minus_" + io::fmt(cfg.dissipator.thermal.nu_minus);
}

/// Runs one ensemble with seeds base_seed + i, paired with the oracle trajectory by trajectory.
inline CellResult run_cell(const SimulationConfig& cfg, int workers, const OracleOptions& tol = {},
                           const std::vector<FitWindow>& windows = {}) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.n_traj);
    auto outcomes = run_ordered<TrajectoryOutcome>(
        n, workers, [&](std::size_t i) { return run_trajectory(cfg, cfg.base_seed + i); });

    CellResult cell;
    cell.label = cell_label(cfg);
    cell.cfg = cfg;
    std::vector<std::vector<double>> q_runs, o_runs, d_runs;
    std::vector<double> times;
    std::vector<std::uint64_t> seeds;
    for (const auto& oc : outcomes) {
        if (!oc.ok()) {
            cell.failures.push_back("seed " + std::to_string(oc.seed) + ": " + oc.error);
            continue;
        }
        if (times.empty())
            for (const auto& r : oc.quantum.records) times.push_back(r.t);
        seeds.push_back(oc.quantum.seed);
        q_runs.push_back(msd_single(oc.quantum.records));
        o_runs.push_back(msd_single(oc.oracle));
        d_runs.push_back(msd_single(oc.drive_x2));
        cell.health.add(oc.quantum);
        cell.comparison.merge(compare_with_oracle(oc.quantum.records, oc.oracle, tol));
    }
    std::vector<std::uint64_t> oracle_seeds;
    for (const auto& oc : outcomes)
        if (oc.ok()) oracle_seeds.push_back(oc.seed);
    check_seed_pairing(seeds, oracle_seeds);
    if (q_runs.empty()) return cell;

    cell.quantum = ensemble_msd(q_runs, times);
    cell.oracle = ensemble_msd(o_runs, times);
    cell.driving = ensemble_msd(d_runs, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double se = cell.driving.std_err[i];
        if (se > 0.0)
            cell.driving_max_z =
                std::max(cell.driving_max_z, std::abs(cell.driving.msd[i] - ou_msd_analytic(times[i], cfg.ou)) / se);
    }
    for (const auto& w : windows) {
        json entry = {{"window", {w.t_lo, w.t_hi}}};
        const std::pair<const char*, const MSDSeries*> series[] = {
            {"quantum", &cell.quantum}, {"oracle", &cell.oracle}, {"driving", &cell.driving}};
        for (const auto& [name, s] : series) {
            try {
                entry[name] = to_json(fit_scaling_exponent(*s, w.t_lo, w.t_hi));
            } catch (const WindowInvalid& e) {
                entry[name] = {{"window", {w.t_lo, w.t_hi}}, {"error", e.what()}};
            }
        }
        cell.fits.push_back(entry);
    }
    return cell;
}

inline json diagnostics_json(const CellResult& c) {
    return {{"label", c.label},
            {"n_traj", c.cfg.n_traj},
            {"n_failed", c.failures.size()},
            {"failures", c.failures},
            {"health", to_json(c.health)},
            {"oracle_comparison", to_json(c.comparison)},
            {"driving_vs_analytic_max_z", c.driving_max_z}};
}

inline std::string msd_csv(const MSDSeries& s, const std::string& source = {}) {
    std::ostringstream out;
    write_msd_csv(out, s, source);
    return out.str();
}

inline void write_cell(const CellResult& c, const ExperimentManifest& manifest, const fs::path& dir) {
    fs::create_directories(dir);
    ExperimentManifest copy = manifest;
    copy.cfg = c.cfg;
    copy.outputs = dir.string();
    io::write_file((dir / "manifest.json").string(), to_json(copy).dump(2) + "\n");
    io::write_file((dir / "msd_quantum.csv").string(), msd_csv(c.quantum));
    io::write_file((dir / "msd_oracle.csv").string(), msd_csv(c.oracle, "oracle"));
    io::write_file((dir / "msd_driving.csv").string(), msd_csv(c.driving));
    io::write_file((dir / "diagnostics.json").string(), diagnostics_json(c).dump(2) + "\n");
    io::write_file((dir / "fits.json").string(), c.fits.dump(2) + "\n");
    const fs::path marker = dir / "PARTIAL";
    if (!c.complete()) {
        std::string text;
        for (const auto& f : c.failures) text += f + "\n";
        io::write_file(marker.string(), text);
    } else if (fs::exists(marker)) {
        fs::remove(marker);
    }
}

/// Configurations of every sweep cell (kind outer, nu_minus inner); the manifest's own config if no sweep.
inline std::vector<SimulationConfig> sweep_cells(const ExperimentManifest& m) {
    if (!m.has_sweep()) return {m.cfg};
    std::vector<DissipatorKind> kinds = m.sweep_kinds;
    if (kinds.empty()) kinds = {m.cfg.dissipator.kind};
    std::vector<double> rates = m.sweep_nu_minus;
    if (rates.empty()) rates = {m.cfg.dissipator.thermal.nu_minus};
    std::vector<SimulationConfig> out;
    for (auto k : kinds)
        for (double nm : rates) {
            SimulationConfig c = m.cfg;
            c.dissipator.kind = k;
            c.dissipator.thermal = ThermalParams::from_rates(m.cfg.dissipator.thermal.nu_plus, nm);
            out.push_back(c);
        }
    return out;
}

/// The paper's 3 x 3 grid of dissipators and loss rates.
inline ExperimentManifest with_default_sweep(ExperimentManifest m) {
    if (m.sweep_kinds.empty())
        m.sweep_kinds = {DissipatorKind::StaticLindblad, DissipatorKind::TranslatedLindblad, DissipatorKind::Agarwal};
    if (m.sweep_nu_minus.empty()) m.sweep_nu_minus = {1e-2, 1.0, 10.0};
    return m;
}

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every cell of the manifest. A single cell writes into `out`, a sweep into one subdirectory per cell.
inline std::vector<CellResult> run_experiment(const ExperimentManifest& m, int workers, const fs::path& out,
                                              const ProgressFn& progress = {}) {
    const auto cells = sweep_cells(m);
    std::vector<CellResult> results;
    for (const auto& cfg : cells) {
        if (progress) progress("running " + cell_label(cfg) + " (" + std::to_string(cfg.n_traj) + " trajectories)");
        auto cell = run_cell(cfg, workers, m.oracle, m.fit_windows);
        write_cell(cell, m, m.has_sweep() ? out / cell.label : out);
        results.push_back(std::move(cell));
    }
    return results;
}

/// Slowest relaxation rate of the moment drift (smallest real part of its eigenvalues).
inline double slowest_relaxation_rate(const FpeCoefficients& c) {
    const Eigen::Vector2cd ev = c.drift.eigenvalues();
    return std::min(ev(0).real(), ev(1).real());
}

/// Mean and covariance of x and p computed from the density matrix.
inline PhaseSpaceMoments density_moments(const DensityMatrix& rho) {
    const auto ops = build_operator_set(rho.dim());
    PhaseSpaceMoments m;
    m.mean(0) = expectation(rho, ops.x);
    m.mean(1) = expectation(rho, ops.p);
    const CMatrix sym = 0.5 * (ops.x * ops.p + ops.p * ops.x);
    m.cov(0, 0) = expectation(rho, ops.x * ops.x) - m.mean(0) * m.mean(0);
    m.cov(1, 1) = expectation(rho, ops.p * ops.p) - m.mean(1) * m.mean(1);
    m.cov(0, 1) = m.cov(1, 0) = expectation(rho, sym) - m.mean(0) * m.mean(1);
    return m;
}

struct WignerRun {
    double x_c = 0.0;
    double t_relax = 0.0;
    DensityMatrix state; ///< in the trap frame (lab state displaced by -x_c)
    WignerField field;
    WignerPeak peak;
    AnalyticGaussian analytic;
    PhaseSpaceMoments moments;
    HealthSummary health;
    double norm = 0.0;
};

inline double default_relaxation_time(const SimulationConfig& cfg) {
    const auto c = fpe_coefficients(cfg.dissipator, cfg.force_convention);
    if (!(c.gamma > 0.0)) throw NoSteadyState("wigner: zero dissipation has no steady state to relax to");
    return 10.0 / slowest_relaxation_rate(c);
}

/// Relaxes the lab ground state with the trap fixed at x_c and analyses the final Wigner function.
/// Evolution runs in the trap frame, where the start is a coherent state at -x_c and the state stays
/// clear of the Fock cutoff; the lab Wigner function is the frame one translated by x_c.
inline WignerRun run_wigner(const SimulationConfig& base, double x_c, double t_relax, const PhaseSpaceGrid& grid = {}) {
    grid.validate();
    SimulationConfig cfg = base;
    cfg.frame = Frame::Comoving;
    cfg.t_final = t_relax;
    cfg.record = RecordSchedule{};
    const auto traj = constant_trajectory(x_c, cfg.dt, cfg.t_final);
    auto res = evolve_from(traj, cfg, coherent_state(cfg.dim, -x_c), true);
    WignerRun w;
    w.x_c = x_c;
    w.t_relax = t_relax;
    w.health.add(res);
    w.state = *res.final_state;
    PhaseSpaceGrid frame_grid = grid;
    frame_grid.x_min -= x_c;
    frame_grid.x_max -= x_c;
    w.field = wigner_from_density(w.state, frame_grid);
    w.field.grid = grid;
    w.norm = normalization(w.field);
    w.peak = wigner_peak(w.field);
    w.moments = density_moments(w.state);
    w.moments.mean(0) += x_c;
    w.analytic = analytic_steady(cfg.dissipator, x_c, cfg.force_convention);
    return w;
}

inline json wigner_report_json(const WignerRun& w, const SimulationConfig& cfg) {
    const auto ac = w.analytic.covariance();
    const double cells_x = std::abs(w.peak.x - w.analytic.mean(0)) / w.field.grid.dx();
    const double cells_p = std::abs(w.peak.p - w.analytic.mean(1)) / w.field.grid.dp();
    return {{"kind", std::string(to_string(cfg.dissipator.kind))},
            {"nu_minus", cfg.dissipator.thermal.nu_minus},
            {"x_c", w.x_c},
            {"t_relax", w.t_relax},
            {"peak", {w.peak.x, w.peak.p}},
            {"peak_offset_cells", {cells_x, cells_p}},
            {"state_mean", {w.moments.mean(0), w.moments.mean(1)}},
            {"state_covariance", {{w.moments.cov(0, 0), w.moments.cov(0, 1)}, {w.moments.cov(1, 0), w.moments.cov(1, 1)}}},
            {"analytic", to_json(w.analytic)},
            {"max_covariance_deviation", (w.moments.cov - ac).cwiseAbs().maxCoeff()},
            {"grid_normalization", w.norm},
            {"coarse_grid_warning", w.field.coarse_warning},
            {"health", to_json(w.health)}};
}

inline void write_wigner_outputs(const WignerRun& w, const ExperimentManifest& m, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream csv;
    write_wigner_csv(csv, w.field);
    io::write_file((dir / "wigner.csv").string(), csv.str());
    io::write_file((dir / "analytic.json").string(), to_json(w.analytic).dump(2) + "\n");
    io::write_file((dir / "wigner_report.json").string(), wigner_report_json(w, m.cfg).dump(2) + "\n");
    io::write_file((dir / "manifest.json").string(), to_json(m).dump(2) + "\n");
}

/// Density-matrix versus oracle report over every cell of the manifest.
inline json compare_oracle_report(const ExperimentManifest& m, int workers, const ProgressFn& progress = {}) {
    OracleComparison total;
    json per = json::object();
    for (const auto& cfg : sweep_cells(m)) {
        if (progress) progress("comparing " + cell_label(cfg));
        const auto n = static_cast<std::size_t>(cfg.n_traj);
        const auto outcomes = run_ordered<TrajectoryOutcome>(
            n, workers, [&](std::size_t i) { return run_trajectory(cfg, cfg.base_seed + i); });
        OracleComparison cell;
        std::vector<std::string> failures;
        for (const auto& oc : outcomes) {
            if (!oc.ok()) {
                failures.push_back("seed " + std::to_string(oc.seed) + ": " + oc.error);
                cell.pass = false;
                continue;
            }
            cell.merge(compare_with_oracle(oc.quantum.records, oc.oracle, m.oracle));
        }
        json entry = to_json(cell);
        entry["failures"] = failures;
        try {
            const auto cov = steady_covariance(cfg.dissipator, cfg.force_convention);
            entry["steady_covariance"] = {{cov(0, 0), cov(0, 1)}, {cov(1, 0), cov(1, 1)}};
        } catch (const NoSteadyState&) {
            entry["flags"] = {"no-steady-state"};
        }
        per[cell_label(cfg)] = entry;
        total.merge(cell);
    }
    json report = to_json(total);
    report["rel_tol"] = m.oracle.rel_tol;
    report["abs_tol"] = m.oracle.abs_tol;
    report["per_dissipator"] = per;
    return report;
}

/// gnuplot script plotting every MSD bundle found under `dir`.
inline std::string gnuplot_script(const fs::path& dir) {
    std::vector<fs::path> cells;
    if (fs::exists(dir / "msd_quantum.csv")) cells.push_back(dir);
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory() && fs::exists(e.path() / "msd_quantum.csv")) cells.push_back(e.path());
    std::sort(cells.begin(), cells.end());
    std::ostringstream s;
    s << "set datafile separator ','\nset logscale xy\nset key top left\n"
      << "set xlabel 't'\nset ylabel 'MSD'\nset terminal pngcairo size 900,650\n";
    for (const auto& c : cells) {
        const std::string name = c == dir ? "msd" : c.filename().string();
        s << "set output '" << (dir / (name + ".png")).string() << "'\n"
          << "set title '" << name << "'\n"
          << "plot '" << (c / "msd_quantum.csv").string() << "' using 1:2 with lines title 'quantum', \\\n"
          << "     '" << (c / "msd_oracle.csv").string() << "' using 1:2 with lines dt 2 title 'oracle', \\\n"
          << "     '" << (c / "msd_driving.csv").string() << "' using 1:2 with lines lc rgb 'black' title 'driving'\n";
    }
    return s.str();
}

} // namespace qam
