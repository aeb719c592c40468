// Acceptance run: nine criteria at pinned tolerances, one PASS/FAIL line each.
//
//   acceptance [--out DIR] [--workers N] [--only 1,4,8] [--known-failures 4]
//
// Detailed numbers go to DIR/acceptance_report.json; CSV bundles to DIR/c<k>/.
// The exit status is 0 when every criterion passes, or when the failing set is exactly
// --known-failures (a known failure that starts passing is reported and also exits 1).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qam/qam.hpp"

using namespace qam;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const DissipatorKind kAllKinds[] = {DissipatorKind::StaticLindblad, DissipatorKind::TranslatedLindblad,
                                    DissipatorKind::Agarwal};
const double kRates[] = {1e-2, 1.0, 10.0};

struct Verdict {
    bool pass = true;
    std::string summary;
    json detail = json::object();
};

struct Context {
    fs::path out;
    int workers = 1;
    HealthSummary lindblad; // static and translated runs
    HealthSummary agarwal;
    std::vector<std::string> runs;      // every run folded into the health summaries
    std::vector<std::string> flagged;   // runs whose top-two-level population reached 1e-6
    std::vector<std::pair<DissipatorKind, HealthSummary>> per_run; // parallel to runs

    void add_health(const std::string& run, DissipatorKind kind, const HealthSummary& h) {
        (is_lindblad(kind) ? lindblad : agarwal).merge(h);
        runs.push_back(run);
        per_run.emplace_back(kind, h);
        if (h.max_top_pop >= 1e-6) flagged.push_back(run + " (top_pop " + io::fmt(h.max_top_pop) + ")");
    }
    void add_health(const std::string& run, DissipatorKind kind, const TrajectoryResult& r) {
        HealthSummary h;
        h.add(r);
        add_health(run, kind, h);
    }
};

void progress(const std::string& msg) { std::cerr << "acceptance: " << msg << std::endl; }

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

SimulationConfig base_config(DissipatorKind kind, double nu_minus) {
    SimulationConfig cfg;
    cfg.dissipator = {kind, thermal_params(1e-8, nu_minus)};
    return cfg;
}

ExperimentManifest manifest_for(const SimulationConfig& cfg, const std::string& name,
                                std::vector<FitWindow> windows = {}) {
    ExperimentManifest m;
    m.name = name;
    m.cfg = cfg;
    m.fit_windows = std::move(windows);
    m.created = "acceptance";
    return m;
}

const char* kCsvFiles[] = {"msd_quantum.csv", "msd_oracle.csv", "msd_driving.csv"};

// ---------------------------------------------------------------------------------------------
// 1. density matrix against the moment oracle, trajectory by trajectory

SimulationConfig c1_config(DissipatorKind kind, double nu_minus) {
    auto cfg = base_config(kind, nu_minus);
    cfg.t_final = 50.0;
    cfg.n_traj = 20;
    return cfg;
}

Verdict oracle_equivalence(Context& ctx) {
    Verdict v;
    const OracleOptions tol{1e-3, 1e-6};
    double worst = 0.0;
    std::string worst_cell;
    std::size_t n_traj = 0;
    for (auto kind : kAllKinds)
        for (double nm : kRates) {
            const auto cfg = c1_config(kind, nm);
            progress("oracle equivalence " + cell_label(cfg));
            const auto cell = run_cell(cfg, ctx.workers, tol);
            write_cell(cell, manifest_for(cfg, "oracle_equivalence"), ctx.out / "c1" / cell.label);
            ctx.add_health("c1 " + cell.label, kind, cell.health);
            json d = to_json(cell.comparison);
            d["failures"] = cell.failures;
            v.detail[cell.label] = d;
            n_traj += cfg.n_traj - cell.failures.size();
            if (!cell.complete() || !cell.comparison.pass) v.pass = false;
            if (cell.comparison.worst_ratio >= worst) {
                worst = cell.comparison.worst_ratio;
                worst_cell = cell.label;
            }
        }
    v.summary = "worst tolerance ratio " + fmt(worst) + " (" + worst_cell + "), " + std::to_string(n_traj) +
                " trajectories to t=50";
    return v;
}

// ---------------------------------------------------------------------------------------------
// 2. static Lindblad steady displacement with the trap fixed at 3

Verdict static_displacement(Context& ctx) {
    Verdict v;
    const double x_c = 3.0;

    // strong: lab frame from the ground state
    auto strong = base_config(DissipatorKind::StaticLindblad, 10.0);
    strong.t_final = 10.0;
    strong.record.stride = 100;
    progress("static steady state, nu_minus=10, t=10");
    const auto rs = evolve(constant_trajectory(x_c, strong.dt, strong.t_final), strong);
    ctx.add_health("c2 static strong", DissipatorKind::StaticLindblad, rs);
    const auto& ls = rs.records.back();
    const Eigen::Vector2d ms = steady_mean(fpe_coefficients(strong.dissipator), x_c);

    // weak: trap frame, starting from the lab ground state (coherent at -x_c)
    auto weak = base_config(DissipatorKind::StaticLindblad, 1e-2);
    weak.t_final = 2000.0;
    weak.frame = Frame::Comoving;
    weak.record.stride = 1000;
    progress("static steady state, nu_minus=1e-2, t=2000");
    const auto rw = evolve_from(constant_trajectory(x_c, weak.dt, weak.t_final), weak, coherent_state(weak.dim, -x_c));
    ctx.add_health("c2 static weak", DissipatorKind::StaticLindblad, rw);
    const auto& lw = rw.records.back();
    const Eigen::Vector2d mw = steady_mean(fpe_coefficients(weak.dissipator), x_c);

    const auto within = [](double a, double b) { return std::abs(a - b) <= 1e-3; };
    v.pass = ls.t == 10.0 && lw.t == 2000.0 && within(ls.mean_x, 0.11538) && within(ls.mean_p, 0.57692) &&
             within(lw.mean_x, 2.99993) && within(ms(0), 0.11538) && within(ms(1), 0.57692) &&
             within(mw(0), 2.99993);
    v.detail = {{"strong", {{"t", ls.t}, {"mean_x", ls.mean_x}, {"mean_p", ls.mean_p},
                            {"oracle_fixed_point", {ms(0), ms(1)}}, {"expected", {0.11538, 0.57692}}}},
                {"weak", {{"t", lw.t}, {"mean_x", lw.mean_x}, {"mean_p", lw.mean_p},
                          {"oracle_fixed_point", {mw(0), mw(1)}}, {"expected_x", 2.99993}}}};
    v.summary = "strong <x>=" + fmt(ls.mean_x, 6) + " <p>=" + fmt(ls.mean_p, 6) + "; weak <x>=" + fmt(lw.mean_x, 6) +
                " (tolerance 1e-3)";
    return v;
}

// ---------------------------------------------------------------------------------------------
// 3. translated Lindblad and Agarwal steady Wigner functions at x_c = 3

Verdict translated_agarwal_steady(Context& ctx) {
    Verdict v;
    const double x_c = 3.0;
    const PhaseSpaceGrid grid;
    double worst_cells = 0.0, worst_cov = 0.0, worst_pair = 0.0;
    for (double nm : {10.0, 1e-2}) {
        for (auto kind : {DissipatorKind::TranslatedLindblad, DissipatorKind::Agarwal}) {
            const auto cfg = base_config(kind, nm);
            const double t_relax = default_relaxation_time(cfg);
            progress("steady Wigner " + cell_label(cfg) + ", t_relax=" + fmt(t_relax));
            const auto w = run_wigner(cfg, x_c, t_relax, grid);
            auto m = manifest_for(cfg, "steady_wigner");
            m.wigner.x_c = x_c;
            m.wigner.t_relax = t_relax;
            write_wigner_outputs(w, m, ctx.out / "c3" / cell_label(cfg));
            ctx.add_health("c3 " + cell_label(cfg), kind, w.health);
            const double cells = std::max(std::abs(w.peak.x - x_c) / grid.dx(), std::abs(w.peak.p) / grid.dp());
            const Eigen::Matrix2d target = (cfg.dissipator.thermal.nbar + 0.5) * Eigen::Matrix2d::Identity();
            const double cov_dev = (w.moments.cov - target).cwiseAbs().maxCoeff();
            worst_cells = std::max(worst_cells, cells);
            worst_cov = std::max(worst_cov, cov_dev);
            if (!(cells <= 2.0) || !(cov_dev <= 1e-3)) v.pass = false;
            v.detail[cell_label(cfg)] = wigner_report_json(w, cfg);
            v.detail[cell_label(cfg)]["peak_offset_cells_max"] = cells;
            v.detail[cell_label(cfg)]["covariance_deviation"] = cov_dev;
        }
        const auto th = thermal_params(1e-8, nm);
        const Eigen::Matrix2d ct = steady_covariance(DissipatorSpec{DissipatorKind::TranslatedLindblad, th});
        const Eigen::Matrix2d ca = steady_covariance(DissipatorSpec{DissipatorKind::Agarwal, th});
        const double pair = (ct - ca).cwiseAbs().maxCoeff();
        worst_pair = std::max(worst_pair, pair);
        if (!(pair <= 1e-9)) v.pass = false;
        v.detail["lyapunov_translated_vs_agarwal_nu_minus_" + io::fmt(nm)] = pair;
    }
    v.summary = "peak offset <= " + fmt(worst_cells) + " cells, covariance deviation " + fmt(worst_cov) +
                ", translated vs Agarwal steady covariance " + fmt(worst_pair);
    return v;
}

// ---------------------------------------------------------------------------------------------
// 4. driving protocol alone: x_c^2 ensemble against the closed form

MSDSeries driving_ensemble(int n_traj, int workers) {
    const OUParams ou;
    const double dt = 1e-3, t_final = 500.0;
    RecordSchedule sched;
    sched.mode = RecordSchedule::Mode::Log;
    sched.per_decade = 50;
    const auto steps = sched.steps(static_cast<std::size_t>(std::llround(t_final / dt)), dt);
    const auto runs = run_ordered<std::vector<double>>(static_cast<std::size_t>(n_traj), workers, [&](std::size_t i) {
        const auto tr = generate_trajectory(ou, dt, t_final, 1 + i);
        std::vector<double> x2;
        for (auto k : steps) x2.push_back(tr.samples[k].x * tr.samples[k].x);
        return msd_single(x2);
    });
    std::vector<double> times;
    for (auto k : steps) times.push_back(static_cast<double>(k) * dt);
    return ensemble_msd(runs, times);
}

Verdict driving_scaling(Context& ctx) {
    Verdict v;
    progress("driving ensemble, 200 trajectories to t=500");
    const auto s = driving_ensemble(200, ctx.workers);
    fs::create_directories(ctx.out / "c4");
    io::write_file((ctx.out / "c4" / "msd_driving.csv").string(), msd_csv(s));
    const auto short_fit = fit_scaling_exponent(s, 0.1, 1.0);
    const auto long_fit = fit_scaling_exponent(s, 200.0, 500.0);
    const OUParams ou;
    std::size_t outside = 0;
    double max_z = 0.0;
    for (std::size_t i = 1; i < s.times.size(); ++i) {
        const double z = std::abs(s.msd[i] - ou_msd_analytic(s.times[i], ou)) / s.std_err[i];
        max_z = std::max(max_z, z);
        if (!(z <= 3.0)) ++outside;
    }
    v.pass = std::abs(short_fit.slope - 3.0) <= 0.2 && std::abs(long_fit.slope - 1.0) <= 0.15 && outside == 0;
    v.detail = {{"short", to_json(short_fit)}, {"long", to_json(long_fit)}, {"points", s.times.size() - 1},
                {"points_beyond_3_stderr", outside}, {"max_z", max_z}};
    v.summary = "slope " + fmt(short_fit.slope) + " on [0.1, 1], " + fmt(long_fit.slope) + " on [200, 500], " +
                std::to_string(outside) + " of " + std::to_string(s.times.size() - 1) +
                " points beyond 3 stderr (max z " + fmt(max_z, 3) + ")";
    return v;
}

// ---------------------------------------------------------------------------------------------
// 5. quantum MSD regimes

struct RegimeCase {
    std::string name;
    DissipatorKind kind;
    double nu_minus;
    FitWindow window;
    double expected, tol;
    int n_traj;
    double t_final;
    Frame frame;
};

std::vector<RegimeCase> regime_cases() {
    using K = DissipatorKind;
    return {
        {"a_translated_weak", K::TranslatedLindblad, 1e-2, {0.8, 2.5}, 6.0, 0.7, 200, 2.5, Frame::Lab},
        {"b_translated_strong", K::TranslatedLindblad, 10.0, {0.1, 0.6}, 4.0, 0.5, 200, 2.5, Frame::Lab},
        {"c_agarwal_weak", K::Agarwal, 1e-2, {0.03, 0.1}, 3.0, 0.3, 200, 2.5, Frame::Lab},
        {"c_agarwal_mid", K::Agarwal, 1.0, {0.03, 0.1}, 3.0, 0.3, 200, 2.5, Frame::Lab},
        {"c_agarwal_strong", K::Agarwal, 10.0, {0.03, 0.1}, 3.0, 0.3, 200, 2.5, Frame::Lab},
        {"d_translated_long", K::TranslatedLindblad, 1.0, {200.0, 500.0}, 1.0, 0.2, 50, 500.0, Frame::Comoving},
        {"d_agarwal_long", K::Agarwal, 1.0, {200.0, 500.0}, 1.0, 0.2, 50, 500.0, Frame::Comoving},
    };
}

SimulationConfig regime_config(const RegimeCase& rc) {
    auto cfg = base_config(rc.kind, rc.nu_minus);
    cfg.n_traj = rc.n_traj;
    cfg.t_final = rc.t_final;
    cfg.frame = rc.frame;
    cfg.record.mode = RecordSchedule::Mode::Log;
    cfg.record.per_decade = 50;
    return cfg;
}

Verdict msd_regimes(Context& ctx) {
    Verdict v;
    std::vector<std::string> parts;
    for (const auto& rc : regime_cases()) {
        const auto cfg = regime_config(rc);
        progress("MSD regime " + rc.name + " (" + std::to_string(rc.n_traj) + " trajectories to t=" +
                 io::fmt(rc.t_final) + ")");
        const auto m = manifest_for(cfg, rc.name, {rc.window});
        const auto cells = run_experiment(m, ctx.workers, ctx.out / "c5" / rc.name);
        const auto& cell = cells.front();
        ctx.add_health("c5 " + rc.name, rc.kind, cell.health);
        json d = {{"window", {rc.window.t_lo, rc.window.t_hi}}, {"expected", rc.expected}, {"tol", rc.tol},
                  {"fits", cell.fits}, {"failures", cell.failures}};
        bool ok = cell.complete();
        double slope = std::nan("");
        try {
            const auto fit = fit_scaling_exponent(cell.quantum, rc.window.t_lo, rc.window.t_hi);
            slope = fit.slope;
            ok = ok && std::abs(fit.slope - rc.expected) <= rc.tol;
        } catch (const WindowInvalid& e) {
            d["error"] = e.what();
            ok = false;
        }
        d["slope"] = slope;
        d["pass"] = ok;
        v.detail[rc.name] = d;
        v.pass = v.pass && ok;
        parts.push_back(rc.name + " " + fmt(slope, 3) + (ok ? "" : " (out)"));
    }
    for (std::size_t i = 0; i < parts.size(); ++i) v.summary += (i ? ", " : "slopes: ") + parts[i];
    return v;
}

// ---------------------------------------------------------------------------------------------
// 6. integrator health over every run above

Verdict integrator_health(const Context& ctx) {
    Verdict v;
    const auto& l = ctx.lindblad;
    const auto& a = ctx.agarwal;
    const bool lindblad_ok = l.max_trace_dev <= 1e-6 && l.max_herm_dev <= 1e-10 && l.max_purity <= 1.0 + 1e-8 &&
                             l.min_eig >= -1e-8;
    const bool agarwal_ok = a.max_trace_dev <= 1e-6 && a.max_herm_dev <= 1e-10 && a.max_purity <= 1.0 + 1e-8;
    v.pass = !ctx.runs.empty() && lindblad_ok && agarwal_ok && ctx.flagged.empty();

    // which runs break which bound
    json out_of_bound = json::object();
    for (std::size_t i = 0; i < ctx.runs.size(); ++i) {
        const auto& [kind, h] = ctx.per_run[i];
        std::vector<std::string> broken;
        if (h.max_trace_dev > 1e-6) broken.push_back("trace");
        if (h.max_herm_dev > 1e-10) broken.push_back("hermiticity");
        if (h.max_purity > 1.0 + 1e-8) broken.push_back("purity");
        if (is_lindblad(kind) && h.min_eig < -1e-8) broken.push_back("min_eig");
        if (!broken.empty()) out_of_bound[ctx.runs[i]] = {{"bounds", broken}, {"health", to_json(h)}};
    }
    v.detail = {{"lindblad", to_json(l)},
                {"agarwal", to_json(a)},
                {"agarwal_min_eig_logged", a.min_eig},
                {"runs", ctx.runs},
                {"out_of_bound", out_of_bound},
                {"truncation_flagged", ctx.flagged}};
    const double trace = std::max(l.max_trace_dev, a.max_trace_dev);
    const double herm = std::max(l.max_herm_dev, a.max_herm_dev);
    const double top = std::max(l.max_top_pop, a.max_top_pop);
    v.summary = std::to_string(ctx.runs.size()) + " runs: trace dev " + fmt(trace, 3) + ", herm dev " + fmt(herm, 3) +
                ", purity max " + fmt(std::max(l.max_purity, a.max_purity), 12) + ", Lindblad min eig " +
                fmt(l.min_eig, 3) + ", Agarwal min eig " + fmt(a.min_eig, 3) + " (logged), top pop " + fmt(top, 3);
    if (!ctx.flagged.empty()) v.summary += ", " + std::to_string(ctx.flagged.size()) + " runs flagged";
    if (!out_of_bound.empty()) {
        std::map<std::string, int> by_criterion;
        for (const auto& [run, _] : out_of_bound.items()) ++by_criterion[run.substr(0, run.find(' '))];
        v.summary += "; out of bound:";
        for (const auto& [c, n] : by_criterion) v.summary += " " + c + " " + std::to_string(n);
    }
    return v;
}

// ---------------------------------------------------------------------------------------------
// 7. step-halving self-convergence of <x^2> at t = 1

OUTrajectory sine_trajectory(double dt, double t_final) {
    OUTrajectory tr;
    tr.dt = dt;
    const std::size_t n = sample_count(dt, t_final);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        tr.samples.push_back({std::sin(t), std::cos(t)});
    }
    return tr;
}

template <class Make>
double convergence_ratio(Context& ctx, SimulationConfig cfg, const Make& make, const std::string& run) {
    double x[3];
    double h = 4e-3;
    for (double& val : x) {
        cfg.dt = h;
        cfg.t_final = 1.0;
        cfg.record.stride = cfg.steps();
        const auto r = evolve(make(h), cfg);
        ctx.add_health(run + " h=" + io::fmt(h), cfg.dissipator.kind, r);
        val = r.records.back().mean_x2;
        h /= 2.0;
    }
    return std::abs(x[0] - x[1]) / std::abs(x[1] - x[2]);
}

Verdict convergence_order(Context& ctx) {
    Verdict v;
    double lo = INFINITY, hi = 0.0;
    progress("step-halving convergence");
    for (auto kind : kAllKinds) {
        for (double nm : kRates) {
            const auto cfg = base_config(kind, nm);
            const double r = convergence_ratio(
                ctx, cfg, [](double h) { return constant_trajectory(3.0, h, 1.0); }, "c7 fixed " + cell_label(cfg));
            v.detail["fixed_trap_" + cell_label(cfg)] = r;
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            if (!(std::abs(r - 4.0) <= 0.5)) v.pass = false;
        }
        // moving trap, midpoint corrector
        auto cfg = base_config(kind, 1.0);
        cfg.corrector = CorrectorDrive::Midpoint;
        const double r = convergence_ratio(
            ctx, cfg, [](double h) { return sine_trajectory(h, 1.0); }, "c7 sine " + cell_label(cfg));
        v.detail["sine_trap_midpoint_" + cell_label(cfg)] = r;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
        if (!(std::abs(r - 4.0) <= 0.5)) v.pass = false;
    }
    v.summary = "ratios in [" + fmt(lo) + ", " + fmt(hi) + "] over 12 cases (h = 4e-3, 2e-3, 1e-3)";
    return v;
}

// ---------------------------------------------------------------------------------------------
// 8. Wigner fidelity on closed forms

Verdict wigner_fidelity(Context&) {
    Verdict v;
    const PhaseSpaceGrid grid;
    const auto w0 = wigner_from_density(ground_state(24), grid);
    double max_err = 0.0;
    for (int i = 0; i < grid.n_x; ++i)
        for (int j = 0; j < grid.n_p; ++j) {
            const double x = grid.x(i), p = grid.p(j);
            max_err = std::max(max_err, std::abs(w0.at(i, j) - std::exp(-x * x - p * p) / std::numbers::pi));
        }
    const double norm = normalization(w0);
    const double w1 = wigner_at(number_state(24, 1), 0.0, 0.0);
    const double w1_err = std::abs(w1 + 1.0 / std::numbers::pi);
    v.pass = max_err <= 1e-6 && std::abs(norm - 1.0) <= 1e-3 && w1_err <= 1e-6;
    v.detail = {{"ground_max_abs_err", max_err}, {"normalization", norm}, {"fock1_w00", w1}, {"fock1_err", w1_err}};
    v.summary = "ground-state max error " + fmt(max_err, 3) + ", normalization " + fmt(norm, 10) + ", W_1(0,0) error " +
                fmt(w1_err, 3);
    return v;
}

// ---------------------------------------------------------------------------------------------
// 9. byte-identical CSVs for workers 1 and 8

Verdict determinism(Context& ctx) {
    Verdict v;
    std::vector<std::string> mismatches;
    std::size_t compared = 0;
    const auto compare = [&](const fs::path& a, const fs::path& b) {
        ++compared;
        if (!fs::exists(a) || !fs::exists(b) || io::read_file(a.string()) != io::read_file(b.string()))
            mismatches.push_back(a.string() + " vs " + b.string());
    };
    const fs::path root = ctx.out / "c9";

    // ensemble cells: one oracle-equivalence cell and one regime cell, rerun at 1 and 8 workers
    std::vector<std::pair<SimulationConfig, std::string>> cells = {
        {c1_config(DissipatorKind::TranslatedLindblad, 1.0), "oracle"},
        {regime_config(regime_cases()[2]), "regime"}};
    for (const auto& [cfg, tag] : cells) {
        std::map<int, fs::path> dirs;
        for (int w : {1, 8}) {
            progress("determinism " + tag + " " + cell_label(cfg) + " workers=" + std::to_string(w));
            const auto cell = run_cell(cfg, w);
            dirs[w] = root / (tag + "_" + cell_label(cfg)) / ("workers_" + std::to_string(w));
            write_cell(cell, manifest_for(cfg, "determinism"), dirs[w]);
        }
        for (const char* f : kCsvFiles) compare(dirs[1] / f, dirs[8] / f);
    }
    // the same cells from the main acceptance run
    const auto c1_cell = root / ("oracle_" + cell_label(cells[0].first)) / "workers_1";
    if (fs::exists(ctx.out / "c1"))
        for (const char* f : kCsvFiles) compare(c1_cell / f, ctx.out / "c1" / cell_label(cells[0].first) / f);

    // driving ensemble
    for (int w : {1, 8}) {
        progress("determinism driving workers=" + std::to_string(w));
        fs::create_directories(root / ("driving_workers_" + std::to_string(w)));
        io::write_file((root / ("driving_workers_" + std::to_string(w)) / "msd_driving.csv").string(),
                       msd_csv(driving_ensemble(200, w)));
    }
    compare(root / "driving_workers_1" / "msd_driving.csv", root / "driving_workers_8" / "msd_driving.csv");

    v.pass = mismatches.empty();
    v.detail = {{"files_compared", compared}, {"mismatches", mismatches}};
    v.summary = std::to_string(compared) + " CSV pairs compared, " + std::to_string(mismatches.size()) + " differ";
    return v;
}

struct Criterion {
    int id;
    const char* name;
    Verdict (*run)(Context&);
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria for the trapped-particle simulator"};
    std::string out = "acceptance_results";
    std::optional<int> workers;
    std::vector<int> only, known;
    app.add_option("--out", out, "directory for reports and CSV bundles");
    app.add_option("--workers", workers, "worker threads (default: $QAM_WORKERS or available cores)");
    app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
    app.add_option("--known-failures", known, "criteria documented as failing")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    Context ctx;
    ctx.out = out;
    ctx.workers = default_workers();
    if (const char* env = std::getenv("QAM_WORKERS")) ctx.workers = std::max(1, std::atoi(env));
    if (workers) ctx.workers = std::max(1, *workers);
    fs::create_directories(ctx.out);

    // health (6) runs last so it covers every other run
    const Criterion criteria[] = {
        {8, "wigner-fidelity", wigner_fidelity},
        {4, "driving-scaling", driving_scaling},
        {7, "convergence-order", convergence_order},
        {2, "static-displacement", static_displacement},
        {3, "translated-agarwal-steady-state", translated_agarwal_steady},
        {1, "oracle-equivalence", oracle_equivalence},
        {5, "msd-regimes", msd_regimes},
        {9, "determinism", determinism},
        {6, "integrator-health", [](Context& c) { return integrator_health(c); }},
    };
    const std::set<int> selected(only.begin(), only.end());

    const std::set<int> known_set(known.begin(), known.end());
    std::map<int, std::string> lines;
    std::set<int> failed, ran;
    json report = {{"workers", ctx.workers}, {"known_failures", known}, {"criteria", json::object()}};
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run(ctx);
        } catch (const std::exception& e) {
            v.pass = false;
            v.summary = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ran.insert(c.id);
        if (!v.pass) failed.insert(c.id);
        lines[c.id] = "C" + std::to_string(c.id) + " " + c.name + ": " + (v.pass ? "PASS" : "FAIL") +
                      (!v.pass && known_set.count(c.id) ? " (known)" : "") + "  " + v.summary;
        std::cerr << "acceptance: " << lines[c.id] << " [" << fmt(secs, 3) << " s]" << std::endl;
        report["criteria"][std::to_string(c.id)] = {
            {"name", c.name}, {"pass", v.pass}, {"summary", v.summary}, {"seconds", secs}, {"detail", v.detail}};
        io::write_file((ctx.out / "acceptance_report.json").string(), report.dump(2) + "\n");
    }
    for (const auto& [id, line] : lines) std::cout << line << '\n';
    std::set<int> expected;
    for (int id : known_set)
        if (ran.count(id)) expected.insert(id);
    std::cout << (ran.size() - failed.size()) << " of " << ran.size() << " criteria pass";
    if (!failed.empty()) {
        std::cout << "; failing:";
        for (int id : failed) std::cout << " C" << id;
    }
    std::cout << std::endl;
    if (failed != expected) {
        for (int id : expected)
            if (!failed.count(id)) std::cout << "C" << id << " is listed as a known failure but passed" << std::endl;
        return 1;
    }
    return 0;
}
