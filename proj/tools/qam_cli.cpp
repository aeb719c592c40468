// qam: command-line front end for ensemble runs, sweeps, Wigner analysis and oracle checks.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 tolerance failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qam/qam.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitTolerance = 4;

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonOptions& o, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "experiment manifest (key = value or JSON)");
    if (needs_config) c->required();
    sub->add_option("--out", o.out, "output directory (default: manifest outputs)");
    sub->add_option("--seed", o.seed, "override base_seed");
    sub->add_option("--workers", o.workers, "worker threads (default: $QAM_WORKERS or available cores)");
    sub->add_flag("--quiet", o.quiet, "suppress progress messages");
}

int resolve_workers(const CommonOptions& o) {
    if (o.workers) {
        if (*o.workers < 1) throw qam::ConfigError("--workers must be >= 1", "workers");
        return *o.workers;
    }
    if (const char* env = std::getenv("QAM_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        throw qam::ConfigError(std::string("QAM_WORKERS='") + env + "' is not a positive integer", "QAM_WORKERS");
    }
    return qam::default_workers();
}

qam::ExperimentManifest load_manifest(const CommonOptions& o) {
    auto m = o.config.empty() ? qam::parse_config_text("") : qam::parse_config(o.config);
    if (o.seed) m.cfg.base_seed = *o.seed;
    if (!o.out.empty()) m.outputs = o.out;
    return m;
}

qam::ProgressFn progress_fn(const CommonOptions& o) {
    if (o.quiet) return {};
    return [](const std::string& msg) { std::cerr << "qam: " << msg << '\n'; };
}

int report_cells(const std::vector<qam::CellResult>& cells, const CommonOptions& o) {
    int failed = 0;
    for (const auto& c : cells) {
        if (!o.quiet)
            std::cerr << "qam: " << c.label << ": oracle worst ratio " << c.comparison.worst_ratio << ", max top_pop "
                      << c.health.max_top_pop << (c.complete() ? "" : ", PARTIAL") << '\n';
        if (!c.complete()) ++failed;
    }
    return failed > 0 ? kExitNumerical : 0;
}

std::pair<double, double> parse_window(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw qam::ConfigError("window '" + s + "' must read t_lo:t_hi", "window");
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw qam::ConfigError("window '" + s + "' is not numeric", "window");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-system simulator for a harmonically trapped particle with an actively driven trap"};
    app.require_subcommand(1);

    CommonOptions run_o, sweep_o, wig_o, cmp_o;
    auto* run = app.add_subcommand("run", "run the manifest's ensemble (one cell, or its sweep)");
    add_common(run, run_o, false);

    auto* sweep = app.add_subcommand("sweep", "run the kind x nu_minus grid (default: 3 x 3)");
    add_common(sweep, sweep_o, false);

    auto* wig = app.add_subcommand("wigner", "relax with the trap fixed and analyse the Wigner function");
    add_common(wig, wig_o, false);
    std::optional<double> wig_xc, wig_trelax;
    wig->add_option("--x-c", wig_xc, "fixed trap position (default: wigner.x_c)");
    wig->add_option("--t-relax", wig_trelax, "relaxation time (default: wigner.t_relax or 10 / slowest rate)");

    auto* cmp = app.add_subcommand("compare-oracle", "compare density-matrix moments with the Gaussian oracle");
    add_common(cmp, cmp_o, false);
    bool cmp_check = false;
    cmp->add_flag("--check", cmp_check, "exit 4 when the tolerance is violated");

    auto* fit = app.add_subcommand("fit", "log-log slope of an MSD CSV over windows");
    std::string fit_csv;
    std::vector<std::string> fit_windows;
    std::optional<double> fit_expect;
    double fit_tol = 0.2;
    fit->add_option("--csv", fit_csv, "MSD CSV (t,msd,stderr,n_traj)")->required();
    fit->add_option("--window", fit_windows, "t_lo:t_hi (repeatable)")->required();
    fit->add_option("--expect", fit_expect, "check mode: expected slope");
    fit->add_option("--tol", fit_tol, "check mode tolerance");

    auto* plots = app.add_subcommand("emit-plots", "write a gnuplot script for the MSD bundles in a directory");
    std::string plots_dir;
    plots->add_option("--out", plots_dir, "result directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed() || sweep->parsed()) {
            const auto& o = run->parsed() ? run_o : sweep_o;
            auto m = load_manifest(o);
            if (sweep->parsed()) m = qam::with_default_sweep(m);
            const auto cells = qam::run_experiment(m, resolve_workers(o), m.outputs, progress_fn(o));
            return report_cells(cells, o);
        }
        if (wig->parsed()) {
            auto m = load_manifest(wig_o);
            const double x_c = wig_xc.value_or(m.wigner.x_c);
            const double t_relax =
                wig_trelax.value_or(m.wigner.t_relax.value_or(qam::default_relaxation_time(m.cfg)));
            if (auto p = progress_fn(wig_o)) p("relaxing to t=" + qam::io::fmt(t_relax) + " at x_c=" + qam::io::fmt(x_c));
            const auto w = qam::run_wigner(m.cfg, x_c, t_relax, m.wigner.grid);
            qam::write_wigner_outputs(w, m, m.outputs);
            std::cout << qam::wigner_report_json(w, m.cfg).dump(2) << '\n';
            return 0;
        }
        if (cmp->parsed()) {
            const auto m = load_manifest(cmp_o);
            const auto report = qam::compare_oracle_report(m, resolve_workers(cmp_o), progress_fn(cmp_o));
            std::filesystem::create_directories(m.outputs);
            qam::io::write_file((std::filesystem::path(m.outputs) / "oracle_report.json").string(), report.dump(2) + "\n");
            std::cout << report.dump(2) << '\n';
            return cmp_check && !report["pass"].get<bool>() ? kExitTolerance : 0;
        }
        if (fit->parsed()) {
            const auto series = qam::parse_msd_csv(qam::io::read_file(fit_csv));
            nlohmann::json out = nlohmann::json::array();
            bool ok = true;
            for (const auto& w : fit_windows) {
                const auto [lo, hi] = parse_window(w);
                const auto f = qam::fit_scaling_exponent(series, lo, hi);
                auto j = qam::to_json(f);
                if (fit_expect) {
                    const bool pass = std::abs(f.slope - *fit_expect) <= fit_tol;
                    j["expected"] = *fit_expect;
                    j["pass"] = pass;
                    ok = ok && pass;
                }
                out.push_back(j);
            }
            std::cout << out.dump(2) << '\n';
            return ok ? 0 : kExitTolerance;
        }
        if (plots->parsed()) {
            const std::filesystem::path dir(plots_dir);
            qam::io::write_file((dir / "plots.gp").string(), qam::gnuplot_script(dir));
            std::cout << (dir / "plots.gp").string() << '\n';
            return 0;
        }
    } catch (const qam::ConfigError& e) {
        std::cerr << "qam: config error";
        if (!e.key().empty()) std::cerr << " [key " << e.key() << "]";
        if (e.line() > 0) std::cerr << " [line " << e.line() << "]";
        std::cerr << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const qam::NumericalBlowup& e) {
        std::cerr << "qam: numerical failure at t=" << e.time() << ": " << e.what() << '\n';
        return kExitNumerical;
    } catch (const qam::TruncationError& e) {
        std::cerr << "qam: truncation failure at t=" << e.time() << ": " << e.what() << '\n';
        return kExitNumerical;
    } catch (const qam::BoundaryPeak& e) {
        std::cerr << "qam: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const qam::NoSteadyState& e) {
        std::cerr << "qam: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const qam::WindowInvalid& e) {
        std::cerr << "qam: fit window invalid: " << e.what() << '\n';
        return kExitTolerance;
    } catch (const qam::PairingError& e) {
        std::cerr << "qam: pairing error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "qam: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
