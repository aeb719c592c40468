#pragma once

// Gaussian moment equations of the Wigner Fokker-Planck equations.
//
// Drift f = A q + b, Langevin form dq/dt = -f + noise with noise covariance rate 2 hbar g:
//   d mu / dt    = -(A mu + b)
//   d Sigma / dt = -A Sigma - Sigma A^T + 2 hbar g
// Lindblad kinds: A = [[gamma/4, -1/m], [k, gamma/4]], hbar g = (gamma/8) coth(hbar omega / 2 k_B T) I.
// Agarwal:        A = [[0, -1/m], [k, gamma/4]],       hbar g = diag(0, (gamma m omega/8) coth(...)).
// k is the restoring-force prefactor (m omega^2 or m omega).

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qam/dissipators.hpp"
#include "qam/errors.hpp"
#include "qam/evolver.hpp"
#include "qam/generator.hpp"
#include "qam/observables.hpp"
#include "qam/ou.hpp"

namespace qam {

struct FpeCoefficients {
    DissipatorKind kind = DissipatorKind::StaticLindblad;
    double gamma = 0.0;
    double force = 1.0;
    Eigen::Matrix2d drift = Eigen::Matrix2d::Zero();     ///< A
    Eigen::Matrix2d diffusion = Eigen::Matrix2d::Zero(); ///< hbar g

    /// 0 for the static Lindblad dissipator, 1 for the translated one (unused for Agarwal).
    double delta() const { return kind == DissipatorKind::TranslatedLindblad ? 1.0 : 0.0; }

    /// b for a drive given in the working frame (see Drive).
    Eigen::Vector2d offset(const Drive& d) const {
        double bx = d.frame_velocity;
        if (is_lindblad(kind)) {
            const double centre = kind == DissipatorKind::TranslatedLindblad ? d.trap : -d.shift;
            bx -= 0.25 * gamma * centre;
        }
        return {bx, -force * d.trap};
    }
};

inline FpeCoefficients fpe_coefficients(const DissipatorSpec& spec,
                                        ForceConvention force = ForceConvention::MassOmegaSquared) {
    const auto& th = spec.thermal;
    FpeCoefficients c;
    c.kind = spec.kind;
    c.gamma = th.gamma;
    c.force = force_coefficient(force);
    const double g = th.gamma / 8.0 * th.coth_factor();
    c.drift << (is_lindblad(spec.kind) ? th.gamma / 4.0 : 0.0), -1.0 / UnitSystem::mass, c.force, th.gamma / 4.0;
    if (is_lindblad(spec.kind))
        c.diffusion << g, 0.0, 0.0, g;
    else
        c.diffusion << 0.0, 0.0, 0.0, g * UnitSystem::mass * UnitSystem::omega;
    return c;
}

struct MomentState {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = 0.5 * Eigen::Matrix2d::Identity();

    double mean_x2() const { return cov(0, 0) + mean(0) * mean(0); }
};

namespace detail {

inline MomentState moment_rate(const MomentState& s, const Drive& d, const FpeCoefficients& c) {
    MomentState r;
    r.mean = -(c.drift * s.mean + c.offset(d));
    r.cov = -c.drift * s.cov - s.cov * c.drift.transpose() + 2.0 * c.diffusion;
    return r;
}

inline MomentState axpy(const MomentState& s, double h, const MomentState& k) {
    MomentState r;
    r.mean = s.mean + h * k.mean;
    r.cov = s.cov + h * k.cov;
    return r;
}

} // namespace detail

/// Classical RK4 step with separate drives at the start, middle and end of the step.
inline MomentState moment_step(const MomentState& s, const StepDrives& d, double dt, const FpeCoefficients& c) {
    const auto k1 = detail::moment_rate(s, d.start, c);
    const auto k2 = detail::moment_rate(detail::axpy(s, 0.5 * dt, k1), d.mid, c);
    const auto k3 = detail::moment_rate(detail::axpy(s, 0.5 * dt, k2), d.mid, c);
    const auto k4 = detail::moment_rate(detail::axpy(s, dt, k3), d.end, c);
    MomentState out;
    out.mean = s.mean + (dt / 6.0) * (k1.mean + 2.0 * k2.mean + 2.0 * k3.mean + k4.mean);
    out.cov = s.cov + (dt / 6.0) * (k1.cov + 2.0 * k2.cov + 2.0 * k3.cov + k4.cov);
    const double off = 0.5 * (out.cov(0, 1) + out.cov(1, 0));
    out.cov(0, 1) = out.cov(1, 0) = off;
    return out;
}

/// Lab-frame step with the trap held at x_c.
inline MomentState moment_step(const MomentState& s, double x_c, double dt, const FpeCoefficients& c) {
    if (!(dt > 0.0)) throw std::invalid_argument("moment_step: dt must be positive");
    const Drive d = Drive::lab(x_c);
    return moment_step(s, StepDrives{d, d, d}, dt, c);
}

/// Solves A Sigma + Sigma A^T = 2 hbar g.
inline Eigen::Matrix2d steady_covariance(const FpeCoefficients& c) {
    if (!(c.gamma > 0.0)) throw NoSteadyState("steady_covariance: zero dissipation has no stationary state");
    const auto& a = c.drift;
    Eigen::Matrix3d m;
    // unknowns (s_xx, s_xp, s_pp)
    m << 2.0 * a(0, 0), 2.0 * a(0, 1), 0.0,
        a(1, 0), a(0, 0) + a(1, 1), a(0, 1),
        0.0, 2.0 * a(1, 0), 2.0 * a(1, 1);
    const Eigen::Vector3d rhs(2.0 * c.diffusion(0, 0), 2.0 * c.diffusion(0, 1), 2.0 * c.diffusion(1, 1));
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible()) throw NoSteadyState("steady_covariance: singular Lyapunov system");
    const Eigen::Vector3d s = lu.solve(rhs);
    Eigen::Matrix2d cov;
    cov << s(0), s(1), s(1), s(2);
    return cov;
}

inline Eigen::Matrix2d steady_covariance(const DissipatorSpec& spec,
                                         ForceConvention force = ForceConvention::MassOmegaSquared) {
    return steady_covariance(fpe_coefficients(spec, force));
}

/// Fixed point A mu + b = 0 for a stationary lab-frame trap at x_c.
inline Eigen::Vector2d steady_mean(const FpeCoefficients& c, double x_c) {
    if (!(c.gamma > 0.0)) throw NoSteadyState("steady_mean: zero dissipation has no stationary state");
    return c.drift.fullPivLu().solve(-c.offset(Drive::lab(x_c)));
}

struct MomentRecord {
    double t = 0.0;
    double mean_x = 0.0;
    double mean_p = 0.0;
    double mean_x2 = 0.0;
};

/// Moment trajectory along `traj` on the same record schedule, frame and stage drives as evolve().
inline std::vector<MomentRecord> oracle_series(const OUTrajectory& traj, const SimulationConfig& cfg) {
    cfg.validate();
    if (std::abs(traj.dt - cfg.dt) > 1e-12 * cfg.dt)
        throw std::invalid_argument("oracle_series: trajectory dt differs from config dt");
    const std::size_t total = cfg.steps();
    if (traj.samples.size() < total + 1) throw std::invalid_argument("oracle_series: trajectory shorter than t_final");
    const auto coeffs = fpe_coefficients(cfg.dissipator, cfg.force_convention);
    const auto record_steps = cfg.record.steps(total, cfg.dt);

    std::vector<MomentRecord> out;
    out.reserve(record_steps.size());
    MomentState s; // ground state: mu = 0, Sigma = I/2
    std::size_t next_record = 0;
    for (std::size_t k = 0;; ++k) {
        if (next_record < record_steps.size() && record_steps[next_record] == k) {
            const double shift = frame_shift(traj, k, cfg.frame);
            MomentRecord r;
            r.t = traj.time(k);
            r.mean_x = s.mean(0) + shift;
            r.mean_p = s.mean(1);
            r.mean_x2 = s.cov(0, 0) + r.mean_x * r.mean_x;
            out.push_back(r);
            ++next_record;
        }
        if (k == total) break;
        s = moment_step(s, step_drives(traj, k, cfg.frame, cfg.corrector), cfg.dt, coeffs);
    }
    return out;
}

inline std::vector<double> msd_single(const std::vector<MomentRecord>& records) {
    std::vector<double> x2(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) x2[i] = records[i].mean_x2;
    return msd_single(x2);
}

/// Throws PairingError unless trajectory i carries seed base_seed + i.
inline void check_seed_pairing(const std::vector<std::uint64_t>& seeds, std::uint64_t base_seed) {
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (seeds[i] != base_seed + i)
            throw PairingError("trajectory " + std::to_string(i) + " has seed " + std::to_string(seeds[i]) +
                               ", expected " + std::to_string(base_seed + i));
}

inline void check_seed_pairing(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    if (a.size() != b.size())
        throw PairingError("paired runs hold " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                           " trajectories");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i])
            throw PairingError("trajectory " + std::to_string(i) + ": seeds " + std::to_string(a[i]) + " and " +
                               std::to_string(b[i]) + " differ");
}

/// Ensemble oracle MSD; trajectories must carry seeds base_seed + i.
inline MSDSeries oracle_msd(const std::vector<OUTrajectory>& trajs, const SimulationConfig& cfg) {
    if (trajs.empty()) throw std::invalid_argument("oracle_msd: no trajectories");
    std::vector<std::uint64_t> seeds;
    for (const auto& t : trajs) seeds.push_back(t.seed);
    check_seed_pairing(seeds, cfg.base_seed);
    std::vector<std::vector<double>> runs;
    std::vector<double> times;
    for (const auto& traj : trajs) {
        const auto series = oracle_series(traj, cfg);
        if (times.empty())
            for (const auto& r : series) times.push_back(r.t);
        runs.push_back(msd_single(series));
    }
    return ensemble_msd(runs, times);
}

} // namespace qam
