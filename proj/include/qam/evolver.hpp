#pragma once

// Density-matrix time stepping along a sampled trap trajectory.
//
// Predictor-corrector step (trap position frozen at the start of the step by default):
//   rho_pred = rho + dt G(rho, x_c(t))
//   rho_m    = (rho + rho_pred) / 2
//   rho'     = rho + dt G(rho_m, x_c(t))
// With a time-dependent trap this is first order in dt; CorrectorDrive::Midpoint evaluates the
// corrector at x_c(t + dt/2) instead and restores second order for smooth driving.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qam/dissipators.hpp"
#include "qam/errors.hpp"
#include "qam/fock.hpp"
#include "qam/generator.hpp"
#include "qam/ou.hpp"

namespace qam {

enum class CorrectorDrive { Frozen, Midpoint };
enum class Frame { Lab, Comoving };
/// Prefactor of the restoring force in the moment equations: m omega^2 or m omega.
enum class ForceConvention { MassOmegaSquared, MassOmega };

inline double force_coefficient(ForceConvention c) {
    return c == ForceConvention::MassOmegaSquared ? UnitSystem::mass * UnitSystem::omega * UnitSystem::omega
                                                  : UnitSystem::mass * UnitSystem::omega;
}

struct RecordSchedule {
    enum class Mode { Linear, Log };
    Mode mode = Mode::Linear;
    std::size_t stride = 0; ///< 0: choose so that about 1000 records are produced
    int per_decade = 20;    ///< log mode only

    /// Sorted, unique step indices at which observables are recorded (always includes 0).
    std::vector<std::size_t> steps(std::size_t total_steps, double dt) const {
        std::vector<std::size_t> out;
        if (mode == Mode::Linear) {
            const std::size_t s = stride > 0 ? stride : std::max<std::size_t>(1, total_steps / 1000);
            for (std::size_t k = 0; k <= total_steps; k += s) out.push_back(k);
            return out;
        }
        if (per_decade < 1) throw std::invalid_argument("record schedule: per_decade must be >= 1");
        out.push_back(0);
        const double t_end = static_cast<double>(total_steps) * dt;
        const int j_lo = static_cast<int>(std::floor(per_decade * std::log10(dt)));
        const int j_hi = static_cast<int>(std::ceil(per_decade * std::log10(t_end)));
        for (int j = j_lo; j <= j_hi; ++j) {
            const double t = std::pow(10.0, static_cast<double>(j) / per_decade);
            const auto k = static_cast<std::size_t>(std::llround(t / dt));
            if (k >= 1 && k <= total_steps && k != out.back()) out.push_back(k);
        }
        if (out.back() != total_steps) out.push_back(total_steps);
        return out;
    }
};

struct SimulationConfig {
    double dt = 1e-3;
    double t_final = 100.0;
    int dim = 24;
    int n_traj = 200;
    std::uint64_t base_seed = 1;
    RecordSchedule record;
    DissipatorSpec dissipator;
    OUParams ou;
    ForceConvention force_convention = ForceConvention::MassOmegaSquared;
    CorrectorDrive corrector = CorrectorDrive::Frozen;
    Frame frame = Frame::Lab;
    int eig_every = 100;          ///< eigenvalue diagnostic every this many records
    double top_pop_warn = 1e-6;
    double top_pop_error = 1e-3;

    std::size_t steps() const { return sample_count(dt, t_final) - 1; }

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("config: dt must be positive");
        if (!(t_final >= dt)) throw std::invalid_argument("config: t_final must be >= dt");
        if (dim < 2) throw std::invalid_argument("config: dim must be >= 2");
        if (n_traj < 1) throw std::invalid_argument("config: n_traj must be >= 1");
        if (record.mode == RecordSchedule::Mode::Log && record.per_decade < 1)
            throw std::invalid_argument("config: record per_decade must be >= 1");
        if (eig_every < 1) throw std::invalid_argument("config: eig_every must be >= 1");
        ou.validate();
    }
};

/// Drives for the stages of step k: start of step, half step, end of step.
struct StepDrives {
    Drive start;
    Drive mid;
    Drive end;
};

inline double frame_shift(const OUTrajectory& traj, std::size_t k, Frame frame) {
    return frame == Frame::Comoving ? traj.samples[k].x : 0.0;
}

inline StepDrives step_drives(const OUTrajectory& traj, std::size_t k, Frame frame, CorrectorDrive corrector) {
    const auto& s0 = traj.samples[k];
    const auto& s1 = traj.samples[k + 1];
    StepDrives d;
    if (frame == Frame::Lab) {
        d.start = Drive::lab(s0.x);
        if (corrector == CorrectorDrive::Frozen) {
            d.mid = d.end = d.start;
        } else {
            d.mid = Drive::lab(traj.midpoint_position(k));
            d.end = Drive::lab(s1.x);
        }
        return d;
    }
    // Frame follows the sampled trap position, moving linearly between samples.
    const double velocity = (s1.x - s0.x) / traj.dt;
    d.start = {0.0, s0.x, velocity};
    if (corrector == CorrectorDrive::Frozen) {
        d.mid = d.end = d.start;
    } else {
        const double half_shift = 0.5 * (s0.x + s1.x);
        d.mid = {traj.midpoint_position(k) - half_shift, half_shift, velocity};
        d.end = {0.0, s1.x, velocity};
    }
    return d;
}

struct Diagnostics {
    double trace_dev = 0.0; ///< |Tr rho - 1|
    double herm_dev = 0.0;  ///< max |rho - rho^dag|
    double min_eig = 0.0;   ///< smallest eigenvalue of (rho + rho^dag)/2, refreshed every eig_every records
    double top_pop = 0.0;   ///< population of levels N-2 and N-1
};

struct Record {
    double t = 0.0;
    double mean_x = 0.0;
    double mean_p = 0.0;
    double mean_x2 = 0.0;
    double purity = 1.0;
    Diagnostics diag;
};

struct TrajectoryResult {
    std::uint64_t seed = 0;
    std::vector<Record> records;
    bool truncation_warning = false;
    double max_top_pop = 0.0;
    /// State in the working frame at t_final (lab frame unless Frame::Comoving).
    std::optional<DensityMatrix> final_state;
    double final_shift = 0.0;
};

/// One predictor-corrector step with preallocated buffers.
class Stepper {
  public:
    Stepper(int dim, const DissipatorSpec& spec, double dt)
        : gen_(dim, spec), dt_(dt), k1_(CMatrix::Zero(dim, dim)), mid_(CMatrix::Zero(dim, dim)),
          k2_(CMatrix::Zero(dim, dim)) {}

    void advance(CMatrix& rho, const Drive& predictor, const Drive& corrector) {
        gen_.evaluate(rho, predictor, k1_);
        mid_.noalias() = rho + (0.5 * dt_) * k1_;
        gen_.evaluate(mid_, corrector, k2_);
        rho.noalias() += dt_ * k2_;
    }

    FockGenerator& generator() { return gen_; }

  private:
    FockGenerator gen_;
    double dt_;
    CMatrix k1_, mid_, k2_;
};

/// Single lab-frame step with the trap frozen at x_c_t.
inline DensityMatrix step(const DensityMatrix& rho, double t, double x_c_t, const SimulationConfig& cfg) {
    if (rho.dim() != cfg.dim) throw std::invalid_argument("step: density matrix dimension differs from config");
    Stepper stepper(cfg.dim, cfg.dissipator, cfg.dt);
    CMatrix next = rho.data;
    const Drive d = Drive::lab(x_c_t);
    stepper.advance(next, d, d);
    if (!next.allFinite()) throw NumericalBlowup("step: non-finite density matrix", t + cfg.dt);
    return DensityMatrix(std::move(next));
}

namespace detail {

struct ObservableOps {
    CMatrix x, p, x2;
    explicit ObservableOps(int dim) {
        const auto ops = build_operator_set(dim);
        x = ops.x;
        p = ops.p;
        x2 = ops.x * ops.x;
    }
};

inline double band_expectation(const CMatrix& rho, const CMatrix& op) {
    return rho.cwiseProduct(op.transpose()).sum().real();
}

} // namespace detail

/// Evolves `initial` along `traj` and records observables on the configured schedule.
/// `initial` is given in the working frame at t = 0 (shifted by x_c(0) in the co-moving frame).
inline TrajectoryResult evolve_from(const OUTrajectory& traj, const SimulationConfig& cfg, const DensityMatrix& initial,
                                    bool keep_final = false) {
    cfg.validate();
    if (initial.dim() != cfg.dim) throw std::invalid_argument("evolve: initial state dimension differs from config dim");
    if (std::abs(traj.dt - cfg.dt) > 1e-12 * cfg.dt)
        throw std::invalid_argument("evolve: trajectory dt differs from config dt");
    const std::size_t total = cfg.steps();
    if (traj.samples.size() < total + 1) throw std::invalid_argument("evolve: trajectory shorter than t_final");

    const auto record_steps = cfg.record.steps(total, cfg.dt);
    const detail::ObservableOps obs(cfg.dim);
    Stepper stepper(cfg.dim, cfg.dissipator, cfg.dt);

    TrajectoryResult result;
    result.seed = traj.seed;
    result.records.reserve(record_steps.size());

    CMatrix rho = initial.data;
    double last_min_eig = std::numeric_limits<double>::quiet_NaN();
    std::size_t next_record = 0;

    for (std::size_t k = 0;; ++k) {
        const double t = traj.time(k);
        if (next_record < record_steps.size() && record_steps[next_record] == k) {
            if (!rho.allFinite()) throw NumericalBlowup("evolve: non-finite density matrix", t);
            Record rec;
            rec.t = t;
            const double s = frame_shift(traj, k, cfg.frame);
            const double xf = detail::band_expectation(rho, obs.x);
            const double x2f = detail::band_expectation(rho, obs.x2);
            rec.mean_x = xf + s;
            rec.mean_p = detail::band_expectation(rho, obs.p);
            rec.mean_x2 = x2f + 2.0 * s * xf + s * s;
            rec.purity = purity(rho);
            rec.diag.trace_dev = std::abs(trace_real(rho) - 1.0);
            rec.diag.herm_dev = hermiticity_deviation(rho);
            rec.diag.top_pop = top_population(rho);
            if (next_record % static_cast<std::size_t>(cfg.eig_every) == 0) last_min_eig = min_eigenvalue(rho);
            rec.diag.min_eig = last_min_eig;
            result.max_top_pop = std::max(result.max_top_pop, rec.diag.top_pop);
            if (rec.diag.top_pop > cfg.top_pop_error)
                throw TruncationError("evolve: top Fock levels hold " + std::to_string(rec.diag.top_pop) +
                                          " of the population",
                                      t, rec.diag.top_pop);
            if (rec.diag.top_pop > cfg.top_pop_warn) result.truncation_warning = true;
            result.records.push_back(rec);
            ++next_record;
        }
        if (k == total) break;
        const auto drives = step_drives(traj, k, cfg.frame, cfg.corrector);
        stepper.advance(rho, drives.start, drives.mid);
        if (!std::isfinite(trace_real(rho))) throw NumericalBlowup("evolve: non-finite density matrix", t + cfg.dt);
    }
    if (keep_final) {
        result.final_state = DensityMatrix(rho);
        result.final_shift = frame_shift(traj, total, cfg.frame);
    }
    return result;
}

/// Evolves the ground state |0><0| of the working frame.
inline TrajectoryResult evolve(const OUTrajectory& traj, const SimulationConfig& cfg, bool keep_final = false) {
    return evolve_from(traj, cfg, ground_state(cfg.dim), keep_final);
}

inline std::string_view to_string(Frame f) { return f == Frame::Lab ? "lab" : "comoving"; }
inline std::string_view to_string(CorrectorDrive c) { return c == CorrectorDrive::Frozen ? "frozen" : "midpoint"; }
inline std::string_view to_string(ForceConvention f) {
    return f == ForceConvention::MassOmegaSquared ? "m_omega2" : "m_omega";
}

} // namespace qam
