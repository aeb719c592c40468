#pragma once

// Inertial Ornstein-Uhlenbeck driving of the trap centre:
//   dx_c/dt = v,   dv/dt = -v/tau + sqrt(2 D)/tau * eta(t)
// sampled with the exact Gaussian transition kernel of the joint (x_c, v) process.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qam/io.hpp"

namespace qam {

struct OUParams {
    double tau = 10.0;  ///< persistence time
    double diff = 0.01; ///< noise strength D

    void validate() const {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("OU tau must be positive");
        if (!(diff >= 0.0) || !std::isfinite(diff)) throw std::invalid_argument("OU diffusion must be non-negative");
    }
};

struct OUSample {
    double x = 0.0; ///< trap centre x_c
    double v = 0.0; ///< trap velocity dx_c/dt
};

struct OUTrajectory {
    std::uint64_t seed = 0;
    double dt = 0.0;
    std::vector<OUSample> samples;

    std::size_t steps() const { return samples.empty() ? 0 : samples.size() - 1; }
    double time(std::size_t k) const { return static_cast<double>(k) * dt; }

    /// Cubic Hermite estimate of x_c halfway between samples k and k+1.
    double midpoint_position(std::size_t k) const {
        const auto& a = samples[k];
        const auto& b = samples[k + 1];
        return 0.5 * (a.x + b.x) + dt * (a.v - b.v) / 8.0;
    }
};

namespace detail {

// h - 2 tau (1 - e^{-h/tau}) + tau/2 (1 - e^{-2h/tau}), free of cancellation for h << tau.
inline double integrated_ou_variance_kernel(double h, double tau) {
    const double y = h / tau;
    if (y < 0.1) {
        // sum_{k>=3} (-1)^{k+1} (2^{k-1} - 2) y^k / k!
        double term = y * y / 2.0; // y^k / k! for k = 2
        double pow2 = 2.0;         // 2^{k-1} for k = 2
        double sum = 0.0;
        for (int k = 3; k <= 30; ++k) {
            term *= y / k;
            pow2 *= 2.0;
            const double c = (k % 2 == 1 ? 1.0 : -1.0) * (pow2 - 2.0) * term;
            sum += c;
            if (std::abs(c) < 1e-18 * std::abs(sum)) break;
        }
        return tau * sum;
    }
    return h + 2.0 * tau * std::expm1(-y) - 0.5 * tau * std::expm1(-2.0 * y);
}

} // namespace detail

/// Closed-form Gaussian transition of (x_c, v) over one step.
struct OUTransition {
    double decay = 1.0;    ///< e^{-h/tau}
    double x_from_v = 0.0; ///< tau (1 - e^{-h/tau})
    double var_x = 0.0;
    double cov_xv = 0.0;
    double var_v = 0.0;
    // Cholesky factor of the noise covariance
    double l11 = 0.0, l21 = 0.0, l22 = 0.0;

    OUTransition(double h, const OUParams& p) {
        const double y = h / p.tau;
        const double one_minus = -std::expm1(-y);
        decay = std::exp(-y);
        x_from_v = p.tau * one_minus;
        var_x = 2.0 * p.diff * detail::integrated_ou_variance_kernel(h, p.tau);
        cov_xv = p.diff * one_minus * one_minus;
        var_v = -(p.diff / p.tau) * std::expm1(-2.0 * y);
        l11 = std::sqrt(std::max(var_x, 0.0));
        l21 = l11 > 0.0 ? cov_xv / l11 : 0.0;
        l22 = std::sqrt(std::max(var_v - l21 * l21, 0.0));
    }

    template <class Rng>
    OUSample sample(const OUSample& s, Rng& rng) const {
        std::normal_distribution<double> normal;
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        return {s.x + x_from_v * s.v + l11 * z1, decay * s.v + l21 * z1 + l22 * z2};
    }
};

template <class Rng>
OUSample ou_exact_step(const OUSample& state, double dt, const OUParams& params, Rng& rng) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("ou_exact_step: dt must be positive");
    if (!std::isfinite(state.x) || !std::isfinite(state.v))
        throw std::invalid_argument("ou_exact_step: non-finite state");
    params.validate();
    return OUTransition(dt, params).sample(state, rng);
}

/// Number of samples on [0, t_final] with spacing dt: 1 + floor(t_final / dt).
inline std::size_t sample_count(double dt, double t_final) {
    const double ratio = t_final / dt;
    return 1 + static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12)));
}

inline OUTrajectory generate_trajectory(const OUParams& params, double dt, double t_final, std::uint64_t seed) {
    params.validate();
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("generate_trajectory: dt must be positive");
    if (!(t_final >= dt)) throw std::invalid_argument("generate_trajectory: t_final must be >= dt");

    OUTrajectory traj;
    traj.seed = seed;
    traj.dt = dt;
    const std::size_t n = sample_count(dt, t_final);
    traj.samples.resize(n);
    std::mt19937_64 rng(seed);
    const OUTransition kernel(dt, params);
    for (std::size_t k = 1; k < n; ++k) traj.samples[k] = kernel.sample(traj.samples[k - 1], rng);
    return traj;
}

/// Trap held at a fixed position (no driving); used for steady-state runs.
inline OUTrajectory constant_trajectory(double x_c, double dt, double t_final) {
    if (!(dt > 0.0) || !(t_final >= dt)) throw std::invalid_argument("constant_trajectory: bad time grid");
    OUTrajectory traj;
    traj.dt = dt;
    traj.samples.assign(sample_count(dt, t_final), OUSample{x_c, 0.0});
    return traj;
}

/// <x_c^2(t)> for x_c(0) = v(0) = 0.
inline double ou_msd_analytic(double t, const OUParams& params) {
    if (t < 0.0) throw std::invalid_argument("ou_msd_analytic: negative time");
    params.validate();
    return 2.0 * params.diff * detail::integrated_ou_variance_kernel(t, params.tau);
}

inline void write_trajectory_csv(std::ostream& out, const OUTrajectory& traj) {
    out << "t,x_c,v\n";
    for (std::size_t k = 0; k < traj.samples.size(); ++k)
        out << io::fmt(traj.time(k)) << ',' << io::fmt(traj.samples[k].x) << ',' << io::fmt(traj.samples[k].v)
            << '\n';
}

} // namespace qam
