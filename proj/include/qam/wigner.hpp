#pragma once

// Wigner function of a Fock-basis density matrix, analytic steady Gaussians and peak extraction.
//
// Kernel of |m><n| for m >= n (natural units, r^2 = x^2 + p^2):
//   W_mn(x, p) = (1/pi) (-1)^n sqrt(n!/m!) (sqrt(2) (x - i p))^(m-n) e^{-r^2} L_n^(m-n)(2 r^2)
// and W_nm = conj(W_mn).

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qam/dissipators.hpp"
#include "qam/errors.hpp"
#include "qam/fock.hpp"
#include "qam/io.hpp"
#include "qam/moments.hpp"

namespace qam {

struct PhaseSpaceGrid {
    double x_min = -8.0, x_max = 8.0;
    double p_min = -8.0, p_max = 8.0;
    int n_x = 256, n_p = 256;

    void validate() const {
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(p_min) || !std::isfinite(p_max))
            throw std::invalid_argument("phase-space grid: bounds must be finite");
        if (!(x_max > x_min) || !(p_max > p_min)) throw std::invalid_argument("phase-space grid: max must exceed min");
        if (n_x < 16 || n_p < 16) throw std::invalid_argument("phase-space grid: at least 16 points per axis");
    }
    double dx() const { return (x_max - x_min) / (n_x - 1); }
    double dp() const { return (p_max - p_min) / (n_p - 1); }
    double x(int i) const { return x_min + i * dx(); }
    double p(int j) const { return p_min + j * dp(); }
};

struct WignerField {
    PhaseSpaceGrid grid;
    std::vector<double> values; ///< row-major: values[i * n_p + j] = W(x_i, p_j)
    bool coarse_warning = false; ///< grid normalization off by more than 1e-2

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.n_p + j]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * grid.n_p + j]; }
};

namespace detail {

inline double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

} // namespace detail

/// Trapezoidal integral of f over the grid.
template <class F>
double integrate_grid(const WignerField& w, const F& f) {
    const auto& g = w.grid;
    double sum = 0.0;
    for (int i = 0; i < g.n_x; ++i) {
        const double wi = detail::trapezoid_weight(i, g.n_x);
        double row = 0.0;
        for (int j = 0; j < g.n_p; ++j) row += detail::trapezoid_weight(j, g.n_p) * w.at(i, j) * f(g.x(i), g.p(j));
        sum += wi * row;
    }
    return sum * g.dx() * g.dp();
}

inline double normalization(const WignerField& w) {
    return integrate_grid(w, [](double, double) { return 1.0; });
}

struct PhaseSpaceMoments {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

/// Mean and covariance of W normalised by its grid integral.
inline PhaseSpaceMoments field_moments(const WignerField& w) {
    const double n = normalization(w);
    PhaseSpaceMoments m;
    m.mean(0) = integrate_grid(w, [](double x, double) { return x; }) / n;
    m.mean(1) = integrate_grid(w, [](double, double p) { return p; }) / n;
    const double mx = m.mean(0), mp = m.mean(1);
    m.cov(0, 0) = integrate_grid(w, [&](double x, double) { return (x - mx) * (x - mx); }) / n;
    m.cov(1, 1) = integrate_grid(w, [&](double, double p) { return (p - mp) * (p - mp); }) / n;
    m.cov(0, 1) = m.cov(1, 0) = integrate_grid(w, [&](double x, double p) { return (x - mx) * (p - mp); }) / n;
    return m;
}

namespace detail {

// Sum over matrix elements of rho_mn W_mn(x, p); complex so that the Hermiticity residue is visible.
class WignerKernel {
  public:
    explicit WignerKernel(int dim) : dim_(dim), log_fact_(dim + 1, 0.0), lag_(dim) {
        for (int k = 1; k <= dim; ++k) log_fact_[k] = log_fact_[k - 1] + std::log(static_cast<double>(k));
    }

    cplx operator()(const CMatrix& rho, double x, double p) {
        const double r2 = x * x + p * p;
        const double u = 2.0 * r2;
        const double mod = std::sqrt(u); // |sqrt(2)(x - i p)|
        const cplx phase = mod > 0.0 ? cplx(x, -p) / std::sqrt(r2) : cplx(1.0, 0.0);
        cplx total = 0.0;
        cplx phase_k = 1.0;
        for (int k = 0; k < dim_; ++k) {
            if (k > 0) {
                if (mod == 0.0) break;
                phase_k *= phase;
            }
            const int n_max = dim_ - 1 - k;
            // L_n^(k)(u) by upward recurrence
            lag_[0] = 1.0;
            if (n_max >= 1) lag_[1] = 1.0 + k - u;
            for (int n = 1; n < n_max; ++n)
                lag_[n + 1] = ((2.0 * n + 1.0 + k - u) * lag_[n] - (n + k) * lag_[n - 1]) / (n + 1.0);
            const double log_mod = k > 0 ? k * std::log(mod) : 0.0;
            for (int n = 0; n <= n_max; ++n) {
                const double mag =
                    std::exp(-r2 + log_mod + 0.5 * (log_fact_[n] - log_fact_[n + k])) * lag_[n] / std::numbers::pi;
                const cplx kernel = ((n % 2 == 0) ? mag : -mag) * phase_k;
                if (k == 0)
                    total += rho(n, n) * kernel;
                else
                    total += rho(n + k, n) * kernel + rho(n, n + k) * std::conj(kernel);
            }
        }
        return total;
    }

  private:
    int dim_;
    std::vector<double> log_fact_;
    std::vector<double> lag_;
};

inline void check_square(const DensityMatrix& rho) {
    if (rho.dim() < 1 || rho.data.cols() != rho.dim()) throw std::invalid_argument("wigner: matrix must be square");
}

inline void check_residue(double max_imag, double max_abs) {
    if (max_imag > 1e-10 * std::max(1.0, max_abs))
        throw std::domain_error("wigner: imaginary residue " + io::fmt(max_imag) + " (density matrix not Hermitian)");
}

} // namespace detail

/// W(x, p) at a single phase-space point.
inline double wigner_at(const DensityMatrix& rho, double x, double p) {
    detail::check_square(rho);
    detail::WignerKernel kernel(rho.dim());
    const cplx w = kernel(rho.data, x, p);
    detail::check_residue(std::abs(w.imag()), std::abs(w.real()));
    return w.real();
}

inline WignerField wigner_from_density(const DensityMatrix& rho, const PhaseSpaceGrid& grid = {}) {
    grid.validate();
    detail::check_square(rho);
    detail::WignerKernel kernel(rho.dim());
    WignerField field;
    field.grid = grid;
    field.values.assign(static_cast<std::size_t>(grid.n_x) * grid.n_p, 0.0);
    double max_imag = 0.0, max_abs = 0.0;
    for (int i = 0; i < grid.n_x; ++i) {
        for (int j = 0; j < grid.n_p; ++j) {
            const cplx w = kernel(rho.data, grid.x(i), grid.p(j));
            max_imag = std::max(max_imag, std::abs(w.imag()));
            max_abs = std::max(max_abs, std::abs(w.real()));
            field.at(i, j) = w.real();
        }
    }
    detail::check_residue(max_imag, max_abs);
    field.coarse_warning = std::abs(normalization(field) - 1.0) > 1e-2;
    return field;
}

/// <x|rho|x> from Hermite functions, independent of the Wigner kernel.
inline std::vector<double> position_density(const DensityMatrix& rho, const std::vector<double>& xs) {
    const int dim = rho.dim();
    std::vector<double> out(xs.size());
    Eigen::VectorXd psi(dim);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        psi(0) = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
        if (dim > 1) psi(1) = std::sqrt(2.0) * x * psi(0);
        for (int n = 1; n + 1 < dim; ++n)
            psi(n + 1) = std::sqrt(2.0 / (n + 1)) * x * psi(n) - std::sqrt(static_cast<double>(n) / (n + 1)) * psi(n - 1);
        const Eigen::VectorXcd v = psi.cast<cplx>();
        out[i] = (v.adjoint() * rho.data * v)(0, 0).real();
    }
    return out;
}

/// Integral of W over p at each grid x (trapezoid).
inline std::vector<double> position_marginal(const WignerField& w) {
    const auto& g = w.grid;
    std::vector<double> out(g.n_x, 0.0);
    for (int i = 0; i < g.n_x; ++i) {
        double s = 0.0;
        for (int j = 0; j < g.n_p; ++j) s += detail::trapezoid_weight(j, g.n_p) * w.at(i, j);
        out[i] = s * g.dp();
    }
    return out;
}

/// Gaussian W(q) = N exp(-(q - q0)^T M (q - q0) / 2).
struct AnalyticGaussian {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d precision = Eigen::Matrix2d::Identity();
    double normalization = 0.0;

    Eigen::Matrix2d covariance() const { return precision.inverse(); }

    double operator()(double x, double p) const {
        const Eigen::Vector2d d(x - mean(0), p - mean(1));
        return normalization * std::exp(-0.5 * d.dot(precision * d));
    }

    static AnalyticGaussian from_moments(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
        Eigen::LLT<Eigen::Matrix2d> llt(cov);
        if (llt.info() != Eigen::Success) throw std::invalid_argument("AnalyticGaussian: covariance not positive-definite");
        AnalyticGaussian g;
        g.mean = mean;
        g.precision = cov.inverse();
        g.normalization = 1.0 / (2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
        return g;
    }

    WignerField sample(const PhaseSpaceGrid& grid = {}) const {
        grid.validate();
        WignerField f;
        f.grid = grid;
        f.values.resize(static_cast<std::size_t>(grid.n_x) * grid.n_p);
        for (int i = 0; i < grid.n_x; ++i)
            for (int j = 0; j < grid.n_p; ++j) f.at(i, j) = (*this)(grid.x(i), grid.p(j));
        return f;
    }
};

/// Static Lindblad: mean (16 x_c/(gamma^2+16), 4 gamma x_c/(gamma^2+16)), covariance T~ I with T~ = nbar + 1/2.
inline AnalyticGaussian analytic_steady_static(double x_c, const ThermalParams& th) {
    const double w2 = UnitSystem::omega * UnitSystem::omega;
    const double den = th.gamma * th.gamma + 16.0 * w2;
    const double t_eff = th.effective_temperature();
    Eigen::Matrix2d cov;
    cov << t_eff / (UnitSystem::mass * w2), 0.0, 0.0, UnitSystem::mass * t_eff;
    return AnalyticGaussian::from_moments(
        Eigen::Vector2d(16.0 * w2 * x_c / den, 4.0 * th.gamma * UnitSystem::mass * w2 * x_c / den), cov);
}

/// Translated Lindblad: mean (x_c, 0); covariance from the Lyapunov solve of the drift and diffusion.
inline AnalyticGaussian analytic_steady_translated(double x_c, const ThermalParams& th,
                                                   ForceConvention force = ForceConvention::MassOmegaSquared) {
    const auto c = fpe_coefficients({DissipatorKind::TranslatedLindblad, th}, force);
    return AnalyticGaussian::from_moments(Eigen::Vector2d(x_c, 0.0), steady_covariance(c));
}

inline AnalyticGaussian analytic_steady_agarwal(double x_c, const ThermalParams& th,
                                                ForceConvention force = ForceConvention::MassOmegaSquared) {
    const auto c = fpe_coefficients({DissipatorKind::Agarwal, th}, force);
    return AnalyticGaussian::from_moments(steady_mean(c, x_c), steady_covariance(c));
}

inline AnalyticGaussian analytic_steady(const DissipatorSpec& spec, double x_c,
                                        ForceConvention force = ForceConvention::MassOmegaSquared) {
    switch (spec.kind) {
    case DissipatorKind::StaticLindblad: return analytic_steady_static(x_c, spec.thermal);
    case DissipatorKind::TranslatedLindblad: return analytic_steady_translated(x_c, spec.thermal, force);
    case DissipatorKind::Agarwal: return analytic_steady_agarwal(x_c, spec.thermal, force);
    }
    throw std::logic_error("unreachable");
}

struct WignerPeak {
    double x = 0.0;
    double p = 0.0;
    double value = 0.0;
    int i = 0, j = 0; ///< grid argmax
};

/// Grid argmax refined by a 3-point parabola along each axis.
inline WignerPeak wigner_peak(const WignerField& w) {
    const auto& g = w.grid;
    int bi = 0, bj = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.n_x; ++i)
        for (int j = 0; j < g.n_p; ++j) {
            const double v = w.at(i, j);
            if (!std::isfinite(v)) throw std::domain_error("wigner_peak: non-finite field value");
            if (v > best) {
                best = v;
                bi = i;
                bj = j;
            }
        }
    if (bi == 0 || bj == 0 || bi == g.n_x - 1 || bj == g.n_p - 1)
        throw BoundaryPeak("wigner_peak: maximum at grid boundary (" + io::fmt(g.x(bi)) + ", " + io::fmt(g.p(bj)) +
                           "); enlarge the grid");
    auto refine = [](double fm, double f0, double fp) {
        const double curv = fm - 2.0 * f0 + fp;
        return curv < 0.0 ? 0.5 * (fm - fp) / curv : 0.0;
    };
    WignerPeak pk;
    pk.i = bi;
    pk.j = bj;
    pk.value = best;
    pk.x = g.x(bi) + g.dx() * refine(w.at(bi - 1, bj), best, w.at(bi + 1, bj));
    pk.p = g.p(bj) + g.dp() * refine(w.at(bi, bj - 1), best, w.at(bi, bj + 1));
    return pk;
}

inline void write_wigner_csv(std::ostream& out, const WignerField& w) {
    out << "x,p,w\n";
    for (int i = 0; i < w.grid.n_x; ++i)
        for (int j = 0; j < w.grid.n_p; ++j)
            out << io::fmt(w.grid.x(i)) << ',' << io::fmt(w.grid.p(j)) << ',' << io::fmt(w.at(i, j)) << '\n';
}

inline nlohmann::json to_json(const AnalyticGaussian& g) {
    const Eigen::Matrix2d c = g.covariance();
    return {{"mean", {g.mean(0), g.mean(1)}},
            {"covariance", {{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}}},
            {"normalization", g.normalization}};
}

} // namespace qam
