#pragma once

// Truncated Fock-space operators of the harmonic oscillator in natural units
// (hbar = m = omega = 1; length sqrt(hbar/m omega), time 1/omega).

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace qam {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

/// Unit system is fixed; these exist so formulas can name the constants.
struct UnitSystem {
    static constexpr double hbar = 1.0;
    static constexpr double mass = 1.0;
    static constexpr double omega = 1.0;
};

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

struct OperatorSet {
    int dim = 0;
    CMatrix a;
    CMatrix a_dag;
    CMatrix x;
    CMatrix p;
    CMatrix h0; ///< p^2/2 + x^2/2 built from the truncated x and p
};

inline OperatorSet build_operator_set(int dim) {
    if (dim < 2) throw std::invalid_argument("build_operator_set: dim must be >= 2");
    OperatorSet ops;
    ops.dim = dim;
    ops.a = CMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) ops.a(n - 1, n) = std::sqrt(static_cast<double>(n));
    ops.a_dag = ops.a.adjoint();
    ops.x = kInvSqrt2 * (ops.a + ops.a_dag);
    ops.p = cplx(0.0, kInvSqrt2) * (ops.a_dag - ops.a);
    ops.h0 = 0.5 * (ops.p * ops.p + ops.x * ops.x);
    return ops;
}

/// H = p^2/2 + (x - x_c)^2/2 = h0 - x_c x + x_c^2/2.
inline CMatrix hamiltonian(const OperatorSet& ops, double x_c) {
    CMatrix h = ops.h0 - x_c * ops.x;
    h.diagonal().array() += 0.5 * x_c * x_c;
    return h;
}

/// Ladder operators centred on x_c: a - x_c/sqrt(2) and its adjoint.
inline std::pair<CMatrix, CMatrix> translated_ladder(const OperatorSet& ops, double x_c) {
    CMatrix a = ops.a;
    a.diagonal().array() -= x_c * kInvSqrt2;
    CMatrix a_dag = a.adjoint();
    return {std::move(a), std::move(a_dag)};
}

/// exp(-i shift p) on the truncated space, via the eigenbasis of p.
inline CMatrix displacement_operator(const OperatorSet& ops, double shift) {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(ops.p);
    const Eigen::VectorXcd phases =
        (eig.eigenvalues().cast<cplx>() * cplx(0.0, -shift)).array().exp().matrix();
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

struct DensityMatrix {
    CMatrix data;

    DensityMatrix() = default;
    explicit DensityMatrix(CMatrix m) : data(std::move(m)) {}
    int dim() const { return static_cast<int>(data.rows()); }
};

inline DensityMatrix number_state(int dim, int n) {
    if (dim < 2) throw std::invalid_argument("number_state: dim must be >= 2");
    if (n < 0 || n >= dim) throw std::invalid_argument("number_state: level outside the truncated space");
    CMatrix rho = CMatrix::Zero(dim, dim);
    rho(n, n) = 1.0;
    return DensityMatrix(std::move(rho));
}

inline DensityMatrix ground_state(int dim) { return number_state(dim, 0); }

/// Pure coherent state centred at (x0, p0), amplitudes truncated (not renormalised).
inline DensityMatrix coherent_state(int dim, double x0, double p0 = 0.0) {
    const cplx alpha = kInvSqrt2 * cplx(x0, p0);
    Eigen::VectorXcd psi(dim);
    cplx amp = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n < dim; ++n) {
        psi(n) = amp;
        amp *= alpha / std::sqrt(static_cast<double>(n + 1));
    }
    return DensityMatrix(psi * psi.adjoint());
}

/// Thermal state with occupation nbar displaced to x_c, built in a padded basis and truncated.
inline DensityMatrix displaced_thermal_state(int dim, double nbar, double x_c, int padding = 24) {
    const int big = dim + padding;
    CMatrix thermal = CMatrix::Zero(big, big);
    const double q = nbar / (nbar + 1.0);
    double w = 1.0 / (nbar + 1.0);
    for (int n = 0; n < big; ++n) {
        thermal(n, n) = w;
        w *= q;
    }
    const CMatrix d = displacement_operator(build_operator_set(big), x_c);
    const CMatrix full = d * thermal * d.adjoint();
    return DensityMatrix(full.topLeftCorner(dim, dim));
}

inline cplx expectation_complex(const DensityMatrix& rho, const CMatrix& op) {
    if (op.rows() != rho.data.rows() || op.cols() != rho.data.cols())
        throw std::invalid_argument("expectation: dimension mismatch");
    // Tr(rho op) = sum_{mn} rho_mn op_nm
    return rho.data.cwiseProduct(op.transpose()).sum();
}

/// Tr(rho op) for Hermitian op; the imaginary residue must be negligible.
inline double expectation(const DensityMatrix& rho, const CMatrix& op) {
    const cplx v = expectation_complex(rho, op);
    if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real())))
        throw std::domain_error("expectation: imaginary part " + std::to_string(v.imag()) +
                                " for an operator expected to be Hermitian");
    return v.real();
}

inline double trace_real(const CMatrix& m) { return m.trace().real(); }

inline double purity(const CMatrix& rho) { return rho.cwiseProduct(rho.transpose()).sum().real(); }

inline double hermiticity_deviation(const CMatrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

/// Population of the two highest Fock levels.
inline double top_population(const CMatrix& rho) {
    const auto n = rho.rows();
    return rho(n - 1, n - 1).real() + rho(n - 2, n - 2).real();
}

inline double min_eigenvalue(const CMatrix& rho) {
    const CMatrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

} // namespace qam
