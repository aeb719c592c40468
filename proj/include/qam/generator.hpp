#pragma once

// Banded evaluation of the master-equation generator.
//
// Every operator that enters the generator (a, a^dag, x, p, H) is at most tridiagonal in the
// Fock basis, so each term can be applied in O(N^2) without forming matrix products. The
// translated Lindblad dissipator with jump operator a - beta is rewritten exactly as
//   D_static(rho) - i [ (gamma/4) c p, rho ],   beta = c / sqrt(2),
// an identity that also holds for the truncated matrices.
//
// The generator can be evaluated in a frame displaced by `shift` (lab state
// rho = T(shift) rho_f T(shift)^dag). The frame Hamiltonian gains -shift_dot p, the
// trap sits at x_c - shift, and the static Lindblad centre moves to -shift.

#include <cmath>
#include <complex>
#include <vector>

#include "qam/dissipators.hpp"
#include "qam/fock.hpp"

namespace qam {

/// Driving seen by one generator evaluation.
struct Drive {
    double trap = 0.0;           ///< trap centre in the working frame (x_c - shift)
    double shift = 0.0;          ///< frame displacement relative to the lab
    double frame_velocity = 0.0; ///< d(shift)/dt

    static Drive lab(double x_c) { return {x_c, 0.0, 0.0}; }
};

/// Hermitian tridiagonal operator; upper[n] = T(n, n+1).
struct Tridiagonal {
    std::vector<double> diag;
    std::vector<cplx> upper;
};

class FockGenerator {
  public:
    FockGenerator(int dim, DissipatorSpec spec) : dim_(dim), spec_(spec) {
        if (dim < 2) throw std::invalid_argument("FockGenerator: dim must be >= 2");
        const auto n = static_cast<std::size_t>(dim);
        sqrt_n_.resize(n + 1);
        for (std::size_t k = 0; k <= n; ++k) sqrt_n_[k] = std::sqrt(static_cast<double>(k));
        x_.diag.assign(n, 0.0);
        p_.diag.assign(n, 0.0);
        x_.upper.resize(n - 1);
        p_.upper.resize(n - 1);
        for (std::size_t k = 0; k + 1 < n; ++k) {
            x_.upper[k] = cplx(kInvSqrt2 * sqrt_n_[k + 1], 0.0);
            p_.upper[k] = cplx(0.0, -kInvSqrt2 * sqrt_n_[k + 1]);
        }
        // h0 = (a a^dag + a^dag a)/2 on the truncated space
        h0_diag_.resize(n);
        for (std::size_t k = 0; k < n; ++k) h0_diag_[k] = k + 1 < n ? k + 0.5 : 0.5 * k;
        h_.diag = h0_diag_;
        h_.upper.assign(n - 1, cplx{});
        tmp1_ = CMatrix::Zero(dim, dim);
    }

    int dim() const { return dim_; }
    const DissipatorSpec& spec() const { return spec_; }

    /// out = -i [H, rho] + D(rho) for the given drive.
    void evaluate(const CMatrix& rho, const Drive& drive, CMatrix& out) {
        const int n = dim_;
        out.resize(n, n);
        const auto& th = spec_.thermal;

        double p_coeff = -drive.frame_velocity;
        if (is_lindblad(spec_.kind) && th.gamma != 0.0) {
            const double centre =
                spec_.kind == DissipatorKind::TranslatedLindblad ? drive.trap : -drive.shift;
            p_coeff += 0.25 * th.gamma * centre;
        }
        for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(n); ++k)
            h_.upper[k] = -drive.trap * x_.upper[k] + p_coeff * p_.upper[k];

        out.setZero();
        add_commutator(h_, rho, cplx(0.0, -1.0), out);

        if (is_lindblad(spec_.kind)) {
            add_static_lindblad(rho, out);
        } else if (th.gamma != 0.0) {
            // [x, -(i gamma/8) {p, rho} - (gamma/4)(nbar + 1/2) [x, rho]]
            tmp1_.setZero();
            add_anticommutator(p_, rho, cplx(0.0, -th.gamma / 8.0), tmp1_);
            add_commutator(x_, rho, cplx(-0.25 * th.gamma * th.effective_temperature(), 0.0), tmp1_);
            add_commutator(x_, tmp1_, cplx(1.0, 0.0), out);
        }
    }

  private:
    // out += scale (T m - m T)
    void add_commutator(const Tridiagonal& t, const CMatrix& m, cplx scale, CMatrix& out) const {
        apply_sandwich(t, m, scale, -1.0, out);
    }
    // out += scale (T m + m T)
    void add_anticommutator(const Tridiagonal& t, const CMatrix& m, cplx scale, CMatrix& out) const {
        apply_sandwich(t, m, scale, 1.0, out);
    }

    void apply_sandwich(const Tridiagonal& t, const CMatrix& m, cplx scale, double sign, CMatrix& out) const {
        const int n = dim_;
        const cplx* src = m.data();
        cplx* dst = out.data();
        for (int c = 0; c < n; ++c) {
            const cplx* col = src + static_cast<std::ptrdiff_t>(c) * n;
            const cplx* col_l = c > 0 ? col - n : nullptr;
            const cplx* col_r = c + 1 < n ? col + n : nullptr;
            const double dc = t.diag[c];
            const cplx t_lc = c > 0 ? t.upper[c - 1] : cplx{};         // T(c-1, c)
            const cplx t_rc = c + 1 < n ? std::conj(t.upper[c]) : cplx{}; // T(c+1, c)
            cplx* o = dst + static_cast<std::ptrdiff_t>(c) * n;
            for (int r = 0; r < n; ++r) {
                // (T m)(r, c)
                cplx left = t.diag[r] * col[r];
                if (r + 1 < n) left += t.upper[r] * col[r + 1];
                if (r > 0) left += std::conj(t.upper[r - 1]) * col[r - 1];
                // (m T)(r, c)
                cplx right = col[r] * dc;
                if (col_l) right += col_l[r] * t_lc;
                if (col_r) right += col_r[r] * t_rc;
                o[r] += scale * (left + sign * right);
            }
        }
    }

    // nu_- (a rho a^dag - {a^dag a, rho}/2) + nu_+ (a^dag rho a - {a a^dag, rho}/2)
    void add_static_lindblad(const CMatrix& rho, CMatrix& out) const {
        const auto& th = spec_.thermal;
        if (th.nu_minus == 0.0 && th.nu_plus == 0.0) return;
        const int n = dim_;
        const cplx* src = rho.data();
        cplx* dst = out.data();
        for (int c = 0; c < n; ++c) {
            const double up_c = c + 1 < n ? c + 1.0 : 0.0; // (a a^dag)_cc
            for (int r = 0; r < n; ++r) {
                const double up_r = r + 1 < n ? r + 1.0 : 0.0;
                const cplx rho_rc = src[r + static_cast<std::ptrdiff_t>(c) * n];
                cplx loss = -0.5 * (r + c) * rho_rc;
                if (r + 1 < n && c + 1 < n)
                    loss += sqrt_n_[r + 1] * sqrt_n_[c + 1] * src[(r + 1) + static_cast<std::ptrdiff_t>(c + 1) * n];
                cplx gain = -0.5 * (up_r + up_c) * rho_rc;
                if (r > 0 && c > 0)
                    gain += sqrt_n_[r] * sqrt_n_[c] * src[(r - 1) + static_cast<std::ptrdiff_t>(c - 1) * n];
                dst[r + static_cast<std::ptrdiff_t>(c) * n] += th.nu_minus * loss + th.nu_plus * gain;
            }
        }
    }

    int dim_;
    DissipatorSpec spec_;
    std::vector<double> sqrt_n_;
    std::vector<double> h0_diag_;
    Tridiagonal x_;
    Tridiagonal p_;
    Tridiagonal h_;
    CMatrix tmp1_;
};

} // namespace qam
