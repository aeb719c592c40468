#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qam/fock.hpp"

namespace qam {

/// Bath parameters. (nu_plus, nu_minus) is the canonical input; gamma and nbar are derived:
///   gamma = 2 (nu_- - nu_+),  nbar = nu_+ / (nu_- - nu_+),  nu_-/nu_+ = exp(hbar omega / k_B T).
struct ThermalParams {
    double nu_plus = 0.0;
    double nu_minus = 0.0;
    double gamma = 0.0;
    double nbar = 0.0;

    /// k_B T / hbar omega. Zero when nu_plus = 0 (zero-temperature bath).
    double temperature() const {
        if (nu_plus <= 0.0) return 0.0;
        return 1.0 / std::log(nu_minus / nu_plus);
    }
    /// coth(hbar omega / 2 k_B T) = 2 nbar + 1.
    double coth_factor() const { return 2.0 * nbar + 1.0; }
    /// nu_- + nu_+ = gamma (nbar + 1/2).
    double rate_sum() const { return nu_minus + nu_plus; }
    /// hbar omega / 2 coth(hbar omega / 2 k_B T) = nbar + 1/2.
    double effective_temperature() const { return nbar + 0.5; }

    static ThermalParams from_rates(double nu_plus, double nu_minus) {
        if (!std::isfinite(nu_plus) || !std::isfinite(nu_minus) || nu_plus < 0.0)
            throw std::invalid_argument("thermal_params: rates must be finite and nu_plus >= 0");
        if (!(nu_minus > nu_plus))
            throw std::invalid_argument("thermal_params: nu_minus must exceed nu_plus (positive dissipation)");
        ThermalParams th;
        th.nu_plus = nu_plus;
        th.nu_minus = nu_minus;
        th.gamma = 2.0 * (nu_minus - nu_plus);
        th.nbar = nu_plus / (nu_minus - nu_plus);
        return th;
    }

    /// Alternative input form; gamma = 0 is accepted and gives a dissipation-free bath.
    static ThermalParams from_gamma_nbar(double gamma, double nbar) {
        if (!(gamma >= 0.0) || !(nbar >= 0.0) || !std::isfinite(gamma) || !std::isfinite(nbar))
            throw std::invalid_argument("thermal_params: gamma and nbar must be finite and non-negative");
        ThermalParams th;
        th.gamma = gamma;
        th.nbar = nbar;
        th.nu_plus = 0.5 * gamma * nbar;
        th.nu_minus = 0.5 * gamma * (nbar + 1.0);
        return th;
    }

    static ThermalParams from_gamma_temperature(double gamma, double temperature) {
        if (!(temperature > 0.0)) throw std::invalid_argument("thermal_params: temperature must be positive");
        return from_gamma_nbar(gamma, 1.0 / std::expm1(1.0 / temperature));
    }

    static ThermalParams none() { return ThermalParams{}; }
};

inline ThermalParams thermal_params(double nu_plus, double nu_minus) {
    return ThermalParams::from_rates(nu_plus, nu_minus);
}

enum class DissipatorKind { StaticLindblad, TranslatedLindblad, Agarwal };

inline std::string_view to_string(DissipatorKind k) {
    switch (k) {
    case DissipatorKind::StaticLindblad: return "static";
    case DissipatorKind::TranslatedLindblad: return "translated";
    case DissipatorKind::Agarwal: return "agarwal";
    }
    return "unknown";
}

inline DissipatorKind parse_dissipator_kind(std::string_view s) {
    if (s == "static" || s == "static_lindblad") return DissipatorKind::StaticLindblad;
    if (s == "translated" || s == "translated_lindblad") return DissipatorKind::TranslatedLindblad;
    if (s == "agarwal") return DissipatorKind::Agarwal;
    throw std::invalid_argument("unknown dissipator kind '" + std::string(s) + "'");
}

inline bool is_lindblad(DissipatorKind k) { return k != DissipatorKind::Agarwal; }

struct DissipatorSpec {
    DissipatorKind kind = DissipatorKind::StaticLindblad;
    ThermalParams thermal = ThermalParams::from_rates(1e-8, 1e-2);
};

namespace detail {

inline void check_dims(const DensityMatrix& rho, const OperatorSet& ops) {
    if (rho.dim() != ops.dim || rho.data.cols() != ops.dim)
        throw std::invalid_argument("dissipator: density matrix and operator set dimensions differ");
}

inline CMatrix anticommutator(const CMatrix& a, const CMatrix& b) { return a * b + b * a; }
inline CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

// nu_+ (L^dag rho L - {L L^dag, rho}/2) + nu_- (L rho L^dag - {L^dag L, rho}/2)
inline CMatrix lindblad_pair(const CMatrix& rho, const CMatrix& l, const CMatrix& l_dag, const ThermalParams& th) {
    CMatrix out = th.nu_minus * (l * rho * l_dag - 0.5 * anticommutator(l_dag * l, rho));
    if (th.nu_plus != 0.0) out += th.nu_plus * (l_dag * rho * l - 0.5 * anticommutator(l * l_dag, rho));
    return out;
}

} // namespace detail

inline CMatrix apply_static_lindblad(const DensityMatrix& rho, const OperatorSet& ops, const ThermalParams& th) {
    detail::check_dims(rho, ops);
    return detail::lindblad_pair(rho.data, ops.a, ops.a_dag, th);
}

inline CMatrix apply_translated_lindblad(const DensityMatrix& rho, const OperatorSet& ops, double x_c,
                                         const ThermalParams& th) {
    detail::check_dims(rho, ops);
    if (!std::isfinite(x_c)) throw std::invalid_argument("apply_translated_lindblad: non-finite x_c");
    const auto [a, a_dag] = translated_ladder(ops, x_c);
    return detail::lindblad_pair(rho.data, a, a_dag, th);
}

/// -(i gamma/8) [x, {p, rho}] - (gamma/4)(nbar + 1/2) [x, [x, rho]]
inline CMatrix apply_agarwal(const DensityMatrix& rho, const OperatorSet& ops, const ThermalParams& th) {
    detail::check_dims(rho, ops);
    using detail::anticommutator;
    using detail::commutator;
    const CMatrix friction = commutator(ops.x, anticommutator(ops.p, rho.data));
    const CMatrix diffusion = commutator(ops.x, commutator(ops.x, rho.data));
    return cplx(0.0, -th.gamma / 8.0) * friction - (th.gamma / 4.0) * th.effective_temperature() * diffusion;
}

inline CMatrix apply_dissipator(const DensityMatrix& rho, const OperatorSet& ops, double x_c,
                                const DissipatorSpec& spec) {
    switch (spec.kind) {
    case DissipatorKind::StaticLindblad: return apply_static_lindblad(rho, ops, spec.thermal);
    case DissipatorKind::TranslatedLindblad: return apply_translated_lindblad(rho, ops, x_c, spec.thermal);
    case DissipatorKind::Agarwal: return apply_agarwal(rho, ops, spec.thermal);
    }
    throw std::logic_error("unreachable");
}

/// Full time-local generator -i[H(x_c), rho] + D(rho), dense reference form.
inline CMatrix generator(const DensityMatrix& rho, const OperatorSet& ops, double x_c, const DissipatorSpec& spec) {
    const CMatrix h = hamiltonian(ops, x_c);
    CMatrix out = cplx(0.0, -1.0) * detail::commutator(h, rho.data);
    out += apply_dissipator(rho, ops, x_c, spec);
    return out;
}

} // namespace qam
