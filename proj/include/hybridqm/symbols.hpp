#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hybridqm/errors.hpp"
#include "hybridqm/params.hpp"

namespace hybridqm::symbols {

/// u(k) = (2*hbar/(q-1)) * sin(k*eps/2) with eps = ln q: the band coordinate
/// every symbol is built from. Odd in k, |u| <= 2*hbar/|q-1|, u -> hbar*k as
/// q -> 1.
inline double band_coordinate(const HybridParams& p, double k) {
    return p.amplitude() * std::sin(0.5 * k * p.eps());
}

/// |u(k)|^{order/2} * sgn(k). hybrid_symbol is the order = alpha case; the
/// free exponent exists for the semigroup diagnostic, where composing two
/// orders can leave the (1, 2] window a HybridParams enforces.
inline double momentum_symbol(double q, double hbar, double order, double k) {
    if (!std::isfinite(order) || order <= 0.0 || order > 2.0)
        throw config_error("symbol order: need a value in (0, 2], got " + std::to_string(order));
    if (!std::isfinite(q) || q <= 0.0 || std::abs(q - 1.0) < 1e-10)
        throw config_error("symbol q: need a finite value > 0 away from 1, got " +
                           std::to_string(q));
    if (k == 0.0) return 0.0;
    double eps = std::log(q);
    double qm1 = std::abs(q - 1.0) < 1e-6 ? std::expm1(eps) : (q - 1.0);
    double u = (2.0 * hbar / qm1) * std::sin(0.5 * k * eps);
    return std::pow(std::abs(u), 0.5 * order) * (k > 0.0 ? 1.0 : -1.0);
}

inline double hybrid_symbol(const HybridParams& p, double k) {
    return momentum_symbol(p.q, p.hbar, p.alpha, k);
}

/// E(k) = d_alpha * |u(k)|^alpha. Even, nonnegative, bounded by e_max(),
/// periodic in k with period 2*pi/|eps|.
inline double kinetic_symbol(const HybridParams& p, double k) {
    return p.d_alpha() * std::pow(std::abs(band_coordinate(p, k)), p.alpha);
}

/// dE/dp with p = hbar*k. At band minima (k*eps = 2*pi*n) the value tends to
/// 0 for every alpha in (1, 2]; u == 0 is returned as that limit so the
/// function stays total.
inline double group_velocity(const HybridParams& p, double k) {
    double theta = 0.5 * k * p.eps();
    double u = p.amplitude() * std::sin(theta);
    if (u == 0.0) return 0.0;
    double dudk = p.amplitude() * 0.5 * p.eps() * std::cos(theta);
    double mag = p.alpha * p.d_alpha() * std::pow(std::abs(u), p.alpha - 1.0);
    return mag * (u > 0.0 ? 1.0 : -1.0) * dudk / p.hbar;
}

struct EffectiveMass {
    double value;
    // Set when |E''| < 1e-14 (band inflection, value +inf) or when E'' blows
    // up at an alpha < 2 band minimum (value 0); either way no finite nonzero
    // mass exists at that k.
    bool infinite;
};

/// hbar^2 / E''(k); negative between inflection and band top.
inline EffectiveMass effective_mass(const HybridParams& p, double k) {
    double eps = p.eps();
    double theta = 0.5 * k * eps;
    double u = p.amplitude() * std::sin(theta);
    double dudk = p.amplitude() * 0.5 * eps * std::cos(theta);
    double au = std::abs(u);
    if (au == 0.0 && p.alpha < 2.0) return {0.0, true};
    double d2 = p.alpha * p.d_alpha() *
                ((p.alpha - 1.0) * std::pow(au, p.alpha - 2.0) * dudk * dudk -
                 0.25 * eps * eps * std::pow(au, p.alpha));
    if (std::abs(d2) < 1e-14) return {std::numeric_limits<double>::infinity(), true};
    return {p.hbar * p.hbar / d2, false};
}

struct CommutatorMultiplier {
    double value;
    bool divergent;
};

/// M(p) = (alpha/2) * |u|^{alpha/2-1} * cos(p*eps/(2*hbar)), magnitude-based
/// power. For alpha = 2 this is exactly cos(p*eps/(2*hbar)). For alpha < 2
/// the value diverges like |p|^{alpha/2-1} as p -> 0; exact zeros of u come
/// back flagged.
inline CommutatorMultiplier commutator_multiplier(const HybridParams& p, double momentum) {
    double theta = 0.5 * momentum * p.eps() / p.hbar;
    double u = p.amplitude() * std::sin(theta);
    double v = 0.5 * p.alpha * std::pow(std::abs(u), 0.5 * p.alpha - 1.0) * std::cos(theta);
    return {v, !std::isfinite(v)};
}

struct SymbolDerivative {
    double value;
    bool divergent;
};

/// d(hybrid_symbol)/dp at wavenumber k, p = hbar*k. On the principal band
/// this equals (eps/(q-1)) * commutator_multiplier(hbar*k); the extra slope
/// factor eps/(q-1) is what makes this, and not M alone, the exact multiplier
/// of the position-momentum commutator. At alpha = 2 band minima away from
/// the origin the magnitude power has a corner; the symmetric average 0 is
/// returned there.
inline SymbolDerivative hybrid_symbol_derivative(const HybridParams& p, double k) {
    double eps = p.eps();
    double theta = 0.5 * k * eps;
    double u = p.amplitude() * std::sin(theta);
    double dudp = p.amplitude() * 0.5 * eps * std::cos(theta) / p.hbar;
    if (k == 0.0) {
        if (p.alpha == 2.0) return {dudp, false};
        return {std::numeric_limits<double>::infinity(), true};
    }
    if (u == 0.0) {
        if (p.alpha == 2.0) return {0.0, false};
        return {std::numeric_limits<double>::infinity(), true};
    }
    double s = ((u > 0.0) == (k > 0.0)) ? 1.0 : -1.0;
    double v = 0.5 * p.alpha * std::pow(std::abs(u), 0.5 * p.alpha - 1.0) * s * dudp;
    return {v, !std::isfinite(v)};
}

struct LimitSymbols {
    std::vector<double> sqm;        // hbar * k
    std::vector<double> fractional; // hbar^{alpha/2} |k|^{alpha/2} sgn(k), the q -> 1 limit
    std::vector<double> deformed;   // (2*hbar/(q-1)) sin(k*eps/2), the signed alpha = 2 form
};

inline LimitSymbols limit_symbols(const HybridParams& p, const std::vector<double>& k) {
    LimitSymbols out;
    out.sqm.reserve(k.size());
    out.fractional.reserve(k.size());
    out.deformed.reserve(k.size());
    for (double kk : k) {
        out.sqm.push_back(p.hbar * kk);
        double sgn = kk > 0.0 ? 1.0 : (kk < 0.0 ? -1.0 : 0.0);
        out.fractional.push_back(std::pow(p.hbar * std::abs(kk), 0.5 * p.alpha) * sgn);
        out.deformed.push_back(band_coordinate(p, kk));
    }
    return out;
}

} // namespace hybridqm::symbols
