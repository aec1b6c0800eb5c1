#pragma once

#include <cmath>
#include <string>

#include "hybridqm/errors.hpp"

namespace hybridqm {

/// Deformation parameters (q, alpha) plus physical scales.
///
/// q = 1 exactly is degenerate for every formula with a (q-1) denominator;
/// the standard-QM limit is approached through q = 1 +/- eta, eta >= 1e-10.
struct HybridParams {
    double q;
    double alpha;
    double hbar;
    double mass;

    HybridParams(double q_, double alpha_, double hbar_ = 1.0, double mass_ = 1.0)
        : q(q_), alpha(alpha_), hbar(hbar_), mass(mass_) {
        if (!std::isfinite(q) || q <= 0.0)
            throw config_error("params.q: need a finite value > 0, got " + std::to_string(q));
        if (std::abs(q - 1.0) < 1e-10)
            throw config_error("params.q: q = 1 is degenerate; approach the limit with "
                               "q = 1 +/- eta, eta >= 1e-10");
        if (!std::isfinite(alpha) || alpha <= 1.0 || alpha > 2.0)
            throw config_error("params.alpha: need a value in (1, 2], got " +
                               std::to_string(alpha));
        if (!std::isfinite(hbar) || hbar <= 0.0)
            throw config_error("params.hbar: need a finite value > 0, got " +
                               std::to_string(hbar));
        if (!std::isfinite(mass) || mass <= 0.0)
            throw config_error("params.mass: need a finite value > 0, got " +
                               std::to_string(mass));
    }

    double eps() const { return std::log(q); }
    double delta() const { return 2.0 - alpha; }
    double d_alpha() const { return std::pow(2.0 * mass, -0.5 * alpha); }
    double e_max() const { return d_alpha() * std::pow(2.0 * hbar / std::abs(q - 1.0), alpha); }

    bool near_degenerate() const { return std::abs(q - 1.0) < 1e-6; }

    // 2*hbar/(q-1), the prefactor of sin(k*eps/2). The near-degenerate branch
    // rebuilds q-1 as expm1(eps) so the prefactor stays consistent with eps()
    // under cancellation.
    double amplitude() const {
        double qm1 = near_degenerate() ? std::expm1(eps()) : (q - 1.0);
        return 2.0 * hbar / qm1;
    }
};

} // namespace hybridqm
