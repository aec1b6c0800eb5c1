#pragma once

#include <cmath>

#include "hybridqm/params.hpp"
#include "hybridqm/states.hpp"
#include "hybridqm/uncertainty.hpp"

namespace hybridqm {

/// Weak-deformation series, kept verbatim as published so the exact spectral
/// computations can arbitrate them. The log terms make some of these
/// unit-system dependent (they carry ln(2m) and ln(|p|/p_ref) at face value).
struct ExpansionInput {
    double eps = 0.0;
    double delta = 0.0;
    MomentSet moments;
    double mass = 1.0;
    double hbar = 1.0;

    static ExpansionInput from(const HybridParams& p, const MomentSet& m) {
        return {p.eps(), p.delta(), m, p.mass, p.hbar};
    }

    bool in_regime() const { return std::abs(eps) <= 0.5 && delta >= 0.0 && delta <= 0.5; }

    bool gaussian_moments() const {
        double vp = moments.var_p_std;
        if (!(vp > 0.0)) return false;
        double g4 = 3.0 * vp * vp;
        double g6 = 15.0 * vp * vp * vp;
        return std::abs(moments.p4 - g4) <= 0.05 * g4 && std::abs(moments.p6 - g6) <= 0.05 * g6;
    }
};

namespace expansions {

/// Published dispersion series. Its eps^2 bracket uses the printed 7/12; the
/// exact symbol expands with 5/12 there, so series-vs-exact gaps close at
/// O(eps^2), not the claimed O(eps^3). Tests record the measured order.
inline double dispersion_series(const ExpansionInput& inp, double p) {
    double e = inp.eps, d = inp.delta;
    double bracket = 1.0 - e +
                     e * e * (7.0 / 12.0 - p * p / (12.0 * inp.hbar * inp.hbar)) +
                     0.5 * d * std::log(2.0 * inp.mass) + 0.5 * d * e;
    return p * p / (2.0 * inp.mass) * bracket;
}

struct EnergyVarianceSeries {
    double general = 0.0;             // covariance chain on raw <p^4>, <p^6>
    double gaussian_substituted = 0.0; // printed closed form in (dp)^2
    bool gaussian_regime = false;
};

inline EnergyVarianceSeries energy_variance_series(const ExpansionInput& inp) {
    double e = inp.eps, d = inp.delta;
    double m = inp.mass, h2 = inp.hbar * inp.hbar;
    double c2 = (1.0 - e + e * e * (7.0 / 12.0) + 0.5 * d * std::log(2.0 * m) + 0.5 * d * e) /
                (2.0 * m);
    double c4 = -e * e / (24.0 * m * h2);
    double var_p2 = inp.moments.p4 - inp.moments.p2 * inp.moments.p2;
    double cov_p2_p4 = inp.moments.p6 - inp.moments.p2 * inp.moments.p4;
    EnergyVarianceSeries out;
    out.general = c2 * c2 * var_p2 + 2.0 * c2 * c4 * cov_p2_p4;
    double vp = inp.moments.var_p_std;
    out.gaussian_substituted = vp * vp / (2.0 * m * m) * (1.0 - 0.5 * e * e * vp / h2);
    out.gaussian_regime = inp.gaussian_moments();
    return out;
}

/// Orthogonalization-time series tau_QM * bracket with
/// tau_QM = pi m hbar/(2 (dp)^2).
inline double qsl_series(const ExpansionInput& inp) {
    double vp = inp.moments.var_p_std;
    if (!(vp > 0.0))
        throw numeric_error("qsl_series: need (dp)^2 > 0, got " + std::to_string(vp));
    double bracket = 1.0 - inp.eps * inp.eps / 6.0 * inp.moments.p4 / (vp * vp) +
                     0.5 * inp.delta * inp.moments.log_p / vp;
    return M_PI * inp.mass * inp.hbar / (2.0 * vp) * bracket;
}

inline double uncertainty_series(const ExpansionInput& inp, ExpansionVariant variant) {
    return uncertainty::expanded_bound_core(inp.moments, inp.eps, inp.delta, inp.hbar, variant);
}

} // namespace expansions
} // namespace hybridqm
