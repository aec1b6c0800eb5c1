#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hybridqm/errors.hpp"
#include "hybridqm/params.hpp"
#include "hybridqm/spectral.hpp"
#include "hybridqm/symbols.hpp"

namespace hybridqm {

/// Normalized state on a grid. Construction routines normalize exactly;
/// evolution re-checks against norm_tolerance after every step.
struct WaveFunction {
    SpectralField field;
    double norm_tolerance = 1e-10;

    double norm() const { return hybridqm::norm(field); }

    void require_normalized(const std::string& where) const {
        double n = norm();
        if (std::abs(n - 1.0) > norm_tolerance)
            throw numeric_error(where + ": norm drifted to " + std::to_string(n));
    }
};

/// Moments of one state against one parameter set. p2/p4/p6 are raw moments
/// of the canonical momentum hbar*k; the hybrid pair refers to the deformed
/// symbol. Log moments skip the k = 0 bin (the integrand has a pole there);
/// log_reliable reports whether the skipped weight was negligible.
struct MomentSet {
    double mean_x = 0.0, var_x = 0.0;
    double mean_p_std = 0.0, var_p_std = 0.0;
    double p2 = 0.0, p4 = 0.0, p6 = 0.0;
    double mean_p_hybrid = 0.0, var_p_hybrid = 0.0;
    double log_p = 0.0, log_p_weighted = 0.0;
    double p_ref = 1.0;
    double zero_mode_weight = 0.0;
    bool log_reliable = true;
};

namespace states {

/// exp(-(x-x0)^2/(4 sigma^2) + i k0 x), normalized on the grid. sigma is the
/// position spread: var_x = sigma^2, var_p_std = hbar^2/(4 sigma^2).
inline WaveFunction gaussian(GridPtr grid, double center_x, double center_k, double sigma) {
    double dx = grid->dx();
    double box = grid->x_max() - grid->x_min();
    if (!(sigma >= 4.0 * dx))
        throw config_error("state.sigma: need sigma >= 4*dx = " + std::to_string(4.0 * dx) +
                           " for a resolvable packet, got " + std::to_string(sigma));
    if (!(sigma <= box / 8.0))
        throw config_error("state.sigma: need sigma <= box/8 = " + std::to_string(box / 8.0) +
                           " to stay clear of the periodic wrap, got " + std::to_string(sigma));
    std::vector<cplx> v(grid->n());
    double w2 = 0.0;
    for (std::size_t j = 0; j < grid->n(); ++j) {
        double x = grid->x()[j];
        double d = x - center_x;
        double a = std::exp(-d * d / (4.0 * sigma * sigma));
        v[j] = std::polar(a, center_k * x);
        w2 += a * a;
    }
    double scale = 1.0 / std::sqrt(w2 * dx);
    for (auto& z : v) z *= scale;
    return {SpectralField::from_position(std::move(grid), std::move(v))};
}

/// (exp(i k1 x) + exp(i phase) exp(i k2 x)) / sqrt(2 L): exactly two spectral
/// bins of equal weight. k1 and k2 must hit grid modes exactly.
inline WaveFunction two_mode_superposition(GridPtr grid, double k1, double k2, double phase) {
    auto mode_of = [&](double k, const char* label) {
        double ratio = k / grid->dk();
        long m = std::lround(ratio);
        if (std::abs(ratio - static_cast<double>(m)) > 1e-9)
            throw config_error(std::string("state.") + label + ": " + std::to_string(k) +
                               " is not a grid mode (nearest: " +
                               std::to_string(m * grid->dk()) + ")");
        long half = static_cast<long>(grid->n()) / 2;
        if (m < -half || m > half)
            throw config_error(std::string("state.") + label + ": mode " + std::to_string(m) +
                               " exceeds the grid's +/-" + std::to_string(half) + " range");
        return m;
    };
    long m1 = mode_of(k1, "k1");
    long m2 = mode_of(k2, "k2");
    if (grid->bin_of_mode(m1) == grid->bin_of_mode(m2))
        throw config_error("state.k2: the two modes coincide");
    std::vector<cplx> v(grid->n());
    double box = grid->x_max() - grid->x_min();
    double amp = 1.0 / std::sqrt(2.0 * box);
    cplx ph = std::polar(1.0, phase);
    for (std::size_t j = 0; j < grid->n(); ++j) {
        double x = grid->x()[j];
        v[j] = amp * (std::polar(1.0, k1 * x) + ph * std::polar(1.0, k2 * x));
    }
    SpectralField f = SpectralField::from_position(std::move(grid), std::move(v));
    double n = hybridqm::norm(f);
    // cross terms cancel exactly on distinct modes; rescaling only sweeps
    // out accumulated roundoff
    std::vector<cplx> pos = f.position();
    for (auto& z : pos) z /= n;
    f.set_position(std::move(pos));
    return {std::move(f)};
}

inline MomentSet moments(const WaveFunction& psi, const HybridParams& params, double p_ref) {
    if (!(p_ref > 0.0) || !std::isfinite(p_ref))
        throw config_error("moments.p_ref: need a finite value > 0, got " +
                           std::to_string(p_ref));
    const Grid1D& g = *psi.field.grid();
    const std::vector<cplx>& pos = psi.field.position();
    const std::vector<cplx>& spec = psi.field.spectrum();

    MomentSet out;
    out.p_ref = p_ref;

    double wx = 0.0, sx = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) {
        double w = std::norm(pos[j]);
        wx += w;
        sx += w * g.x()[j];
    }
    out.mean_x = sx / wx;
    double vx = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) {
        double d = g.x()[j] - out.mean_x;
        vx += std::norm(pos[j]) * d * d;
    }
    out.var_x = vx / wx;

    double wk = 0.0, sp = 0.0, spi = 0.0;
    for (std::size_t m = 0; m < g.n(); ++m) {
        double w = std::norm(spec[m]);
        wk += w;
        sp += w * params.hbar * g.k()[m];
        spi += w * symbols::hybrid_symbol(params, g.k()[m]);
    }
    out.mean_p_std = sp / wk;
    out.mean_p_hybrid = spi / wk;
    out.zero_mode_weight = std::norm(spec[0]) / wk;
    out.log_reliable = out.zero_mode_weight <= 1e-3;

    double vp = 0.0, vpi = 0.0, m2 = 0.0, m4 = 0.0, m6 = 0.0, lp = 0.0, lpw = 0.0;
    for (std::size_t m = 0; m < g.n(); ++m) {
        double w = std::norm(spec[m]);
        double p = params.hbar * g.k()[m];
        double dp = p - out.mean_p_std;
        double pi = symbols::hybrid_symbol(params, g.k()[m]);
        double dpi = pi - out.mean_p_hybrid;
        vp += w * dp * dp;
        vpi += w * dpi * dpi;
        double pp = p * p;
        m2 += w * pp;
        m4 += w * pp * pp;
        m6 += w * pp * pp * pp;
        if (m != 0) {
            double lg = std::log(std::abs(p) / p_ref);
            lp += w * lg;
            lpw += w * (pp / (params.hbar * params.hbar)) * lg;
        }
    }
    out.var_p_std = vp / wk;
    out.var_p_hybrid = vpi / wk;
    out.p2 = m2 / wk;
    out.p4 = m4 / wk;
    out.p6 = m6 / wk;
    out.log_p = lp / wk;
    out.log_p_weighted = lpw / wk;
    return out;
}

/// Mass fraction sitting in the outermost two cells on each side; states fed
/// to position-weighted operators should keep this negligible.
inline double boundary_leak(const WaveFunction& psi) {
    const std::vector<cplx>& pos = psi.field.position();
    std::size_t n = pos.size();
    double total = 0.0;
    for (const auto& z : pos) total += std::norm(z);
    double edge = std::norm(pos[0]) + std::norm(pos[1]) + std::norm(pos[n - 2]) +
                  std::norm(pos[n - 1]);
    return edge / total;
}

} // namespace states
} // namespace hybridqm
