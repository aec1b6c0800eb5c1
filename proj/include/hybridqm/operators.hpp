#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "hybridqm/errors.hpp"
#include "hybridqm/params.hpp"
#include "hybridqm/potential.hpp"
#include "hybridqm/spectral.hpp"
#include "hybridqm/states.hpp"
#include "hybridqm/symbols.hpp"

namespace hybridqm {

/// All spectral multipliers of one (params, grid) pairing, sampled once.
/// Immutable after build; share freely across threads.
struct HybridOperatorSet {
    HybridParams params;
    GridPtr grid;
    std::vector<double> pi_symbol;
    std::vector<double> kinetic_sym;
    std::vector<double> vg_symbol;
    std::vector<double> m_symbol;
};

namespace operators {

// The k = 0 bin of a |u|^{alpha/2-1}-type multiplier holds the average of the
// integrable singularity over its own cell, |u| ~ hbar*J*|k| with
// J = eps/(q-1); elsewhere an exact band-minimum hit gets the same treatment
// with the local slope sign.
inline double singular_bin_average(const HybridParams& p, double dk) {
    double jac = p.near_degenerate() ? p.eps() / std::expm1(p.eps()) : p.eps() / (p.q - 1.0);
    return std::pow(std::abs(p.hbar * jac) * 0.5 * dk, 0.5 * p.alpha - 1.0);
}

inline HybridOperatorSet build_operators(const HybridParams& params, GridPtr grid) {
    double abs_eps = std::abs(params.eps());
    if (abs_eps * grid->k_max_abs() > M_PI) {
        double dk_needed = 2.0 * M_PI / (16.0 * abs_eps);
        if (grid->dk() > dk_needed) {
            std::size_t n = grid->n();
            double span_needed = 16.0 * abs_eps;
            std::size_t suggest = n;
            while (suggest * grid->dx() < span_needed) suggest <<= 1;
            throw config_error(
                "operators: grid cannot resolve the principal band (dk = " +
                std::to_string(grid->dk()) + ", need <= " + std::to_string(dk_needed) +
                "); at this dx use n_points >= " + std::to_string(suggest));
        }
    }
    HybridOperatorSet ops{params, grid, {}, {}, {}, {}};
    std::size_t n = grid->n();
    ops.pi_symbol.resize(n);
    ops.kinetic_sym.resize(n);
    ops.vg_symbol.resize(n);
    ops.m_symbol.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        double k = grid->k()[m];
        ops.pi_symbol[m] = symbols::hybrid_symbol(params, k);
        ops.kinetic_sym[m] = symbols::kinetic_symbol(params, k);
        ops.vg_symbol[m] = symbols::group_velocity(params, k);
        auto mult = symbols::commutator_multiplier(params, params.hbar * k);
        if (mult.divergent) {
            double theta = 0.5 * k * params.eps();
            double sign = std::cos(theta) < 0.0 ? -1.0 : 1.0;
            ops.m_symbol[m] = sign * singular_bin_average(params, grid->dk());
        } else {
            ops.m_symbol[m] = mult.value;
        }
    }
    return ops;
}

/// d(hybrid_symbol)/dp on the k grid, singular k = 0 bin cell-averaged the
/// same way as m_symbol. This is the exact commutator multiplier; see
/// symbols::hybrid_symbol_derivative.
inline std::vector<double> pi_derivative_symbol(const HybridParams& params, const Grid1D& grid) {
    std::vector<double> out(grid.n());
    double jac = params.near_degenerate() ? params.eps() / std::expm1(params.eps())
                                          : params.eps() / (params.q - 1.0);
    for (std::size_t m = 0; m < grid.n(); ++m) {
        auto d = symbols::hybrid_symbol_derivative(params, grid.k()[m]);
        out[m] = d.divergent ? jac * singular_bin_average(params, grid.dk()) : d.value;
    }
    return out;
}

inline void require_same_grid(const HybridOperatorSet& ops, const WaveFunction& psi) {
    if (ops.grid.get() != psi.field.grid().get())
        throw shape_error("operators: state and operator set live on different grids");
}

inline SpectralField apply_momentum(const HybridOperatorSet& ops, const WaveFunction& psi) {
    require_same_grid(ops, psi);
    return apply_multiplier(psi.field, ops.pi_symbol);
}

inline SpectralField apply_kinetic(const HybridOperatorSet& ops, const WaveFunction& psi) {
    require_same_grid(ops, psi);
#ifdef HYBRIDQM_FAULT_INJECT_KINETIC
    // deliberately non-Hermitian multiplier; exists so the self-test suite
    // can prove the Hermiticity check has teeth
    std::vector<cplx> bad(ops.kinetic_sym.size());
    for (std::size_t m = 0; m < bad.size(); ++m)
        bad[m] = cplx(ops.kinetic_sym[m], 1e-3 * ops.kinetic_sym[m]);
    return apply_multiplier(psi.field, bad);
#else
    return apply_multiplier(psi.field, ops.kinetic_sym);
#endif
}

inline SpectralField apply_hamiltonian(const HybridOperatorSet& ops, const Potential& v,
                                       const WaveFunction& psi) {
    require_same_grid(ops, psi);
    if (v.samples.size() != ops.grid->n())
        throw shape_error("operators: potential sampled on a different grid");
    SpectralField kin = apply_kinetic(ops, psi);
    std::vector<cplx> out = kin.position();
    const std::vector<cplx>& pos = psi.field.position();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v.samples[j] * pos[j];
    return SpectralField::from_position(ops.grid, std::move(out));
}

struct CommutatorField {
    SpectralField field;
    double leak;
    bool reliable; // false when the state touches the box edge; x-weighting
                   // is then contaminated by the periodic wrap
};

/// (x p - p x) psi by mixed-representation application.
inline CommutatorField commutator_x_p(const HybridOperatorSet& ops, const WaveFunction& psi) {
    require_same_grid(ops, psi);
    const Grid1D& g = *ops.grid;
    std::vector<cplx> x_p = apply_multiplier(psi.field, ops.pi_symbol).position();
    std::vector<cplx> xpsi = psi.field.position();
    for (std::size_t j = 0; j < g.n(); ++j) {
        x_p[j] *= g.x()[j];
        xpsi[j] *= g.x()[j];
    }
    SpectralField p_x = apply_multiplier(SpectralField::from_position(ops.grid, std::move(xpsi)),
                                         ops.pi_symbol);
    const std::vector<cplx>& px = p_x.position();
    for (std::size_t j = 0; j < g.n(); ++j) x_p[j] -= px[j];
    double leak = states::boundary_leak(psi);
    return {SpectralField::from_position(ops.grid, std::move(x_p)), leak, leak <= 1e-8};
}

/// || p_beta p_gamma psi - p_{beta+gamma} psi ||. Zero up to roundoff on
/// positive-band states; on negative-k support the sign convention makes it
/// exactly 2 || p_{beta+gamma} (restriction) ||, reported not asserted.
inline double semigroup_remainder(const HybridParams& params, const GridPtr& grid, double beta,
                                  double gamma, const WaveFunction& psi) {
    if (psi.field.grid().get() != grid.get())
        throw shape_error("operators: state and grid disagree");
    if (!(beta > 0.0) || !(gamma > 0.0) || !(beta + gamma <= 2.0))
        throw config_error("semigroup: need beta > 0, gamma > 0, beta + gamma <= 2, got beta = " +
                           std::to_string(beta) + ", gamma = " + std::to_string(gamma));
    const std::vector<cplx>& spec = psi.field.spectrum();
    double acc = 0.0;
    for (std::size_t m = 0; m < grid->n(); ++m) {
        double k = grid->k()[m];
        double composed = symbols::momentum_symbol(params.q, params.hbar, beta, k) *
                          symbols::momentum_symbol(params.q, params.hbar, gamma, k);
        double direct = symbols::momentum_symbol(params.q, params.hbar, beta + gamma, k);
        double diff = composed - direct;
        acc += diff * diff * std::norm(spec[m]);
    }
    return std::sqrt(acc * grid->dk());
}

/// F psi = (i/hbar) (V (p psi) - p (V psi)); reduces to -V'(x) psi in the
/// standard limit, the classical force on the packet.
inline SpectralField force_field(const HybridOperatorSet& ops, const Potential& v,
                                 const WaveFunction& psi) {
    require_same_grid(ops, psi);
    const Grid1D& g = *ops.grid;
    if (v.samples.size() != g.n())
        throw shape_error("operators: potential sampled on a different grid");
    std::vector<cplx> v_ppsi = apply_multiplier(psi.field, ops.pi_symbol).position();
    std::vector<cplx> vpsi = psi.field.position();
    for (std::size_t j = 0; j < g.n(); ++j) {
        v_ppsi[j] *= v.samples[j];
        vpsi[j] *= v.samples[j];
    }
    SpectralField p_vpsi = apply_multiplier(SpectralField::from_position(ops.grid, std::move(vpsi)),
                                            ops.pi_symbol);
    const std::vector<cplx>& pv = p_vpsi.position();
    cplx scale(0.0, 1.0 / ops.params.hbar);
    for (std::size_t j = 0; j < g.n(); ++j) v_ppsi[j] = scale * (v_ppsi[j] - pv[j]);
    return SpectralField::from_position(ops.grid, std::move(v_ppsi));
}

/// One column of the kinetic kernel: K applied to the unit impulse at
/// x_index. Visualizes the operator's non-locality.
inline std::vector<cplx> kernel_column(const HybridOperatorSet& ops, std::size_t x_index) {
    if (x_index >= ops.grid->n())
        throw config_error("kernel_column: index " + std::to_string(x_index) +
                           " out of range for " + std::to_string(ops.grid->n()) + " points");
    std::vector<cplx> impulse(ops.grid->n(), cplx(0.0, 0.0));
    impulse[x_index] = 1.0;
    SpectralField f = SpectralField::from_position(ops.grid, std::move(impulse));
    return apply_multiplier(f, ops.kinetic_sym).position();
}

} // namespace operators
} // namespace hybridqm
