#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "hybridqm/fit.hpp"
#include "hybridqm/operators.hpp"
#include "hybridqm/special.hpp"

namespace hybridqm {

enum class Splitting { exact_free, strang };

struct EvolutionConfig {
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t record_every = 1;
    Splitting splitting = Splitting::exact_free;
};

/// Observables sampled along one evolution; arrays share indexing with times.
/// autocorr is fidelity squared. Immutable once produced.
struct EvolutionTrace {
    std::vector<double> times;
    std::vector<double> fidelity;
    std::vector<double> bures_angle;
    std::vector<double> mean_x;
    std::vector<double> mean_vg;
    std::vector<double> energy_mean;
    std::vector<double> energy_var;
    std::vector<double> norm;
    std::vector<double> autocorr;
    std::vector<double> mean_p_hybrid;
    std::vector<double> mean_force;
    std::optional<WaveFunction> final_state;
};

struct QslReport {
    double delta_H = 0.0;
    double var_K = 0.0;
    double var_V = 0.0;
    double cov_KV = 0.0;
    double mt_bound = 0.0;
    double ml_mean_energy = 0.0;
    double ml_bound = 0.0;
    std::optional<double> t_perp_measured;
    bool mt_integral_ok = false;
};

struct EhrenfestResult {
    double max_residual_x = 0.0;
    bool pass = false;
};

struct MomentumForceResult {
    double max_residual_p = 0.0;
    bool pass = false;
};

namespace dynamics {
namespace detail {

inline bool is_free(const Potential* v) {
    if (!v) return true;
    for (double s : v->samples)
        if (s != 0.0) return false;
    return true;
}

inline void validate(const EvolutionConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
        throw config_error("evolve: dt must be positive and finite, got " +
                           std::to_string(cfg.dt));
    if (cfg.n_steps == 0) throw config_error("evolve: n_steps must be at least 1");
    if (cfg.record_every == 0) throw config_error("evolve: record_every must be at least 1");
}

// Spectral expectation of a real multiplier against |spectrum|^2 dk.
inline double spectral_mean(const SpectralField& f, const std::vector<double>& sym,
                            double* second = nullptr) {
    const auto& spec = f.spectrum();
    double w = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t m = 0; m < spec.size(); ++m) {
        double ww = std::norm(spec[m]);
        w += ww;
        s1 += ww * sym[m];
        if (second) s2 += ww * sym[m] * sym[m];
    }
    if (second) *second = s2 / w;
    return s1 / w;
}

inline void record(EvolutionTrace& tr, const HybridOperatorSet& ops, const Potential* v,
                   const SpectralField& psi0, const SpectralField& psi, double t) {
    const Grid1D& g = *ops.grid;
    double n = norm(psi);
    cplx overlap = inner_product(psi0, psi);
    // the initial record measures the state against itself; quadrature
    // roundoff there would get amplified to ~1e-8 by acos near 1
    double fid = t == 0.0 ? 1.0 : std::min(std::abs(overlap), 1.0);

    const auto& pos = psi.position();
    double w = 0.0, sx = 0.0;
    for (std::size_t j = 0; j < g.n(); ++j) {
        double ww = std::norm(pos[j]);
        w += ww;
        sx += ww * g.x()[j];
    }

    SpectralField hpsi = v ? operators::apply_hamiltonian(ops, *v, WaveFunction{psi})
                           : operators::apply_kinetic(ops, WaveFunction{psi});
    double n2 = n * n;
    double e_mean = std::real(inner_product(psi, hpsi)) / n2;
    double h_ms = norm(hpsi);
    double e_var = std::max(h_ms * h_ms / n2 - e_mean * e_mean, 0.0);

    double f_mean = 0.0;
    if (v && !is_free(v)) {
        SpectralField fpsi = operators::force_field(ops, *v, WaveFunction{psi});
        f_mean = std::real(inner_product(psi, fpsi)) / n2;
    }

    tr.times.push_back(t);
    tr.fidelity.push_back(fid);
    tr.bures_angle.push_back(std::acos(fid));
    tr.mean_x.push_back(sx / w);
    tr.mean_vg.push_back(spectral_mean(psi, ops.vg_symbol));
    tr.energy_mean.push_back(e_mean);
    tr.energy_var.push_back(e_var);
    tr.norm.push_back(n);
    tr.autocorr.push_back(fid * fid);
    tr.mean_p_hybrid.push_back(spectral_mean(psi, ops.pi_symbol));
    tr.mean_force.push_back(f_mean);
}

inline void check_norm(double n, double t) {
    if (std::abs(n - 1.0) > 1e-6)
        throw numeric_error("evolve: norm drifted to " + std::to_string(n) + " at t = " +
                            std::to_string(t));
}

} // namespace detail

/// Free evolution applies one diagonal phase per record point, straight from
/// the initial spectrum, so its only error is roundoff. The split propagator
/// alternates half-potential and full-kinetic phases (global error O(dt^2)).
inline EvolutionTrace evolve(const WaveFunction& psi0, const HybridOperatorSet& ops,
                             const Potential* v, const EvolutionConfig& cfg) {
    detail::validate(cfg);
    operators::require_same_grid(ops, psi0);
    if (v && v->samples.size() != ops.grid->n())
        throw shape_error("evolve: potential sampled on a different grid");
    psi0.require_normalized("evolve");

    const Grid1D& g = *ops.grid;
    const double hbar = ops.params.hbar;
    EvolutionTrace tr;

    if (cfg.splitting == Splitting::exact_free) {
        if (!detail::is_free(v))
            throw config_error("evolve: exact_free needs an identically zero potential");
        const auto& spec0 = psi0.field.spectrum();
        std::vector<std::size_t> stops;
        for (std::size_t s = cfg.record_every; s < cfg.n_steps; s += cfg.record_every)
            stops.push_back(s);
        stops.push_back(cfg.n_steps);
        std::vector<cplx> work(g.n());
        SpectralField cur = psi0.field;
        detail::record(tr, ops, v, psi0.field, cur, 0.0);
        for (std::size_t step : stops) {
            double t = double(step) * cfg.dt;
            for (std::size_t m = 0; m < g.n(); ++m)
                work[m] = spec0[m] * std::polar(1.0, -ops.kinetic_sym[m] * t / hbar);
            cur = SpectralField::from_spectrum(ops.grid, work);
            detail::check_norm(norm(cur), t);
            detail::record(tr, ops, v, psi0.field, cur, t);
        }
        tr.final_state = WaveFunction{std::move(cur)};
        return tr;
    }

    std::vector<cplx> half_v(g.n(), cplx(1.0, 0.0));
    if (v)
        for (std::size_t j = 0; j < g.n(); ++j)
            half_v[j] = std::polar(1.0, -0.5 * v->samples[j] * cfg.dt / hbar);
    std::vector<cplx> full_k(g.n());
    for (std::size_t m = 0; m < g.n(); ++m)
        full_k[m] = std::polar(1.0, -ops.kinetic_sym[m] * cfg.dt / hbar);

    SpectralField cur = psi0.field;
    detail::record(tr, ops, v, psi0.field, cur, 0.0);
    for (std::size_t step = 1; step <= cfg.n_steps; ++step) {
        std::vector<cplx> pos = cur.position();
        for (std::size_t j = 0; j < g.n(); ++j) pos[j] *= half_v[j];
        SpectralField mid = SpectralField::from_position(ops.grid, std::move(pos));
        std::vector<cplx> spec = mid.spectrum();
        for (std::size_t m = 0; m < g.n(); ++m) spec[m] *= full_k[m];
        SpectralField kicked = SpectralField::from_spectrum(ops.grid, std::move(spec));
        pos = kicked.position();
        for (std::size_t j = 0; j < g.n(); ++j) pos[j] *= half_v[j];
        cur = SpectralField::from_position(ops.grid, std::move(pos));
        if (step % cfg.record_every == 0 || step == cfg.n_steps) {
            double t = double(step) * cfg.dt;
            detail::check_norm(norm(cur), t);
            detail::record(tr, ops, v, psi0.field, cur, t);
        }
    }
    tr.final_state = WaveFunction{std::move(cur)};
    return tr;
}

namespace detail {

// Fidelity of free evolution at arbitrary t, evaluated straight from the
// initial spectrum. Used to refine t_perp between trace records.
inline double free_fidelity(const SpectralField& psi0, const HybridOperatorSet& ops, double t) {
    const auto& spec = psi0.spectrum();
    cplx acc{0.0, 0.0};
    for (std::size_t m = 0; m < spec.size(); ++m)
        acc += std::norm(spec[m]) * std::polar(1.0, -ops.kinetic_sym[m] * t / ops.params.hbar);
    double w = 0.0;
    for (const auto& z : spec) w += std::norm(z);
    return std::abs(acc) / w;
}

inline double refine_free_t_perp(const SpectralField& psi0, const HybridOperatorSet& ops,
                                 double lo, double hi) {
    // presample to isolate the local fidelity minimum, then golden-section
    const int presample = 200;
    double best_t = lo, best_f = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= presample; ++i) {
        double t = lo + (hi - lo) * double(i) / presample;
        double f = free_fidelity(psi0, ops, t);
        if (f < best_f) {
            best_f = f;
            best_t = t;
        }
    }
    double h = (hi - lo) / presample;
    double a = std::max(lo, best_t - h), b = std::min(hi, best_t + h);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = free_fidelity(psi0, ops, c), fd = free_fidelity(psi0, ops, d);
    for (int it = 0; it < 90 && (b - a) > 1e-13 * std::max(1.0, b); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = free_fidelity(psi0, ops, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = free_fidelity(psi0, ops, d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

inline QslReport qsl_report(const WaveFunction& psi0, const HybridOperatorSet& ops,
                            const Potential* v, const EvolutionTrace& trace,
                            double fid_threshold = 1e-3) {
    operators::require_same_grid(ops, psi0);
    if (trace.times.empty() || trace.fidelity.size() != trace.times.size())
        throw shape_error("qsl_report: trace is empty or inconsistently sized");
    psi0.require_normalized("qsl_report");
    const double hbar = ops.params.hbar;
    QslReport out;

    double k2 = 0.0;
    double k_mean = detail::spectral_mean(psi0.field, ops.kinetic_sym, &k2);
    out.var_K = std::max(k2 - k_mean * k_mean, 0.0);

    double v_mean = 0.0;
    if (v && !detail::is_free(v)) {
        const auto& pos = psi0.field.position();
        double w = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < pos.size(); ++j) {
            double ww = std::norm(pos[j]);
            w += ww;
            s1 += ww * v->samples[j];
            s2 += ww * v->samples[j] * v->samples[j];
        }
        v_mean = s1 / w;
        out.var_V = std::max(s2 / w - v_mean * v_mean, 0.0);
        SpectralField kpsi = operators::apply_kinetic(ops, psi0);
        std::vector<cplx> vpos = psi0.field.position();
        for (std::size_t j = 0; j < vpos.size(); ++j) vpos[j] *= v->samples[j];
        SpectralField vpsi = SpectralField::from_position(psi0.field.grid(), std::move(vpos));
        double n0 = norm(psi0.field);
        out.cov_KV = std::real(inner_product(kpsi, vpsi)) / (n0 * n0) - k_mean * v_mean;
    }

    double dh2 = out.var_K + out.var_V + 2.0 * out.cov_KV;
    out.delta_H = std::sqrt(std::max(dh2, 0.0));
    out.mt_bound = out.delta_H > 0.0 ? M_PI * hbar / (2.0 * out.delta_H)
                                     : std::numeric_limits<double>::infinity();

    double e0 = v ? v->lower_bound : 0.0;
    out.ml_mean_energy = k_mean + v_mean - e0;
    out.ml_bound = out.ml_mean_energy > 0.0 ? M_PI * hbar / (2.0 * out.ml_mean_energy)
                                            : std::numeric_limits<double>::infinity();

    out.mt_integral_ok = true;
    for (std::size_t i = 0; i < trace.times.size(); ++i)
        if (trace.bures_angle[i] > out.delta_H * trace.times[i] / hbar + 1e-9)
            out.mt_integral_ok = false;

    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        if (trace.fidelity[i] > fid_threshold) continue;
        if (i == 0) {
            out.t_perp_measured = trace.times[0];
            break;
        }
        if (detail::is_free(v)) {
            // bracket the discrete fidelity minimum, not the threshold crossing;
            // a fixed record offset can fall short of the minimum when the
            // below-threshold window spans more than a few record spacings
            std::size_t j = i;
            while (j + 1 < trace.times.size() && trace.fidelity[j + 1] < trace.fidelity[j]) ++j;
            double lo = trace.times[j - 1];
            double hi = trace.times[std::min(j + 1, trace.times.size() - 1)];
            out.t_perp_measured = detail::refine_free_t_perp(psi0.field, ops, lo, hi);
        } else {
            double f0 = trace.fidelity[i - 1], f1 = trace.fidelity[i];
            double frac = f0 > f1 ? (f0 - fid_threshold) / (f0 - f1) : 1.0;
            out.t_perp_measured = trace.times[i - 1] + frac * (trace.times[i] - trace.times[i - 1]);
        }
        break;
    }
    return out;
}

/// Closed-form small-deformation estimate of the orthogonalization time of a
/// width-sigma Gaussian under the mean-energy bound.
inline double ml_gaussian_prediction(const HybridParams& params, double sigma) {
    if (!(sigma > 0.0))
        throw config_error("ml_gaussian_prediction: sigma must be positive, got " +
                           std::to_string(sigma));
    double m = params.mass, hbar = params.hbar;
    double e = params.eps(), d = params.delta();
    double s2 = sigma * sigma;
    double arg = 1.5 + m * m * s2 * s2 / (hbar * hbar);
    double bracket = 1.0 + e * e * hbar * hbar / (24.0 * m * m * s2 * s2) -
                     0.25 * d * special::digamma(arg);
    return M_PI * m * s2 / hbar * bracket;
}

namespace detail {

inline void require_dense(const EvolutionTrace& tr) {
    if (tr.times.size() < 3)
        throw config_error("trace check: need at least 3 records, got " +
                           std::to_string(tr.times.size()));
    for (std::size_t i = 1; i < tr.times.size(); ++i)
        if (tr.times[i] - tr.times[i - 1] > 0.1 + 1e-12)
            throw config_error("trace check: record spacing " +
                               std::to_string(tr.times[i] - tr.times[i - 1]) +
                               " too sparse to resolve time derivatives");
}

// Centered finite-difference residuals of dy/dt against the recorded rate,
// relative to the rate scale; falls back to an absolute drift test when the
// rate is identically zero (stationary states).
template <typename Rate>
inline std::pair<double, bool> fd_residual(const EvolutionTrace& tr,
                                           const std::vector<double>& y, Rate rate) {
    require_dense(tr);
    double scale = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        scale = std::max(scale, std::abs(rate(i)));
    if (scale < 1e-10) {
        double drift = 0.0;
        for (double v : y) drift = std::max(drift, std::abs(v - y.front()));
        return {drift, drift <= 1e-8};
    }
    double dt_rec = tr.times[1] - tr.times[0];
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < tr.times.size(); ++i) {
        double span = tr.times[i + 1] - tr.times[i - 1];
        if (std::abs(span - 2.0 * dt_rec) > 1e-9 * std::max(1.0, span)) continue;
        double fd = (y[i + 1] - y[i - 1]) / span;
        worst = std::max(worst, std::abs(fd - rate(i)) / scale);
    }
    double tol = std::max(1e-3, 10.0 * dt_rec * dt_rec);
    return {worst, worst <= tol};
}

} // namespace detail

inline EhrenfestResult ehrenfest_check(const EvolutionTrace& trace) {
    auto [res, ok] = detail::fd_residual(trace, trace.mean_x,
                                         [&](std::size_t i) { return trace.mean_vg[i]; });
    return {res, ok};
}

inline MomentumForceResult momentum_force_check(const EvolutionTrace& trace) {
    auto [res, ok] = detail::fd_residual(trace, trace.mean_p_hybrid,
                                         [&](std::size_t i) { return trace.mean_force[i]; });
    return {res, ok};
}

/// Column of the free propagator: evolve a grid delta (height 1/dx, so the
/// result approximates the continuum kernel G(x, t; x_src, 0)). A positive
/// source_width swaps the delta for a normalized Gaussian to tame the
/// Nyquist-edge ringing that otherwise buries algebraic tails.
inline std::vector<cplx> propagator_slice(const HybridOperatorSet& ops, double t,
                                          std::size_t x_source_index,
                                          double source_width = 0.0) {
    if (!(t >= 0.0) || !std::isfinite(t))
        throw config_error("propagator_slice: t must be finite and nonnegative, got " +
                           std::to_string(t));
    const Grid1D& g = *ops.grid;
    if (x_source_index >= g.n())
        throw config_error("propagator_slice: source index " + std::to_string(x_source_index) +
                           " outside grid of " + std::to_string(g.n()) + " points");
    std::vector<cplx> pos(g.n(), cplx(0.0, 0.0));
    if (source_width > 0.0) {
        double x_src = g.x()[x_source_index];
        double total = 0.0;
        std::vector<double> env(g.n());
        for (std::size_t j = 0; j < g.n(); ++j) {
            double u = (g.x()[j] - x_src) / source_width;
            env[j] = std::exp(-0.5 * u * u);
            total += env[j] * g.dx();
        }
        for (std::size_t j = 0; j < g.n(); ++j) pos[j] = env[j] / total;
    } else {
        pos[x_source_index] = 1.0 / g.dx();
    }
    SpectralField f = SpectralField::from_position(ops.grid, std::move(pos));
    std::vector<cplx> spec = f.spectrum();
    for (std::size_t m = 0; m < g.n(); ++m)
        spec[m] *= std::polar(1.0, -ops.kinetic_sym[m] * t / ops.params.hbar);
    return SpectralField::from_spectrum(ops.grid, std::move(spec)).position();
}

inline AutocorrFit fit_autocorrelation(const EvolutionTrace& trace) {
    return fit::fit_series(trace.times, trace.autocorr);
}

} // namespace dynamics
} // namespace hybridqm
