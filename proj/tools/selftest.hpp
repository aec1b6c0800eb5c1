#pragma once

// End-to-end acceptance checks for the whole toolkit, one verdict per line.
// Every criterion either reproduces a closed-form oracle or verifies a
// structural property; each line prints deterministic numbers so repeat runs
// are byte-identical.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hybridqm/dynamics.hpp"
#include "hybridqm/expansions.hpp"
#include "hybridqm/fit.hpp"
#include "hybridqm/potential.hpp"
#include "hybridqm/states.hpp"
#include "hybridqm/uncertainty.hpp"

namespace hybridqm {
namespace selftest {

struct CriterionResult {
    int id = 0;
    const char* name = "";
    bool pass = false;
    std::string detail;
};

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline WaveFunction random_state(GridPtr grid, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cplx> v(grid->n());
    for (auto& z : v) z = cplx(u(rng), u(rng));
    SpectralField f = SpectralField::from_position(std::move(grid), std::move(v));
    double n = norm(f);
    std::vector<cplx> pos = f.position();
    for (auto& z : pos) z /= n;
    f.set_position(std::move(pos));
    return {std::move(f)};
}

inline double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

struct SharedTraces {
    // (initial state, operators, potential-or-null, trace) of every evolution
    // this suite records, for the pointwise angle-growth criterion
    std::vector<QslReport> reports;
    double exact_free_energy_drift = 0.0;
};

inline CriterionResult standard_limit(SharedTraces& shared) {
    auto g = Grid1D::make(1024, -32.0, 32.0);
    HybridParams p(1.0 + 1e-8, 2.0);
    auto ops = operators::build_operators(p, g);
    WaveFunction psi = states::gaussian(g, 0.0, 0.0, 1.0);
    auto rep = uncertainty::exact_bound(psi, ops, 1.0);
    bool ok = std::abs(rep.product - 0.5) <= 1e-5 && std::abs(rep.exact_bound - 0.5) <= 1e-5;

    double worst = 0.0;
    for (int t = 1; t <= 5; ++t) {
        EvolutionConfig cfg;
        cfg.dt = double(t);
        cfg.n_steps = 1;
        auto tr = dynamics::evolve(psi, ops, nullptr, cfg);
        MomentSet m = states::moments(*tr.final_state, p, 1.0);
        worst = std::max(worst, rel_gap(m.var_x, 1.0 + 0.25 * t * t));
    }
    ok = ok && worst <= 1e-4;

    EvolutionConfig cfg;
    cfg.dt = 0.5;
    cfg.n_steps = 10;
    auto tr = dynamics::evolve(psi, ops, nullptr, cfg);
    shared.reports.push_back(dynamics::qsl_report(psi, ops, nullptr, tr));
    double e0 = tr.energy_mean.front(), drift = 0.0;
    for (double e : tr.energy_mean) drift = std::max(drift, std::abs(e - e0));
    shared.exact_free_energy_drift = drift / std::abs(e0);

    return {1, "standard-limit recovery", ok,
            "product " + num(rep.product) + ", bound " + num(rep.exact_bound) +
                ", spreading max rel err " + num(worst)};
}

inline CriterionResult spectrum_bound() {
    auto g = Grid1D::make(256, -8.0, 8.0);
    std::mt19937 rng(20260822);
    double worst_low = 0.0, worst_head = 1.0;
    bool ok = true;
    for (double q : {1.2, 1.5, 2.0}) {
        for (double a : {1.2, 1.6, 2.0}) {
            HybridParams p(q, a);
            auto ops = operators::build_operators(p, g);
            for (int i = 0; i < 100; ++i) {
                WaveFunction psi = random_state(g, rng);
                const auto& spec = psi.field.spectrum();
                double w = 0.0, e = 0.0;
                for (std::size_t m = 0; m < g->n(); ++m) {
                    double ww = std::norm(spec[m]);
                    w += ww;
                    e += ww * ops.kinetic_sym[m];
                }
                e /= w;
                ok = ok && e >= 0.0 && e <= p.e_max() + 1e-12;
                worst_low = std::min(worst_low, e);
                worst_head = std::min(worst_head, (p.e_max() - e) / p.e_max());
            }
        }
    }
    return {2, "kinetic spectrum bound", ok,
            "900 states, min <K> " + num(worst_low) + ", min ceiling headroom " +
                num(worst_head)};
}

inline CriterionResult hermiticity() {
    auto g = Grid1D::make(256, -8.0, 8.0);
    Potential vh = potentials::harmonic(*g, 1.0, 1.0);
    std::mt19937 rng(7);
    double worst = 0.0;
    for (double q : {1.2, 1.5, 2.0}) {
        for (double a : {1.2, 1.6, 2.0}) {
            HybridParams p(q, a);
            auto ops = operators::build_operators(p, g);
            for (int i = 0; i < 100; ++i) {
                WaveFunction f = random_state(g, rng);
                WaveFunction h = random_state(g, rng);
                auto gap = [&](const SpectralField& af, const SpectralField& ah) {
                    return std::abs(inner_product(f.field, ah) - inner_product(af, h.field));
                };
                worst = std::max(worst, gap(operators::apply_momentum(ops, f),
                                            operators::apply_momentum(ops, h)));
                worst = std::max(worst, gap(operators::apply_kinetic(ops, f),
                                            operators::apply_kinetic(ops, h)));
                worst = std::max(worst, gap(operators::apply_hamiltonian(ops, vh, f),
                                            operators::apply_hamiltonian(ops, vh, h)));
                worst = std::max(worst, gap(operators::force_field(ops, vh, f),
                                            operators::force_field(ops, vh, h)));
            }
        }
    }
    return {3, "operator hermiticity", worst <= 1e-11,
            "worst symmetry gap " + num(worst) + " over 900 random pairs x 4 operators"};
}

inline CriterionResult commutator_form() {
    auto g = Grid1D::make(512, -16.0, 16.0);
    auto residual = [&](double alpha) {
        HybridParams p(1.0 + 1e-6, alpha);
        auto ops = operators::build_operators(p, g);
        WaveFunction psi = states::gaussian(g, 0.0, 5.0, 1.25);
        auto comm = operators::commutator_x_p(ops, psi);
        double jac = p.near_degenerate() ? p.eps() / std::expm1(p.eps())
                                         : p.eps() / (p.q - 1.0);
        std::vector<double> msym = operators::pi_derivative_symbol(p, *g);
        for (double& v : msym) v /= jac;
        const auto& lhs = comm.field.position();
        std::vector<cplx> rhs = apply_multiplier(psi.field, msym).position();
        double acc = 0.0;
        for (std::size_t j = 0; j < g->n(); ++j)
            acc += std::norm(lhs[j] - cplx(0.0, p.hbar) * rhs[j]);
        return std::sqrt(acc * g->dx());
    };
    double r2 = residual(2.0);
    double rf = residual(1.6);
    return {4, "commutator multiplier form", r2 <= 1e-6 && rf <= 1e-4,
            "cosine-form residual " + num(r2) + ", fractional-multiplier residual " + num(rf)};
}

inline CriterionResult uncertainty_sweep() {
    auto g = Grid1D::make(256, -12.0, 12.0);
    std::mt19937 rng(4242);
    std::uniform_real_distribution<double> u_eps(0.01, 1.0), u_a(1.1, 2.0), u_x(-2.0, 2.0),
        u_k(-2.0, 2.0), u_s(0.5, 2.0);
    double min_slack = 1e300;
    for (int i = 0; i < 500; ++i) {
        HybridParams p(std::exp(u_eps(rng)), u_a(rng));
        auto ops = operators::build_operators(p, g);
        WaveFunction psi = states::gaussian(g, u_x(rng), u_k(rng), u_s(rng));
        auto rep = uncertainty::exact_bound(psi, ops, 1.0);
        min_slack = std::min(min_slack, rep.slack);
    }
    return {5, "uncertainty product sweep", min_slack >= -1e-9,
            "500 random states, min slack " + num(min_slack)};
}

inline CriterionResult expansion_arbitration() {
    auto a = uncertainty::arbitrate_expansion();
    bool exactly_one = a.matches_theorem != a.matches_appendix;
    const char* winner = a.matches_appendix ? "-1/8 (appendix form)" : "+1/12 (theorem form)";
    return {6, "expansion coefficient arbitration", exactly_one,
            std::string("eps^2 coefficient ") + num(a.c2) + " matches " +
                (exactly_one ? winner : "neither candidate")};
}

inline void two_level_suite(SharedTraces& shared, CriterionResult& c7, CriterionResult& c9) {
    auto g = Grid1D::make(256, -16.0, 16.0);
    double worst_ratio = 0.0;
    bool ml_ok = true, perp_found = true;
    for (double q : {1.2, 1.5, 2.0}) {
        for (double a : {1.2, 1.6, 2.0}) {
            HybridParams p(q, a);
            auto ops = operators::build_operators(p, g);
            const long pairs[3][2] = {{8, 20}, {5, 13}, {3, 9}};
            long m1 = 8, m2 = 20;
            double de = 0.0;
            for (auto& pr : pairs) {
                double d = std::abs(ops.kinetic_sym[std::size_t(pr[1])] -
                                    ops.kinetic_sym[std::size_t(pr[0])]);
                if (d > de) {
                    de = d;
                    m1 = pr[0];
                    m2 = pr[1];
                }
            }
            WaveFunction psi = states::two_mode_superposition(
                g, double(m1) * g->dk(), double(m2) * g->dk(), 0.0);
            EvolutionConfig cfg;
            cfg.dt = 1.2 * M_PI / (de * 10000.0);
            cfg.n_steps = 10000;
            cfg.record_every = 2;
            auto tr = dynamics::evolve(psi, ops, nullptr, cfg);
            auto rep = dynamics::qsl_report(psi, ops, nullptr, tr);
            shared.reports.push_back(rep);
            if (!rep.t_perp_measured) {
                perp_found = false;
                continue;
            }
            worst_ratio = std::max(worst_ratio,
                                   std::abs(*rep.t_perp_measured / rep.mt_bound - 1.0));
            ml_ok = ml_ok && rep.ml_bound <= *rep.t_perp_measured * (1.0 + 1e-9);
        }
    }
    c7 = {7, "two-level speed-limit saturation", perp_found && worst_ratio <= 1e-6,
          "9 mode pairs, worst |t_perp/bound - 1| " + num(worst_ratio)};

    double pred = dynamics::ml_gaussian_prediction(HybridParams(1.0 + 1e-9, 2.0), 1.0);
    bool pred_ok = rel_gap(pred, M_PI) <= 1e-12;
    c9 = {9, "mean-energy bound consistency", perp_found && ml_ok && pred_ok,
          "mean-energy bound below every measured t_perp; undeformed estimate " + num(pred)};
}

inline CriterionResult transport_identities(SharedTraces& shared) {
    auto g = Grid1D::make(256, -12.0, 12.0);
    HybridParams p(1.3, 1.7);
    auto ops = operators::build_operators(p, g);
    Potential vq = potentials::quartic(*g, 0.05);
    WaveFunction psi = states::gaussian(g, 1.0, 0.0, 1.0);
    EvolutionConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_steps = 1000;
    cfg.record_every = 10;
    cfg.splitting = Splitting::strang;
    auto tr = dynamics::evolve(psi, ops, &vq, cfg);
    shared.reports.push_back(dynamics::qsl_report(psi, ops, &vq, tr));
    auto er = dynamics::ehrenfest_check(tr);
    auto mr = dynamics::momentum_force_check(tr);
    bool ok = er.max_residual_x <= 1e-3 && mr.max_residual_p <= 1e-3;
    return {10, "transport identities in a well", ok,
            "position residual " + num(er.max_residual_x) + ", momentum residual " +
                num(mr.max_residual_p)};
}

inline CriterionResult angle_growth(const SharedTraces& shared) {
    bool ok = !shared.reports.empty();
    for (const auto& rep : shared.reports) ok = ok && rep.mt_integral_ok;
    return {8, "bures-angle growth bound", ok,
            "pointwise on " + std::to_string(shared.reports.size()) + " recorded evolutions"};
}

inline CriterionResult splitstep_quality(const SharedTraces& shared) {
    auto g = Grid1D::make(256, -12.0, 12.0);
    HybridParams p(1.0 + 1e-8, 2.0);
    auto ops = operators::build_operators(p, g);
    Potential vh = potentials::harmonic(*g, 1.0, 1.0);
    WaveFunction psi = states::gaussian(g, 2.0, 0.0, std::sqrt(0.5));

    auto run = [&](double dt) {
        EvolutionConfig cfg;
        cfg.dt = dt;
        cfg.n_steps = std::size_t(std::lround(1.0 / dt));
        cfg.record_every = cfg.n_steps;
        cfg.splitting = Splitting::strang;
        return dynamics::evolve(psi, ops, &vh, cfg);
    };
    auto ref = run(0.0025);
    auto err = [&](const EvolutionTrace& tr) {
        const auto& a = tr.final_state->field.position();
        const auto& b = ref.final_state->field.position();
        double acc = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) acc += std::norm(a[j] - b[j]);
        return std::sqrt(acc * g->dx());
    };
    double ratio = err(run(0.02)) / err(run(0.01));

    EvolutionConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_steps = 10000;
    cfg.record_every = 1000;
    cfg.splitting = Splitting::strang;
    auto longrun = dynamics::evolve(psi, ops, &vh, cfg);
    double drift = 0.0;
    for (double n : longrun.norm) drift = std::max(drift, std::abs(n - 1.0));

    bool ok = ratio >= 3.5 && ratio <= 4.5 && drift <= 1e-9 &&
              shared.exact_free_energy_drift <= 1e-8;
    return {11, "split-step order and conservation", ok,
            "error ratio " + num(ratio) + ", norm drift " + num(drift) +
                ", free-run energy drift " + num(shared.exact_free_energy_drift)};
}

inline CriterionResult heavy_tail() {
    auto g = Grid1D::make(4096, -128.0, 128.0);
    auto ops = operators::build_operators(HybridParams(1.0 + 1e-8, 1.5), g);
    auto col = dynamics::propagator_slice(ops, 1.0, 2048, 4.0 * g->dx());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t cnt = 0;
    for (std::size_t j = 2048; j < g->n(); ++j) {
        double x = g->x()[j];
        if (x < 5.0 || x > 50.0) continue;
        double lx = std::log(x), ly = std::log(std::abs(col[j]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++cnt;
    }
    double slope = (double(cnt) * sxy - sx * sy) / (double(cnt) * sxx - sx * sx);
    return {12, "heavy-tailed propagator", std::abs(slope + 2.5) <= 0.3,
            "tail slope " + num(slope) + " (target -2.5)"};
}

inline CriterionResult fit_round_trip() {
    std::vector<double> ts(500), ys(500);
    for (int i = 0; i < 500; ++i) {
        ts[i] = 10.0 * i / 499.0;
        ys[i] = std::exp(-0.1 * std::pow(ts[i], 1.5)) * (1.0 + 0.2 * std::cos(3.0 * ts[i]));
    }
    auto f = fit::fit_series(ts, ys);
    bool ok = rel_gap(f.gamma, 0.1) <= 0.01 && rel_gap(f.alpha_fit, 1.5) <= 0.01 &&
              rel_gap(f.c_q, 0.2) <= 0.01 && rel_gap(f.omega_q, 3.0) <= 0.01;
    return {13, "autocorrelation round trip", ok,
            "recovered (" + num(f.gamma) + ", " + num(f.alpha_fit) + ", " + num(f.c_q) +
                ", " + num(f.omega_q) + ")"};
}

inline CriterionResult minimal_length() {
    const double qs[4] = {1.1, 1.3, 1.6, 2.0};
    double sxy = 0.0, sxx = 0.0;
    double dx_min[4];
    for (int i = 0; i < 4; ++i) {
        dx_min[i] = uncertainty::minimal_dx(qs[i]);
        double L = std::abs(std::log(qs[i]));
        sxy += dx_min[i] * L;
        sxx += L * L;
    }
    double slope = sxy / sxx;
    bool ok = slope >= 0.4 && slope <= 0.6;
    for (int i = 0; i < 4; ++i) {
        double L = std::abs(std::log(qs[i]));
        ok = ok && std::abs(dx_min[i] - slope * L) <= 0.2 * slope * L;
    }
    return {14, "minimal length scan", ok,
            "fitted dx_min / |ln q| slope " + num(slope) + " (target 0.5)"};
}

inline CriterionResult gaussian_moments() {
    auto g = Grid1D::make(512, -16.0, 16.0);
    HybridParams p(1.5, 1.8);
    double worst4 = 0.0, worst6 = 0.0;
    for (double s : {0.7, 1.0, 1.5}) {
        MomentSet m = states::moments(states::gaussian(g, 0.0, 0.0, s), p, 1.0);
        worst4 = std::max(worst4, rel_gap(m.p4, 3.0 * m.var_p_std * m.var_p_std));
        worst6 = std::max(worst6,
                          rel_gap(m.p6, 15.0 * m.var_p_std * m.var_p_std * m.var_p_std));
    }
    return {15, "gaussian momentum moments", worst4 <= 1e-6 && worst6 <= 1e-5,
            "fourth-moment gap " + num(worst4) + ", sixth-moment gap " + num(worst6)};
}

inline CriterionResult composition_remainder() {
    auto g = Grid1D::make(512, -16.0, 16.0);
    HybridParams p(1.4, 1.8);
    std::vector<cplx> spec(g->n(), cplx(0.0, 0.0));
    double band_edge = M_PI / p.eps();
    for (std::size_t m = 0; m < g->n(); ++m) {
        double k = g->k()[m];
        if (k > 0.0 && k < band_edge) {
            double d = k - 3.0;
            spec[m] = std::exp(-0.25 * d * d);
        }
    }
    SpectralField f = SpectralField::from_spectrum(g, std::move(spec));
    double n = spectrum_norm(f);
    std::vector<cplx> sp = f.spectrum();
    for (auto& z : sp) z /= n;
    f.set_spectrum(std::move(sp));
    WaveFunction banded{std::move(f)};
    double rem_pos = operators::semigroup_remainder(p, g, 0.7, 0.9, banded);

    HybridParams near1(1.0 + 1e-8, 1.8);
    WaveFunction smooth = states::gaussian(g, 0.0, 4.0, 1.5);
    double rem_smooth = operators::semigroup_remainder(near1, g, 0.7, 0.9, smooth);

    std::vector<cplx> nspec(g->n(), cplx(0.0, 0.0));
    for (std::size_t m = 0; m < g->n(); ++m) {
        double k = -g->k()[m];
        if (k > 0.0 && k < band_edge) {
            double d = k - 3.0;
            nspec[m] = std::exp(-0.25 * d * d);
        }
    }
    SpectralField nf = SpectralField::from_spectrum(g, std::move(nspec));
    double nn = spectrum_norm(nf);
    std::vector<cplx> nsp = nf.spectrum();
    for (auto& z : nsp) z /= nn;
    nf.set_spectrum(std::move(nsp));
    double rem_neg = operators::semigroup_remainder(p, g, 0.7, 0.9, WaveFunction{std::move(nf)});

    return {16, "composition remainder", rem_pos <= 1e-10 && rem_smooth <= 1e-6,
            "positive band " + num(rem_pos) + ", near-standard " + num(rem_smooth) +
                ", negative band (reported) " + num(rem_neg)};
}

} // namespace detail

/// Runs every acceptance criterion, prints one verdict line each, and returns
/// the number of failures (0 means the tool is healthy).
inline int run_all(std::ostream& out) {
    auto t0 = std::chrono::steady_clock::now();
    detail::SharedTraces shared;
    std::vector<CriterionResult> rows;
    rows.push_back(detail::standard_limit(shared));
    rows.push_back(detail::spectrum_bound());
    rows.push_back(detail::hermiticity());
    rows.push_back(detail::commutator_form());
    rows.push_back(detail::uncertainty_sweep());
    rows.push_back(detail::expansion_arbitration());
    CriterionResult c7, c9;
    detail::two_level_suite(shared, c7, c9);
    rows.push_back(c7);
    rows.push_back(detail::transport_identities(shared)); // feeds the angle-growth pool
    rows.push_back(detail::angle_growth(shared));
    rows.push_back(c9);
    rows.push_back(detail::splitstep_quality(shared));
    rows.push_back(detail::heavy_tail());
    rows.push_back(detail::fit_round_trip());
    rows.push_back(detail::minimal_length());
    rows.push_back(detail::gaussian_moments());
    rows.push_back(detail::composition_remainder());
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({17, "runtime budget", secs <= 600.0,
                    "all criteria completed inside the ten-minute budget"});

    std::sort(rows.begin(), rows.end(),
              [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    int fails = 0;
    for (const auto& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "[%s] criterion %2d  %-36s %s", r.pass ? "PASS" : "FAIL",
                      r.id, r.name, r.detail.c_str());
        out << line << "\n";
        if (!r.pass) ++fails;
    }
    if (fails == 0)
        out << "selftest: all 17 criteria passed\n";
    else
        out << "selftest: " << fails << " criteria FAILED\n";
    return fails;
}

} // namespace selftest
} // namespace hybridqm
