// State construction and moment extraction.
//
// Analytic oracles for the sigma = 1, k0 = 0, hbar = 1 Gaussian:
//   var_x = 1, var_p = 1/4, p2 = 1/4, p4 = 3/16 = 0.1875, p6 = 15/64 = 0.234375.
// The log moment is cross-checked against a 1e5-cell midpoint quadrature of
// the continuum |psi~(k)|^2 = sqrt(2/pi) exp(-2 (k-3)^2), not against any
// closed form.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hybridqm/states.hpp"

using namespace hybridqm;
using Catch::Approx;

TEST_CASE("gaussian construction: normalization and spread oracles", "[states]") {
    auto g = Grid1D::make(512, -16.0, 16.0);
    WaveFunction psi = states::gaussian(g, 0.0, 0.0, 1.0);
    REQUIRE(psi.norm() == Approx(1.0).margin(1e-12));
    psi.require_normalized("test");

    HybridParams p(1.3, 1.7);
    MomentSet m = states::moments(psi, p, 1.0);
    REQUIRE(m.mean_x == Approx(0.0).margin(1e-12));
    REQUIRE(m.var_x == Approx(1.0).epsilon(1e-10));
    REQUIRE(m.var_p_std == Approx(0.25).epsilon(1e-8));
    REQUIRE(std::sqrt(m.var_x * m.var_p_std) == Approx(0.5).margin(1e-8));
    REQUIRE(m.p2 == Approx(0.25).epsilon(1e-8));
    REQUIRE(m.p4 == Approx(0.1875).epsilon(1e-6));
    REQUIRE(m.p6 == Approx(0.234375).epsilon(1e-5));
    REQUIRE(std::abs(m.mean_p_std) < 1e-12);
    REQUIRE(std::abs(m.mean_p_hybrid) < 1e-12);
    REQUIRE_FALSE(m.log_reliable); // zero-mode weight ~ 0.16 for k0 = 0
    REQUIRE(m.zero_mode_weight == Approx(0.157).epsilon(0.2));

    WaveFunction boosted = states::gaussian(g, 0.0, 3.0, 1.0);
    MomentSet mb = states::moments(boosted, p, 1.0);
    REQUIRE(mb.mean_p_std == Approx(3.0).epsilon(1e-8));
    REQUIRE(mb.var_p_std == Approx(0.25).epsilon(1e-8));
    REQUIRE(mb.log_reliable);
}

TEST_CASE("gaussian construction: rejects unresolvable widths", "[states]") {
    auto g = Grid1D::make(512, -16.0, 16.0); // dx = 0.0625
    REQUIRE_THROWS_AS(states::gaussian(g, 0.0, 0.0, 0.1), config_error);
    REQUIRE_THROWS_AS(states::gaussian(g, 0.0, 0.0, 8.0), config_error);
    REQUIRE_NOTHROW(states::gaussian(g, 0.0, 0.0, 4.0));
    REQUIRE_NOTHROW(states::gaussian(g, 0.0, 0.0, 0.25));
}

TEST_CASE("log moment matches an independent fine quadrature", "[states]") {
    auto g = Grid1D::make(512, -16.0, 16.0);
    WaveFunction psi = states::gaussian(g, 0.0, 3.0, 1.0);
    HybridParams p(1.3, 1.7);
    MomentSet m = states::moments(psi, p, 1.0);

    // midpoint rule dodges the integrable ln|k| pole
    const int cells = 100000;
    double lo = -2.0, hi = 8.0, h = (hi - lo) / cells;
    double amp = std::sqrt(2.0 / M_PI);
    double qlog = 0.0, qlogw = 0.0;
    for (int i = 0; i < cells; ++i) {
        double k = lo + (i + 0.5) * h;
        double w = amp * std::exp(-2.0 * (k - 3.0) * (k - 3.0));
        double lg = std::log(std::abs(k));
        qlog += w * lg * h;
        qlogw += w * k * k * lg * h;
    }
    REQUIRE(m.log_p == Approx(qlog).margin(1e-4));
    REQUIRE(m.log_p_weighted == Approx(qlogw).margin(1e-4));
    REQUIRE(m.p_ref == 1.0);

    REQUIRE_THROWS_AS(states::moments(psi, p, 0.0), config_error);
    REQUIRE_THROWS_AS(states::moments(psi, p, -2.0), config_error);
}

TEST_CASE("two-mode superposition: two equal bins and two-level statistics", "[states]") {
    auto g = Grid1D::make(256, -16.0, 16.0);
    double dk = g->dk();
    double k1 = 10.0 * dk, k2 = 23.0 * dk;
    WaveFunction psi = states::two_mode_superposition(g, k1, k2, 0.7);
    REQUIRE(psi.norm() == Approx(1.0).margin(1e-12));

    const auto& spec = psi.field.spectrum();
    std::size_t b1 = g->bin_of_mode(10), b2 = g->bin_of_mode(23);
    REQUIRE(std::abs(spec[b1]) == Approx(std::abs(spec[b2])).epsilon(1e-12));
    for (std::size_t m = 0; m < g->n(); ++m) {
        if (m == b1 || m == b2) continue;
        REQUIRE(std::abs(spec[m]) < 1e-12);
    }

    HybridParams p(1.3, 1.8);
    double e1 = symbols::kinetic_symbol(p, k1), e2 = symbols::kinetic_symbol(p, k2);
    double wk = 0.0, ke = 0.0, ke2 = 0.0;
    for (std::size_t m = 0; m < g->n(); ++m) {
        double w = std::norm(spec[m]);
        double e = symbols::kinetic_symbol(p, g->k()[m]);
        wk += w;
        ke += w * e;
        ke2 += w * e * e;
    }
    REQUIRE(ke / wk == Approx(0.5 * (e1 + e2)).epsilon(1e-12));
    double dk_energy = std::sqrt(ke2 / wk - (ke / wk) * (ke / wk));
    REQUIRE(dk_energy == Approx(0.5 * std::abs(e1 - e2)).epsilon(1e-10));

    REQUIRE_THROWS_AS(states::two_mode_superposition(g, 10.5 * dk, 23.0 * dk, 0.0), config_error);
    REQUIRE_THROWS_AS(states::two_mode_superposition(g, 10.0 * dk, 10.0 * dk, 0.0), config_error);
    REQUIRE_THROWS_AS(states::two_mode_superposition(g, 10.0 * dk, 200.0 * dk, 0.0), config_error);
}

TEST_CASE("moment invariants on random spectra", "[states]") {
    auto g = Grid1D::make(128, -10.0, 10.0);
    HybridParams p(1.6, 1.5);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<cplx> spec(g->n());
        for (auto& z : spec) z = {gauss(rng), gauss(rng)};
        SpectralField f = SpectralField::from_spectrum(g, std::move(spec));
        double n = spectrum_norm(f);
        auto scaled = f.spectrum();
        for (auto& z : scaled) z /= n;
        f.set_spectrum(std::move(scaled));
        WaveFunction psi{std::move(f)};
        psi.require_normalized("random spectrum");

        MomentSet m = states::moments(psi, p, 0.7);
        REQUIRE(m.var_x >= 0.0);
        REQUIRE(m.var_p_std >= 0.0);
        REQUIRE(m.var_p_hybrid >= 0.0);
        REQUIRE(m.p4 >= m.p2 * m.p2 * (1.0 - 1e-12));
        REQUIRE(m.p6 >= m.p2 * m.p4 * (1.0 - 1e-12));
    }
}

TEST_CASE("hybrid variance agrees between spectral sum and operator route", "[states]") {
    auto g = Grid1D::make(512, -16.0, 16.0);
    HybridParams p(1.4, 1.6);
    WaveFunction psi = states::gaussian(g, 0.5, 2.0, 1.5);
    MomentSet m = states::moments(psi, p, 1.0);

    std::vector<double> sigma(g->n());
    for (std::size_t i = 0; i < g->n(); ++i) sigma[i] = symbols::hybrid_symbol(p, g->k()[i]);
    SpectralField pied = apply_multiplier(psi.field, sigma);
    double mean = inner_product(psi.field, pied).real();
    double second = norm(pied) * norm(pied);
    REQUIRE(m.var_p_hybrid == Approx(second - mean * mean).epsilon(1e-10));
    REQUIRE(m.mean_p_hybrid == Approx(mean).margin(1e-12));
}

TEST_CASE("even spectra have vanishing odd means", "[states]") {
    auto g = Grid1D::make(64, -8.0, 8.0);
    std::vector<cplx> spec(g->n());
    for (std::size_t m = 0; m < g->n(); ++m) {
        double k = g->k()[m];
        spec[m] = std::exp(-0.5 * k * k);
    }
    spec[g->n() / 2] = 0.0; // the unpaired extreme bin must carry no weight
    SpectralField f = SpectralField::from_spectrum(g, std::move(spec));
    double n = spectrum_norm(f);
    auto scaled = f.spectrum();
    for (auto& z : scaled) z /= n;
    f.set_spectrum(std::move(scaled));
    WaveFunction psi{std::move(f)};

    MomentSet m = states::moments(psi, HybridParams(1.5, 1.5), 1.0);
    REQUIRE(std::abs(m.mean_p_std) < 1e-12);
    REQUIRE(std::abs(m.mean_p_hybrid) < 1e-12);
}

TEST_CASE("boundary leak diagnostic separates contained from clipped states", "[states]") {
    auto g = Grid1D::make(512, -16.0, 16.0);
    REQUIRE(states::boundary_leak(states::gaussian(g, 0.0, 0.0, 1.0)) < 1e-12);
    REQUIRE(states::boundary_leak(states::gaussian(g, 15.0, 0.0, 1.0)) > 1e-3);
}

TEST_CASE("normalization watchdog trips on drift", "[states]") {
    auto g = Grid1D::make(128, -10.0, 10.0);
    WaveFunction psi = states::gaussian(g, 0.0, 0.0, 1.0);
    auto pos = psi.field.position();
    for (auto& z : pos) z *= 1.1;
    psi.field.set_position(std::move(pos));
    REQUIRE_THROWS_AS(psi.require_normalized("test"), numeric_error);
}
