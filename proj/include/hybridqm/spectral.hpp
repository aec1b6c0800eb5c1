#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "hybridqm/errors.hpp"
#include "hybridqm/fft.hpp"
#include "hybridqm/grid.hpp"

namespace hybridqm {

using cplx = std::complex<double>;

/// Complex field with lazily synchronized position and spectrum views.
///
/// The transform pair is unitary between the measure-weighted inner products
///   <f,g>_x = sum conj(f_j) g_j dx   and   <f,g>_k = sum conj(f_m) g_m dk,
/// i.e. spectrum(k_m) = (dx/sqrt(2*pi)) * sum_j f(x_j) exp(-i k_m x_j),
/// which makes Parseval hold exactly and sends the plane wave exp(i k_m x)
/// to a single bin. Mutating one view drops the cached other view.
class SpectralField {
public:
    static SpectralField from_position(GridPtr grid, std::vector<cplx> values) {
        check(grid, values.size());
        SpectralField f(std::move(grid));
        f.x_ = std::move(values);
        return f;
    }

    static SpectralField from_spectrum(GridPtr grid, std::vector<cplx> values) {
        check(grid, values.size());
        SpectralField f(std::move(grid));
        f.k_ = std::move(values);
        return f;
    }

    const GridPtr& grid() const { return grid_; }

    const std::vector<cplx>& position() const {
        if (!x_) {
            if (!k_) throw shape_error("SpectralField: no representation present");
            x_ = spectrum_to_position(*grid_, *k_);
        }
        return *x_;
    }

    const std::vector<cplx>& spectrum() const {
        if (!k_) {
            if (!x_) throw shape_error("SpectralField: no representation present");
            k_ = position_to_spectrum(*grid_, *x_);
        }
        return *k_;
    }

    void set_position(std::vector<cplx> values) {
        check(grid_, values.size());
        x_ = std::move(values);
        k_.reset();
    }

    void set_spectrum(std::vector<cplx> values) {
        check(grid_, values.size());
        k_ = std::move(values);
        x_.reset();
    }

    static std::vector<cplx> position_to_spectrum(const Grid1D& g, const std::vector<cplx>& in) {
        std::vector<cplx> work = in;
        fft_radix2(work, false);
        const double scale = g.dx() / std::sqrt(2.0 * std::numbers::pi);
        for (std::size_t m = 0; m < g.n(); ++m)
            work[m] *= scale * std::polar(1.0, -g.k()[m] * g.x_min());
        return work;
    }

    static std::vector<cplx> spectrum_to_position(const Grid1D& g, const std::vector<cplx>& in) {
        std::vector<cplx> work(g.n());
        for (std::size_t m = 0; m < g.n(); ++m)
            work[m] = in[m] * std::polar(1.0, g.k()[m] * g.x_min());
        fft_radix2(work, true);
        const double scale = g.dk() / std::sqrt(2.0 * std::numbers::pi);
        for (auto& v : work) v *= scale;
        return work;
    }

private:
    explicit SpectralField(GridPtr grid) : grid_(std::move(grid)) {}

    static void check(const GridPtr& grid, std::size_t len) {
        if (!grid) throw shape_error("SpectralField: null grid");
        if (len != grid->n())
            throw shape_error("SpectralField: value length " + std::to_string(len) +
                              " does not match grid n_points " + std::to_string(grid->n()));
    }

    GridPtr grid_;
    mutable std::optional<std::vector<cplx>> x_;
    mutable std::optional<std::vector<cplx>> k_;
};

inline SpectralField forward(const SpectralField& f) {
    SpectralField out = f;
    out.spectrum();
    return out;
}

inline SpectralField inverse(const SpectralField& f) {
    SpectralField out = f;
    out.position();
    return out;
}

/// Diagonal operator in the spectrum view: out~(k) = sigma(k) * in~(k).
template <typename Scalar>
inline SpectralField apply_multiplier(const SpectralField& f, const std::vector<Scalar>& sigma) {
    if (sigma.size() != f.grid()->n())
        throw shape_error("apply_multiplier: multiplier length " + std::to_string(sigma.size()) +
                          " does not match grid n_points " + std::to_string(f.grid()->n()));
    const auto& spec = f.spectrum();
    std::vector<cplx> out(spec.size());
    for (std::size_t m = 0; m < spec.size(); ++m)
        out[m] = spec[m] * sigma[m];
    return SpectralField::from_spectrum(f.grid(), std::move(out));
}

inline cplx inner_product(const SpectralField& a, const SpectralField& b) {
    if (a.grid() != b.grid() && a.grid()->n() != b.grid()->n())
        throw shape_error("inner_product: fields live on different grids");
    const auto& fa = a.position();
    const auto& fb = b.position();
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < fa.size(); ++j)
        acc += std::conj(fa[j]) * fb[j];
    return acc * a.grid()->dx();
}

inline double norm(const SpectralField& f) {
    const auto& v = f.position();
    double acc = 0.0;
    for (const auto& z : v) acc += std::norm(z);
    return std::sqrt(acc * f.grid()->dx());
}

inline double spectrum_norm(const SpectralField& f) {
    const auto& v = f.spectrum();
    double acc = 0.0;
    for (const auto& z : v) acc += std::norm(z);
    return std::sqrt(acc * f.grid()->dk());
}

} // namespace hybridqm
