#pragma once

#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "hybridqm/errors.hpp"

namespace hybridqm {

/// Uniform periodic spatial grid with its conjugate wavenumber grid.
///
/// Samples live at x_j = x_min + j*dx for j = 0..n-1 (x_max itself is the
/// periodic wrap point and is not a sample). Wavenumbers follow transform
/// ordering: k_m = m*dk for m < n/2 and (m-n)*dk above, so bin 0 is the one
/// and only zero mode and bin n/2 holds the extreme |k| = pi/dx.
/// Immutable after construction; share via GridPtr across threads freely.
class Grid1D {
public:
    static std::shared_ptr<const Grid1D> make(std::size_t n_points, double x_min, double x_max) {
        if (n_points < 16 || (n_points & (n_points - 1)) != 0) {
            std::size_t p = 16;
            while (p < n_points) p <<= 1;
            throw config_error("grid.n_points: need a power of two >= 16, got " +
                               std::to_string(n_points) + " (nearest valid: " +
                               std::to_string(p) + ")");
        }
        if (!(x_max > x_min))
            throw config_error("grid: x_max must exceed x_min");
        return std::shared_ptr<const Grid1D>(new Grid1D(n_points, x_min, x_max));
    }

    std::size_t n() const { return n_; }
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double dx() const { return dx_; }
    double dk() const { return dk_; }
    double k_max_abs() const { return std::numbers::pi / dx_; }

    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& k() const { return k_; }

    // Signed mode number m <-> storage bin; +n/2 and -n/2 alias to the same bin.
    std::size_t bin_of_mode(long m) const {
        const long half = static_cast<long>(n_) / 2;
        if (m < -half || m > half)
            throw config_error("grid mode " + std::to_string(m) + " outside [-" +
                               std::to_string(half) + ", " + std::to_string(half) + "]");
        return static_cast<std::size_t>(m >= 0 ? m : m + static_cast<long>(n_));
    }

private:
    Grid1D(std::size_t n, double x_min, double x_max)
        : n_(n), x_min_(x_min), x_max_(x_max),
          dx_((x_max - x_min) / static_cast<double>(n)),
          dk_(2.0 * std::numbers::pi / (static_cast<double>(n) * dx_)) {
        x_.resize(n_);
        k_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j)
            x_[j] = x_min_ + static_cast<double>(j) * dx_;
        const long half = static_cast<long>(n_) / 2;
        for (std::size_t m = 0; m < n_; ++m) {
            const long sm = static_cast<long>(m) < half ? static_cast<long>(m)
                                                        : static_cast<long>(m) - static_cast<long>(n_);
            k_[m] = static_cast<double>(sm) * dk_;
        }
    }

    std::size_t n_;
    double x_min_, x_max_, dx_, dk_;
    std::vector<double> x_, k_;
};

using GridPtr = std::shared_ptr<const Grid1D>;

} // namespace hybridqm
