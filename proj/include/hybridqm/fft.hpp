#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "hybridqm/errors.hpp"

namespace hybridqm {

// In-place iterative radix-2 transform, no normalization.
// forward: X_m = sum_j x_j exp(-2*pi*i*m*j/N); inverse uses +i and no 1/N.
// Twiddles come straight from polar() per stage, not from a running product,
// so phase error stays at the few-ulp level even at n = 4096.
// Grids in this library are power-of-two by construction (see grid.hpp).
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw shape_error("fft_radix2: length must be a nonzero power of two, got " +
                          std::to_string(n));

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> tw;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        tw.resize(len / 2);
        for (std::size_t j = 0; j < len / 2; ++j)
            tw[j] = std::polar(1.0, ang * static_cast<double>(j));
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * tw[j];
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
}

} // namespace hybridqm
