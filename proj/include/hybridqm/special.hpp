#pragma once

#include <cmath>
#include <string>

#include "hybridqm/errors.hpp"

namespace hybridqm {
namespace special {

/// Digamma for x > 0: shift with psi(x+1) = psi(x) + 1/x until x >= 6, then
/// the asymptotic series ln x - 1/2x - sum B_2n/(2n x^2n).
inline double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw numeric_error("digamma: need x > 0, got " + std::to_string(x));
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x;
    double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv -
                    inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                            inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    return acc + series;
}

} // namespace special
} // namespace hybridqm
