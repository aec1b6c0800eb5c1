#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hybridqm/errors.hpp"
#include "hybridqm/grid.hpp"

namespace hybridqm {

/// Real potential sampled on the grid, bounded from below.
struct Potential {
    std::vector<double> samples;
    double lower_bound;
};

namespace potentials {

inline Potential from_samples(const Grid1D& grid, std::vector<double> samples) {
    if (samples.size() != grid.n())
        throw shape_error("potential: " + std::to_string(samples.size()) +
                          " samples on a grid of " + std::to_string(grid.n()) + " points");
    for (double v : samples)
        if (!std::isfinite(v))
            throw config_error("potential: samples must be finite");
    double lo = *std::min_element(samples.begin(), samples.end());
    return {std::move(samples), lo};
}

inline Potential free_particle(const Grid1D& grid) {
    return {std::vector<double>(grid.n(), 0.0), 0.0};
}

inline Potential harmonic(const Grid1D& grid, double omega, double mass, double center = 0.0) {
    if (!(omega > 0.0) || !(mass > 0.0))
        throw config_error("potential.harmonic: need omega > 0 and mass > 0");
    std::vector<double> v(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        double d = grid.x()[j] - center;
        v[j] = 0.5 * mass * omega * omega * d * d;
    }
    return from_samples(grid, std::move(v));
}

inline Potential quartic(const Grid1D& grid, double lambda, double center = 0.0) {
    if (!(lambda > 0.0)) throw config_error("potential.quartic: need lambda > 0");
    std::vector<double> v(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        double d = grid.x()[j] - center;
        v[j] = lambda * d * d * d * d;
    }
    return from_samples(grid, std::move(v));
}

/// Finite well of the given depth (> 0) over |x - center| <= half_width,
/// zero outside.
inline Potential square_well(const Grid1D& grid, double depth, double half_width,
                             double center = 0.0) {
    if (!(depth > 0.0) || !(half_width > 0.0))
        throw config_error("potential.well: need depth > 0 and half_width > 0");
    std::vector<double> v(grid.n(), 0.0);
    for (std::size_t j = 0; j < grid.n(); ++j)
        if (std::abs(grid.x()[j] - center) <= half_width) v[j] = -depth;
    return from_samples(grid, std::move(v));
}

} // namespace potentials
} // namespace hybridqm
