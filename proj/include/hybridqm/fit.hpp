#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "hybridqm/errors.hpp"

namespace hybridqm {

/// Least-squares parameters of A(t) = exp(-gamma t^alpha_fit)(1 + c_q cos(omega_q t)).
/// degenerate: the series carried no usable variation, parameters are placeholders.
/// low_confidence: omega is not pinned down (short window or vanishing contrast).
struct AutocorrFit {
    double gamma = 0.0;
    double alpha_fit = 1.0;
    double c_q = 0.0;
    double omega_q = 0.0;
    double residual = 0.0;
    bool degenerate = false;
    bool low_confidence = false;
    int iterations = 0;
};

namespace fit {
namespace detail {

inline double model_point(const double* p, double t) {
    double decay = p[0] * (t > 0.0 ? std::pow(t, p[1]) : 0.0);
    return std::exp(-std::min(decay, 700.0)) * (1.0 + p[2] * std::cos(p[3] * t));
}

inline void model_jacobian(const double* p, double t, double* row) {
    double ta = t > 0.0 ? std::pow(t, p[1]) : 0.0;
    double env = std::exp(-std::min(p[0] * ta, 700.0));
    double osc = 1.0 + p[2] * std::cos(p[3] * t);
    row[0] = -ta * env * osc;
    row[1] = t > 0.0 ? -p[0] * ta * std::log(t) * env * osc : 0.0;
    row[2] = env * std::cos(p[3] * t);
    row[3] = -env * p[2] * t * std::sin(p[3] * t);
}

inline void clamp_params(double* p) {
    p[0] = std::max(p[0], 0.0);
    p[1] = std::clamp(p[1], 1e-3, 3.0);
    p[2] = std::clamp(p[2], -1.0, 1.0);
    p[3] = std::max(p[3], 1e-9);
}

inline double sse(const std::vector<double>& ts, const std::vector<double>& ys,
                  const double* p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double r = model_point(p, ts[i]) - ys[i];
        acc += r * r;
    }
    return acc;
}

// Solves M x = rhs for a 4x4 system in place, partial pivoting.
inline bool solve4(double m[4][5]) {
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < 1e-300) return false;
        for (int c = 0; c < 5; ++c) std::swap(m[col][c], m[piv][c]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int r = 0; r < 4; ++r) m[r][4] /= m[r][r];
    return true;
}

inline int levenberg_marquardt(const std::vector<double>& ts, const std::vector<double>& ys,
                               double* p) {
    const std::size_t n = ts.size();
    double lambda = 1e-3;
    double best = sse(ts, ys, p);
    int iters = 0;
    for (; iters < 120; ++iters) {
        double jtj[4][4] = {};
        double jtr[4] = {};
        double row[4];
        for (std::size_t i = 0; i < n; ++i) {
            model_jacobian(p, ts[i], row);
            double r = model_point(p, ts[i]) - ys[i];
            for (int a = 0; a < 4; ++a) {
                jtr[a] += row[a] * r;
                for (int b = 0; b < 4; ++b) jtj[a][b] += row[a] * row[b];
            }
        }
        bool stepped = false;
        for (int damp = 0; damp < 14; ++damp) {
            double m[4][5];
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) m[a][b] = jtj[a][b];
                m[a][a] += lambda * std::max(jtj[a][a], 1e-12);
                m[a][4] = -jtr[a];
            }
            if (!solve4(m)) {
                lambda *= 8.0;
                continue;
            }
            double trial[4] = {p[0] + m[0][4], p[1] + m[1][4], p[2] + m[2][4], p[3] + m[3][4]};
            clamp_params(trial);
            double s = sse(ts, ys, trial);
            if (s < best) {
                double gain = best - s;
                std::copy(trial, trial + 4, p);
                best = s;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (gain < 1e-16 * (1.0 + best)) return iters + 1;
                break;
            }
            lambda *= 8.0;
        }
        if (!stepped) break;
    }
    return iters;
}

// Envelope regression log(-log y) = log(gamma) + a log t on mid-range samples.
inline bool envelope_init(const std::vector<double>& ts, const std::vector<double>& ys,
                          double& gamma0, double& a0) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] > 0.0) || !(ys[i] > 1e-6) || !(ys[i] < 0.9)) continue;
        double lx = std::log(ts[i]);
        double ly = std::log(-std::log(ys[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++cnt;
    }
    if (cnt < 8) return false;
    double den = cnt * sxx - sx * sx;
    if (std::abs(den) < 1e-12) return false;
    double slope = (cnt * sxy - sx * sy) / den;
    double icept = (sy - slope * sx) / cnt;
    a0 = std::clamp(slope, 1e-3, 3.0);
    gamma0 = std::clamp(std::exp(icept), 0.0, 1e6);
    return true;
}

struct OmegaScan {
    std::vector<double> candidates;
    double contrast = 0.0;
    double snr = 0.0;
};

// Crude periodogram of y/envelope - 1 on the (uniform) sample times; returns
// the strongest few local maxima as omega starting points.
inline OmegaScan scan_omega(const std::vector<double>& ts, const std::vector<double>& ys,
                            double gamma0, double a0) {
    const std::size_t n = ts.size();
    std::vector<double> osc(n);
    double peak_osc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double env = std::exp(-std::min(gamma0 * (ts[i] > 0.0 ? std::pow(ts[i], a0) : 0.0), 700.0));
        osc[i] = env > 1e-300 ? ys[i] / env - 1.0 : 0.0;
        peak_osc = std::max(peak_osc, std::abs(osc[i]));
    }
    double span = ts.back() - ts.front();
    OmegaScan out;
    out.contrast = std::min(peak_osc, 0.99);
    if (!(span > 0.0)) return out;
    std::size_t half = n / 2;
    std::vector<double> power(half, 0.0);
    double mean_power = 0.0;
    for (std::size_t j = 1; j < half; ++j) {
        double w = 2.0 * M_PI * double(j) / span;
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i)
            acc += osc[i] * std::polar(1.0, -w * ts[i]);
        power[j] = std::norm(acc);
        mean_power += power[j];
    }
    if (half > 1) mean_power /= double(half - 1);
    std::vector<std::size_t> order;
    for (std::size_t j = 1; j + 1 < half; ++j)
        if (power[j] >= power[j - 1] && power[j] >= power[j + 1]) order.push_back(j);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
    for (std::size_t r = 0; r < order.size() && r < 3; ++r) {
        out.candidates.push_back(2.0 * M_PI * double(order[r]) / span);
        if (r == 0 && mean_power > 0.0) out.snr = power[order[0]] / mean_power;
    }
    return out;
}

} // namespace detail

/// Fits exp(-gamma t^a)(1 + C cos(w t)) to uniformly sampled data with
/// multi-start over the periodogram's omega peaks.
inline AutocorrFit fit_series(const std::vector<double>& ts, const std::vector<double>& ys) {
    if (ts.size() != ys.size() || ts.size() < 8)
        throw shape_error("fit_series: need matching series of at least 8 samples, got " +
                          std::to_string(ts.size()) + "/" + std::to_string(ys.size()));
    AutocorrFit out;
    double mean = 0.0, var = 0.0;
    for (double y : ys) mean += y;
    mean /= double(ys.size());
    for (double y : ys) var += (y - mean) * (y - mean);
    var /= double(ys.size());
    if (var < 1e-12) {
        out.degenerate = true;
        out.low_confidence = true;
        return out;
    }

    double gamma0 = 0.1, a0 = 1.0;
    detail::envelope_init(ts, ys, gamma0, a0);
    auto scan = detail::scan_omega(ts, ys, gamma0, a0);
    double span = ts.back() - ts.front();
    if (scan.candidates.empty())
        scan.candidates.push_back(2.0 * M_PI / std::max(span, 1e-12));

    double best_sse = std::numeric_limits<double>::infinity();
    double best[4] = {gamma0, a0, 0.0, scan.candidates.front()};
    for (double w0 : scan.candidates) {
        double p[4] = {gamma0, a0, std::max(scan.contrast, 0.01), w0};
        detail::clamp_params(p);
        out.iterations += detail::levenberg_marquardt(ts, ys, p);
        double s = detail::sse(ts, ys, p);
        if (s < best_sse) {
            best_sse = s;
            std::copy(p, p + 4, best);
        }
    }
    out.gamma = best[0];
    out.alpha_fit = best[1];
    out.c_q = best[2];
    out.omega_q = best[3];
    double data_ms = 0.0;
    for (double y : ys) data_ms += y * y;
    out.residual = std::sqrt(best_sse / std::max(data_ms, 1e-300));
    // omega is meaningless without contrast or without a few full periods in view
    if (std::abs(out.c_q) < 1e-3 || out.omega_q * span < 3.0 * 2.0 * M_PI || scan.snr < 4.0)
        out.low_confidence = true;
    return out;
}

} // namespace fit
} // namespace hybridqm
