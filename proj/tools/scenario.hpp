#pragma once

// Config-driven scenario layer behind the command-line tool: JSON parsing with
// field-level diagnostics, the analysis pipeline, and deterministic writers
// for every output artifact (17 significant digits, CRLF-terminated CSV,
// insertion-ordered JSON).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hybridqm/dynamics.hpp"
#include "hybridqm/fit.hpp"
#include "hybridqm/potential.hpp"
#include "hybridqm/states.hpp"
#include "hybridqm/uncertainty.hpp"

namespace hybridqm {
namespace scenario {

inline constexpr const char* tool_version = "1.0.0";

struct GridSpec {
    std::size_t n_points = 256;
    double x_min = -12.0;
    double x_max = 12.0;
};

enum class StateKind { gaussian, two_mode };

struct StateSpec {
    StateKind kind = StateKind::gaussian;
    double center_x = 0.0, center_k = 0.0, sigma = 1.0;
    long long k1_index = 0, k2_index = 0;
    double phase = 0.0;
};

enum class PotentialKind { none, harmonic, quartic, well, table };

struct PotentialSpec {
    PotentialKind kind = PotentialKind::none;
    double omega = 0.0, lambda = 0.0, depth = 0.0, width = 0.0;
    std::string file;
};

struct PropagatorSpec {
    double t = 1.0;
    std::optional<std::size_t> source_index; // default: center bin
    double source_width = 0.0;
};

enum class SweepAxis { q, alpha };

struct SweepSpec {
    SweepAxis axis = SweepAxis::q;
    std::vector<double> values;
};

struct AnalysisSpec {
    bool uncertainty = false;
    bool qsl = false;
    bool ehrenfest = false;
    bool autocorr_fit = false;
    bool limits_suite = false;
    std::optional<PropagatorSpec> propagator;
    std::optional<SweepSpec> sweep;
};

enum class OutputFormat { csv, json };

struct OutputSpec {
    std::string directory = "hybridqm_out";
    OutputFormat format = OutputFormat::csv;
};

struct ScenarioConfig {
    HybridParams params{1.5, 2.0};
    GridSpec grid;
    StateSpec state;
    PotentialSpec potential;
    std::optional<EvolutionConfig> evolution;
    AnalysisSpec analysis;
    std::optional<double> p_ref; // empty means auto (sqrt<p^2> of the state)
    OutputSpec output;
};

namespace detail {

using njson = nlohmann::json;

inline std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline const njson& member(const njson& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw config_error("config field " + joined(path, key) + ": missing");
    return *it;
}

inline void require_object(const njson& v, const std::string& path) {
    if (!v.is_object())
        throw config_error("config field " + path + ": expected an object");
}

inline void known_keys(const njson& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || (it.key() == a);
        if (!ok)
            throw config_error("config field " + joined(path, it.key()) + ": unknown field");
    }
}

inline double num(const njson& obj, const std::string& path, const char* key) {
    const njson& v = member(obj, path, key);
    if (!v.is_number())
        throw config_error("config field " + joined(path, key) + ": expected a number");
    return v.get<double>();
}

inline double num_or(const njson& obj, const std::string& path, const char* key, double fb) {
    return obj.find(key) == obj.end() ? fb : num(obj, path, key);
}

inline long long integer(const njson& obj, const std::string& path, const char* key) {
    const njson& v = member(obj, path, key);
    if (!v.is_number_integer())
        throw config_error("config field " + joined(path, key) + ": expected an integer");
    return v.get<long long>();
}

inline long long integer_or(const njson& obj, const std::string& path, const char* key,
                            long long fb) {
    return obj.find(key) == obj.end() ? fb : integer(obj, path, key);
}

inline std::string text(const njson& obj, const std::string& path, const char* key) {
    const njson& v = member(obj, path, key);
    if (!v.is_string())
        throw config_error("config field " + joined(path, key) + ": expected a string");
    return v.get<std::string>();
}

inline std::string text_or(const njson& obj, const std::string& path, const char* key,
                           const char* fb) {
    return obj.find(key) == obj.end() ? fb : text(obj, path, key);
}

inline bool flag_or(const njson& obj, const std::string& path, const char* key, bool fb) {
    auto it = obj.find(key);
    if (it == obj.end()) return fb;
    if (!it->is_boolean())
        throw config_error("config field " + joined(path, key) + ": expected true or false");
    return it->get<bool>();
}

} // namespace detail

inline WaveFunction build_state(GridPtr grid, const StateSpec& s) {
    if (s.kind == StateKind::gaussian)
        return states::gaussian(std::move(grid), s.center_x, s.center_k, s.sigma);
    double dk = grid->dk();
    return states::two_mode_superposition(std::move(grid), double(s.k1_index) * dk,
                                          double(s.k2_index) * dk, s.phase);
}

inline Potential table_potential(const Grid1D& grid, const std::string& file) {
    std::ifstream in(file);
    if (!in)
        throw config_error("config field potential.file: cannot open '" + file + "'");
    std::vector<double> xs, vs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        double x = 0.0, v = 0.0;
        if (!(ss >> x)) continue;
        if (!(ss >> v))
            throw config_error("config field potential.file: line " + std::to_string(lineno) +
                               " of '" + file + "': expected two numeric columns");
        double extra = 0.0;
        if (ss >> extra)
            throw config_error("config field potential.file: line " + std::to_string(lineno) +
                               " of '" + file + "': expected exactly two columns");
        xs.push_back(x);
        vs.push_back(v);
    }
    if (xs.size() < 2)
        throw config_error("config field potential.file: '" + file +
                           "' needs at least two samples");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1]))
            throw config_error("config field potential.file: x column of '" + file +
                               "' must be strictly increasing");
    std::vector<double> out(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        double x = grid.x()[j];
        if (x < xs.front() || x > xs.back())
            throw config_error("config field potential.file: grid point x = " +
                               std::to_string(x) + " outside table range [" +
                               std::to_string(xs.front()) + ", " + std::to_string(xs.back()) +
                               "]");
        std::size_t hi = std::size_t(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
        if (hi == xs.size()) --hi;
        if (hi == 0) hi = 1;
        std::size_t lo = hi - 1;
        double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
        out[j] = vs[lo] + w * (vs[hi] - vs[lo]);
    }
    return potentials::from_samples(grid, std::move(out));
}

inline std::optional<Potential> build_potential(const Grid1D& grid, const PotentialSpec& p,
                                                const HybridParams& params) {
    switch (p.kind) {
        case PotentialKind::none: return std::nullopt;
        case PotentialKind::harmonic: return potentials::harmonic(grid, p.omega, params.mass);
        case PotentialKind::quartic: return potentials::quartic(grid, p.lambda);
        case PotentialKind::well: return potentials::square_well(grid, p.depth, 0.5 * p.width);
        case PotentialKind::table: return table_potential(grid, p.file);
    }
    throw config_error("config field potential.type: unknown variant");
}

inline ScenarioConfig parse_config(const detail::njson& root) {
    using namespace detail;
    if (!root.is_object())
        throw config_error("config: top level must be a JSON object");
    known_keys(root, "", {"schema_version", "params", "grid", "state", "potential", "evolution",
                          "analysis", "p_ref", "output"});
    const njson& sv = member(root, "", "schema_version");
    if (!sv.is_number_integer() || sv.get<long long>() != 1)
        throw config_error("config field schema_version: this tool reads schema version 1");

    const njson& jp = member(root, "", "params");
    require_object(jp, "params");
    known_keys(jp, "params", {"q", "alpha", "hbar", "mass"});
    HybridParams params(num(jp, "params", "q"), num(jp, "params", "alpha"),
                        num_or(jp, "params", "hbar", 1.0), num_or(jp, "params", "mass", 1.0));

    const njson& jg = member(root, "", "grid");
    require_object(jg, "grid");
    known_keys(jg, "grid", {"n_points", "x_min", "x_max"});
    long long np = integer(jg, "grid", "n_points");
    if (np <= 0)
        throw config_error("config field grid.n_points: expected a positive integer");
    GridSpec grid{std::size_t(np), num(jg, "grid", "x_min"), num(jg, "grid", "x_max")};
    GridPtr g = Grid1D::make(grid.n_points, grid.x_min, grid.x_max);

    const njson& js = member(root, "", "state");
    require_object(js, "state");
    std::string state_type = text(js, "state", "type");
    StateSpec state;
    if (state_type == "gaussian") {
        known_keys(js, "state", {"type", "center_x", "center_k", "sigma"});
        state.kind = StateKind::gaussian;
        state.center_x = num_or(js, "state", "center_x", 0.0);
        state.center_k = num_or(js, "state", "center_k", 0.0);
        state.sigma = num(js, "state", "sigma");
    } else if (state_type == "two_mode") {
        known_keys(js, "state", {"type", "k1_index", "k2_index", "phase"});
        state.kind = StateKind::two_mode;
        state.k1_index = integer(js, "state", "k1_index");
        state.k2_index = integer(js, "state", "k2_index");
        state.phase = num_or(js, "state", "phase", 0.0);
        long long half = (long long)(grid.n_points / 2);
        if (state.k1_index <= -half || state.k1_index >= half)
            throw config_error("config field state.k1_index: mode outside the grid band");
        if (state.k2_index <= -half || state.k2_index >= half)
            throw config_error("config field state.k2_index: mode outside the grid band");
        if (state.k1_index == state.k2_index)
            throw config_error("config field state.k2_index: the two modes coincide");
    } else {
        throw config_error(
            "config field state.type: expected \"gaussian\" or \"two_mode\", got \"" +
            state_type + "\"");
    }
    build_state(g, state); // surfaces width and mode preconditions at config time

    const njson& jv = member(root, "", "potential");
    require_object(jv, "potential");
    std::string pot_type = text(jv, "potential", "type");
    PotentialSpec pot;
    if (pot_type == "none") {
        known_keys(jv, "potential", {"type"});
        pot.kind = PotentialKind::none;
    } else if (pot_type == "harmonic") {
        known_keys(jv, "potential", {"type", "omega"});
        pot.kind = PotentialKind::harmonic;
        pot.omega = num(jv, "potential", "omega");
        if (!(pot.omega > 0.0) || !std::isfinite(pot.omega))
            throw config_error("config field potential.omega: expected a positive number");
    } else if (pot_type == "quartic") {
        known_keys(jv, "potential", {"type", "lambda"});
        pot.kind = PotentialKind::quartic;
        pot.lambda = num(jv, "potential", "lambda");
        if (!std::isfinite(pot.lambda))
            throw config_error("config field potential.lambda: expected a finite number");
    } else if (pot_type == "well") {
        known_keys(jv, "potential", {"type", "depth", "width"});
        pot.kind = PotentialKind::well;
        pot.depth = num(jv, "potential", "depth");
        pot.width = num(jv, "potential", "width");
        if (!(pot.depth > 0.0))
            throw config_error("config field potential.depth: expected a positive number");
        if (!(pot.width > 0.0))
            throw config_error("config field potential.width: expected a positive number");
    } else if (pot_type == "table") {
        known_keys(jv, "potential", {"type", "file"});
        pot.kind = PotentialKind::table;
        pot.file = text(jv, "potential", "file");
        if (!std::filesystem::exists(pot.file))
            throw config_error("config field potential.file: no such file '" + pot.file + "'");
        table_potential(*g, pot.file); // surfaces range and format errors at config time
    } else {
        throw config_error(
            "config field potential.type: expected one of none, harmonic, quartic, well, "
            "table; got \"" +
            pot_type + "\"");
    }

    std::optional<EvolutionConfig> evolution;
    if (root.contains("evolution") && !root.at("evolution").is_null()) {
        const njson& je = root.at("evolution");
        require_object(je, "evolution");
        known_keys(je, "evolution", {"dt", "n_steps", "record_every", "splitting"});
        EvolutionConfig ec;
        ec.dt = num(je, "evolution", "dt");
        if (!(ec.dt > 0.0) || !std::isfinite(ec.dt))
            throw config_error("config field evolution.dt: expected a positive finite number");
        long long ns = integer(je, "evolution", "n_steps");
        if (ns <= 0)
            throw config_error("config field evolution.n_steps: expected a positive integer");
        ec.n_steps = std::size_t(ns);
        long long re = integer_or(je, "evolution", "record_every", 1);
        if (re <= 0)
            throw config_error(
                "config field evolution.record_every: expected a positive integer");
        ec.record_every = std::size_t(re);
        std::string split = text_or(je, "evolution", "splitting", "exact_free");
        if (split == "exact_free")
            ec.splitting = Splitting::exact_free;
        else if (split == "strang")
            ec.splitting = Splitting::strang;
        else
            throw config_error(
                "config field evolution.splitting: expected \"exact_free\" or \"strang\"");
        if (ec.splitting == Splitting::exact_free && pot.kind != PotentialKind::none)
            throw config_error(
                "config field evolution.splitting: exact_free requires potential type "
                "\"none\"; use \"strang\"");
        evolution = ec;
    }

    const njson& ja = member(root, "", "analysis");
    require_object(ja, "analysis");
    known_keys(ja, "analysis", {"uncertainty", "qsl", "ehrenfest", "autocorr_fit",
                                "limits_suite", "propagator", "sweep"});
    AnalysisSpec analysis;
    analysis.uncertainty = flag_or(ja, "analysis", "uncertainty", false);
    analysis.qsl = flag_or(ja, "analysis", "qsl", false);
    analysis.ehrenfest = flag_or(ja, "analysis", "ehrenfest", false);
    analysis.autocorr_fit = flag_or(ja, "analysis", "autocorr_fit", false);
    analysis.limits_suite = flag_or(ja, "analysis", "limits_suite", false);
    if (ja.contains("propagator") && !ja.at("propagator").is_null()) {
        const njson& jpr = ja.at("propagator");
        require_object(jpr, "analysis.propagator");
        known_keys(jpr, "analysis.propagator", {"t", "source_index", "source_width"});
        PropagatorSpec pr;
        pr.t = num(jpr, "analysis.propagator", "t");
        if (!(pr.t >= 0.0) || !std::isfinite(pr.t))
            throw config_error(
                "config field analysis.propagator.t: expected a nonnegative number");
        if (jpr.contains("source_index")) {
            long long si = integer(jpr, "analysis.propagator", "source_index");
            if (si < 0 || si >= np)
                throw config_error(
                    "config field analysis.propagator.source_index: outside [0, "
                    "grid.n_points)");
            pr.source_index = std::size_t(si);
        }
        pr.source_width = num_or(jpr, "analysis.propagator", "source_width", 0.0);
        if (!(pr.source_width >= 0.0) || !std::isfinite(pr.source_width))
            throw config_error(
                "config field analysis.propagator.source_width: expected a nonnegative "
                "number");
        analysis.propagator = pr;
    }
    if (ja.contains("sweep") && !ja.at("sweep").is_null()) {
        const njson& jsw = ja.at("sweep");
        require_object(jsw, "analysis.sweep");
        known_keys(jsw, "analysis.sweep", {"axis", "values"});
        SweepSpec sw;
        std::string axis = text(jsw, "analysis.sweep", "axis");
        if (axis == "q")
            sw.axis = SweepAxis::q;
        else if (axis == "alpha")
            sw.axis = SweepAxis::alpha;
        else
            throw config_error("config field analysis.sweep.axis: expected \"q\" or \"alpha\"");
        const njson& jvals = member(jsw, "analysis.sweep", "values");
        if (!jvals.is_array() || jvals.empty())
            throw config_error(
                "config field analysis.sweep.values: expected a nonempty array of numbers");
        for (std::size_t i = 0; i < jvals.size(); ++i) {
            if (!jvals[i].is_number())
                throw config_error("config field analysis.sweep.values[" + std::to_string(i) +
                                   "]: expected a number");
            double v = jvals[i].get<double>();
            try {
                if (sw.axis == SweepAxis::q)
                    HybridParams(v, params.alpha, params.hbar, params.mass);
                else
                    HybridParams(params.q, v, params.hbar, params.mass);
            } catch (const config_error& e) {
                throw config_error("config field analysis.sweep.values[" + std::to_string(i) +
                                   "]: " + e.what());
            }
            sw.values.push_back(v);
        }
        analysis.sweep = sw;
    }

    if (analysis.qsl && !evolution)
        throw config_error("config field analysis.qsl: requires an evolution block");
    if (analysis.ehrenfest && !evolution)
        throw config_error("config field analysis.ehrenfest: requires an evolution block");
    if (analysis.autocorr_fit && !evolution)
        throw config_error("config field analysis.autocorr_fit: requires an evolution block");
    if (evolution) {
        std::size_t records = evolution->n_steps / evolution->record_every + 1;
        double spacing = evolution->dt * double(evolution->record_every);
        if (analysis.ehrenfest && (records < 3 || spacing > 0.1))
            throw config_error(
                "config field analysis.ehrenfest: needs at least 3 records spaced at most "
                "0.1 apart (evolution.dt * evolution.record_every = " +
                std::to_string(spacing) + ")");
        if (analysis.autocorr_fit && records < 8)
            throw config_error(
                "config field analysis.autocorr_fit: needs at least 8 recorded samples, "
                "evolution records only " +
                std::to_string(records));
    }

    std::optional<double> p_ref;
    if (root.contains("p_ref")) {
        const njson& jr = root.at("p_ref");
        if (jr.is_string()) {
            if (jr.get<std::string>() != "auto")
                throw config_error(
                    "config field p_ref: expected a positive number or \"auto\"");
        } else if (jr.is_number()) {
            double v = jr.get<double>();
            if (!(v > 0.0) || !std::isfinite(v))
                throw config_error("config field p_ref: expected a positive number or \"auto\"");
            p_ref = v;
        } else {
            throw config_error("config field p_ref: expected a positive number or \"auto\"");
        }
    }

    OutputSpec output;
    if (root.contains("output")) {
        const njson& jo = root.at("output");
        require_object(jo, "output");
        known_keys(jo, "output", {"directory", "format"});
        output.directory = text_or(jo, "output", "directory", output.directory.c_str());
        if (output.directory.empty())
            throw config_error("config field output.directory: expected a nonempty path");
        std::string fmt = text_or(jo, "output", "format", "csv");
        if (fmt == "csv")
            output.format = OutputFormat::csv;
        else if (fmt == "json")
            output.format = OutputFormat::json;
        else
            throw config_error("config field output.format: expected \"csv\" or \"json\"");
    }

    ScenarioConfig cfg{params, grid, state, pot, evolution, analysis, p_ref, output};
    return cfg;
}

namespace io {

inline std::string f17(double v) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

// JSON numbers cannot carry inf/nan; those degrade to null
inline std::string jnum(double v) { return std::isfinite(v) ? f17(v) : "null"; }

inline const char* jbool(bool b) { return b ? "true" : "false"; }

inline std::string jstr(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

struct Csv {
    std::ostringstream out;
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << "\r\n"; // RFC 4180 line ending
    }
    std::string str() const { return out.str(); }
};

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char b[20];
    std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(h));
    return b;
}

} // namespace io

// Exclusive ownership of a run directory for the lifetime of one invocation.
struct DirLock {
    std::filesystem::path path;
    bool held = false;

    explicit DirLock(const std::filesystem::path& dir) : path(dir / ".hybridqm.lock") {
        std::FILE* f = std::fopen(path.string().c_str(), "wx");
        if (!f)
            throw config_error("config field output.directory: '" + dir.string() +
                               "' is locked by another run (remove " + path.string() +
                               " if stale)");
        std::fputs(tool_version, f);
        std::fclose(f);
        held = true;
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;
    ~DirLock() {
        if (held) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
    }
};

inline std::size_t thread_cap(std::size_t n_jobs) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HYBRIDQM_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (!end || *end != '\0' || v < 1)
            throw config_error("HYBRIDQM_THREADS: expected a positive integer, got '" +
                               std::string(env) + "'");
        n = std::min<std::size_t>(n, std::size_t(v));
    }
    return std::max<std::size_t>(1, std::min(n, n_jobs));
}

struct SweepRow {
    double value = 0.0, product = 0.0, exact_bound = 0.0, delta_k = 0.0, mt_bound = 0.0;
};

inline SweepRow sweep_row(const ScenarioConfig& cfg, const GridPtr& grid,
                          const WaveFunction& psi, const Potential* v, double p_ref,
                          double value) {
    HybridParams p = cfg.analysis.sweep->axis == SweepAxis::q
                         ? HybridParams(value, cfg.params.alpha, cfg.params.hbar,
                                        cfg.params.mass)
                         : HybridParams(cfg.params.q, value, cfg.params.hbar, cfg.params.mass);
    auto ops = operators::build_operators(p, grid);
    auto rep = uncertainty::exact_bound(psi, ops, p_ref);

    const auto& spec = psi.field.spectrum();
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t m = 0; m < grid->n(); ++m) {
        double ww = std::norm(spec[m]);
        double e = ops.kinetic_sym[m];
        w += ww;
        m1 += ww * e;
        m2 += ww * e * e;
    }
    m1 /= w;
    m2 /= w;
    double var_k = std::max(m2 - m1 * m1, 0.0);

    double var_h = var_k;
    if (v) {
        SpectralField hpsi = operators::apply_hamiltonian(ops, *v, psi);
        double h1 = std::real(inner_product(psi.field, hpsi));
        double h2 = std::real(inner_product(hpsi, hpsi));
        var_h = std::max(h2 - h1 * h1, 0.0);
    }
    double dh = std::sqrt(var_h);
    double mt = dh > 0.0 ? 0.5 * M_PI * p.hbar / dh
                         : std::numeric_limits<double>::infinity();
    return {value, rep.product, rep.exact_bound, std::sqrt(var_k), mt};
}

/// Limit-recovery table: two rows evaluated at the requested parameters, then
/// the fixed recovery scan (standard-limit saturation, cosine identity,
/// fractional bound, minimal-length scaling).
inline std::vector<uncertainty::LimitCaseRow> limits_table(double q, double alpha) {
    HybridParams p(q, alpha);
    auto g = Grid1D::make(512, -16.0, 16.0);
    auto ops = operators::build_operators(p, g);
    WaveFunction psi = states::gaussian(g, 0.0, 1.0, 1.25);
    std::vector<uncertainty::LimitCaseRow> rows;
    {
        uncertainty::LimitCaseRow row;
        row.name = "requested-slack";
        auto rep = uncertainty::exact_bound(psi, ops, 1.0);
        row.measured = rep.slack;
        row.expected = 0.0;
        row.tolerance = 1e-9;
        row.pass = rep.slack >= -1e-9;
        row.detail = "product minus exact bound for a reference Gaussian; must not go negative";
        rows.push_back(row);
    }
    {
        uncertainty::LimitCaseRow row;
        row.name = "requested-spectrum-ceiling";
        const auto& spec = psi.field.spectrum();
        double w = 0.0, e = 0.0;
        for (std::size_t m = 0; m < g->n(); ++m) {
            double ww = std::norm(spec[m]);
            w += ww;
            e += ww * ops.kinetic_sym[m];
        }
        row.measured = e / (w * p.e_max());
        row.expected = 1.0;
        row.tolerance = 1e-12;
        row.pass = row.measured >= 0.0 && row.measured <= 1.0 + 1e-12;
        row.detail = "mean kinetic energy over the bounded-spectrum ceiling; must stay in [0, 1]";
        rows.push_back(row);
    }
    auto suite = uncertainty::limiting_case_suite();
    rows.insert(rows.end(), suite.begin(), suite.end());
    return rows;
}

inline int print_limits(double q, double alpha, std::ostream& out) {
    auto rows = limits_table(q, alpha);
    out << "limit-recovery table at q = " << io::f17(q) << ", alpha = " << io::f17(alpha)
        << "\n";
    int fails = 0;
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "[%s] %-28s measured %-25s expected %-25s tol %s",
                      r.pass ? "PASS" : "FAIL", r.name.c_str(), io::f17(r.measured).c_str(),
                      io::f17(r.expected).c_str(), io::f17(r.tolerance).c_str());
        out << line << "\n        " << r.detail << "\n";
        if (!r.pass) ++fails;
    }
    if (fails == 0)
        out << "all rows pass\n";
    else
        out << fails << " rows FAIL\n";
    return fails == 0 ? 0 : 1;
}

struct ReliabilityFlag {
    std::string name;
    bool value = false;
    bool healthy = true;
};

inline int run_scenario(const std::string& config_path, const std::string& out_override,
                        bool override_flags, std::ostream& log) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in)
        throw config_error("config file '" + config_path + "': cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string raw = buf.str();
    detail::njson root;
    try {
        root = detail::njson::parse(raw);
    } catch (const detail::njson::parse_error& e) {
        throw config_error("config file '" + config_path + "': " + e.what());
    }
    ScenarioConfig cfg = parse_config(root);
    if (!out_override.empty()) cfg.output.directory = out_override;

    namespace fs = std::filesystem;
    fs::path dir(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw config_error("config field output.directory: cannot create '" + dir.string() +
                           "': " + ec.message());
    DirLock lock(dir);

    GridPtr grid = Grid1D::make(cfg.grid.n_points, cfg.grid.x_min, cfg.grid.x_max);
    auto ops = operators::build_operators(cfg.params, grid);
    WaveFunction psi = build_state(grid, cfg.state);
    std::optional<Potential> pot = build_potential(*grid, cfg.potential, cfg.params);
    const Potential* vptr = pot ? &*pot : nullptr;

    MomentSet base = states::moments(psi, cfg.params, 1.0);
    double p_ref = cfg.p_ref ? *cfg.p_ref : (base.p2 > 0.0 ? std::sqrt(base.p2) : 1.0);

    const bool json_fmt = cfg.output.format == OutputFormat::json;
    std::vector<std::string> outputs;
    std::vector<ReliabilityFlag> flags;

    auto save = [&](const std::string& name, const std::string& body) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f)
            throw config_error("config field output.directory: cannot write '" +
                               (dir / name).string() + "'");
        f << body;
        outputs.push_back(name);
    };

    std::optional<EvolutionTrace> trace;
    if (cfg.evolution) {
        trace = dynamics::evolve(psi, ops, vptr, *cfg.evolution);
        const char* names[] = {"t",           "fidelity", "bures_angle",
                               "mean_x",      "mean_vg",  "energy_mean",
                               "energy_var",  "norm",     "autocorr"};
        auto cell = [&](std::size_t c, std::size_t r) {
            const EvolutionTrace& tr = *trace;
            const std::vector<double>* cols[] = {&tr.times,      &tr.fidelity,
                                                 &tr.bures_angle, &tr.mean_x,
                                                 &tr.mean_vg,     &tr.energy_mean,
                                                 &tr.energy_var,  &tr.norm,
                                                 &tr.autocorr};
            return (*cols[c])[r];
        };
        std::size_t n_rows = trace->times.size();
        if (json_fmt) {
            std::ostringstream j;
            j << "{\n  \"schema_version\": 1,\n  \"rows\": [\n";
            for (std::size_t r = 0; r < n_rows; ++r) {
                j << "    {";
                for (std::size_t c = 0; c < 9; ++c) {
                    if (c) j << ", ";
                    j << "\"" << names[c] << "\": " << io::jnum(cell(c, r));
                }
                j << (r + 1 < n_rows ? "},\n" : "}\n");
            }
            j << "  ]\n}\n";
            save("trace.json", j.str());
        } else {
            io::Csv csv;
            csv.row({names, names + 9});
            for (std::size_t r = 0; r < n_rows; ++r) {
                std::vector<std::string> cells;
                for (std::size_t c = 0; c < 9; ++c) cells.push_back(io::f17(cell(c, r)));
                csv.row(cells);
            }
            save("trace.csv", csv.str());
        }
    }

    if (cfg.analysis.uncertainty) {
        auto theorem = uncertainty::exact_bound(psi, ops, p_ref, ExpansionVariant::theorem_text);
        auto appendix = uncertainty::exact_bound(psi, ops, p_ref, ExpansionVariant::appendix_a2);
        std::ostringstream j;
        j << "{\n"
          << "  \"schema_version\": 1,\n"
          << "  \"dx\": " << io::jnum(appendix.dx) << ",\n"
          << "  \"dp_hybrid\": " << io::jnum(appendix.dp_hybrid) << ",\n"
          << "  \"product\": " << io::jnum(appendix.product) << ",\n"
          << "  \"exact_bound\": " << io::jnum(appendix.exact_bound) << ",\n"
          << "  \"slack\": " << io::jnum(appendix.slack) << ",\n"
          << "  \"p_ref\": " << io::jnum(appendix.p_ref) << ",\n"
          << "  \"expanded_bound\": {\n"
          << "    \"theorem_text\": " << io::jnum(theorem.expanded_bound) << ",\n"
          << "    \"appendix_a2\": " << io::jnum(appendix.expanded_bound) << "\n"
          << "  },\n"
          << "  \"expansion_in_regime\": " << io::jbool(appendix.expansion_in_regime) << ",\n"
          << "  \"log_reliable\": " << io::jbool(appendix.log_reliable) << "\n"
          << "}\n";
        save("uncertainty.json", j.str());
        flags.push_back({"expansion_in_regime", appendix.expansion_in_regime,
                         appendix.expansion_in_regime});
        // the log moment only enters through delta = 2 - alpha terms, so an
        // unreliable log is harmless at alpha = 2
        flags.push_back({"log_reliable", appendix.log_reliable,
                         appendix.log_reliable || cfg.params.alpha >= 2.0});
    }

    if (cfg.analysis.qsl) {
        auto rep = dynamics::qsl_report(psi, ops, vptr, *trace);
        std::ostringstream j;
        j << "{\n"
          << "  \"schema_version\": 1,\n"
          << "  \"delta_H\": " << io::jnum(rep.delta_H) << ",\n"
          << "  \"var_K\": " << io::jnum(rep.var_K) << ",\n"
          << "  \"var_V\": " << io::jnum(rep.var_V) << ",\n"
          << "  \"cov_KV\": " << io::jnum(rep.cov_KV) << ",\n"
          << "  \"mt_bound\": " << io::jnum(rep.mt_bound) << ",\n"
          << "  \"ml_mean_energy\": " << io::jnum(rep.ml_mean_energy) << ",\n"
          << "  \"ml_bound\": " << io::jnum(rep.ml_bound) << ",\n"
          << "  \"t_perp_measured\": "
          << (rep.t_perp_measured ? io::jnum(*rep.t_perp_measured) : std::string("null"))
          << ",\n"
          << "  \"mt_integral_ok\": " << io::jbool(rep.mt_integral_ok) << "\n"
          << "}\n";
        save("qsl.json", j.str());
        flags.push_back({"mt_integral_ok", rep.mt_integral_ok, rep.mt_integral_ok});
    }

    if (cfg.analysis.ehrenfest) {
        auto ex = dynamics::ehrenfest_check(*trace);
        auto ep = dynamics::momentum_force_check(*trace);
        std::ostringstream j;
        j << "{\n"
          << "  \"schema_version\": 1,\n"
          << "  \"max_residual_x\": " << io::jnum(ex.max_residual_x) << ",\n"
          << "  \"pass_x\": " << io::jbool(ex.pass) << ",\n"
          << "  \"max_residual_p\": " << io::jnum(ep.max_residual_p) << ",\n"
          << "  \"pass_p\": " << io::jbool(ep.pass) << "\n"
          << "}\n";
        save("ehrenfest.json", j.str());
    }

    if (cfg.analysis.autocorr_fit) {
        auto f = dynamics::fit_autocorrelation(*trace);
        std::ostringstream j;
        j << "{\n"
          << "  \"schema_version\": 1,\n"
          << "  \"gamma\": " << io::jnum(f.gamma) << ",\n"
          << "  \"alpha_fit\": " << io::jnum(f.alpha_fit) << ",\n"
          << "  \"c_q\": " << io::jnum(f.c_q) << ",\n"
          << "  \"omega_q\": " << io::jnum(f.omega_q) << ",\n"
          << "  \"residual\": " << io::jnum(f.residual) << ",\n"
          << "  \"degenerate\": " << io::jbool(f.degenerate) << ",\n"
          << "  \"low_confidence\": " << io::jbool(f.low_confidence) << ",\n"
          << "  \"iterations\": " << f.iterations << "\n"
          << "}\n";
        save("fit.json", j.str());
        flags.push_back({"fit_degenerate", f.degenerate, !f.degenerate});
        flags.push_back({"fit_low_confidence", f.low_confidence, !f.low_confidence});
    }

    if (cfg.analysis.limits_suite) {
        auto rows = limits_table(cfg.params.q, cfg.params.alpha);
        std::ostringstream j;
        j << "{\n  \"schema_version\": 1,\n  \"rows\": [\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& r = rows[i];
            j << "    {\"name\": " << io::jstr(r.name)
              << ", \"measured\": " << io::jnum(r.measured)
              << ", \"expected\": " << io::jnum(r.expected)
              << ", \"tolerance\": " << io::jnum(r.tolerance)
              << ", \"pass\": " << io::jbool(r.pass) << ", \"detail\": " << io::jstr(r.detail)
              << (i + 1 < rows.size() ? "},\n" : "}\n");
        }
        j << "  ]\n}\n";
        save("limits.json", j.str());
    }

    if (cfg.analysis.propagator) {
        const PropagatorSpec& pr = *cfg.analysis.propagator;
        std::size_t idx = pr.source_index.value_or(grid->n() / 2);
        auto col = dynamics::propagator_slice(ops, pr.t, idx, pr.source_width);
        if (json_fmt) {
            std::ostringstream j;
            j << "{\n  \"schema_version\": 1,\n  \"rows\": [\n";
            for (std::size_t r = 0; r < col.size(); ++r) {
                j << "    {\"x\": " << io::jnum(grid->x()[r])
                  << ", \"re\": " << io::jnum(col[r].real())
                  << ", \"im\": " << io::jnum(col[r].imag())
                  << ", \"abs\": " << io::jnum(std::abs(col[r]))
                  << (r + 1 < col.size() ? "},\n" : "}\n");
            }
            j << "  ]\n}\n";
            save("propagator.json", j.str());
        } else {
            io::Csv csv;
            csv.row({"x", "re", "im", "abs"});
            for (std::size_t r = 0; r < col.size(); ++r)
                csv.row({io::f17(grid->x()[r]), io::f17(col[r].real()),
                         io::f17(col[r].imag()), io::f17(std::abs(col[r]))});
            save("propagator.csv", csv.str());
        }
    }

    if (cfg.analysis.sweep) {
        const auto& values = cfg.analysis.sweep->values;
        std::vector<SweepRow> rows(values.size());
        // materialize both views so worker threads only read the caches
        psi.field.spectrum();
        psi.field.position();
        std::size_t n_threads = thread_cap(values.size());
        if (n_threads <= 1) {
            for (std::size_t i = 0; i < values.size(); ++i)
                rows[i] = sweep_row(cfg, grid, psi, vptr, p_ref, values[i]);
        } else {
            std::atomic<std::size_t> next{0};
            std::exception_ptr first_error;
            std::mutex error_mu;
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < n_threads; ++t)
                pool.emplace_back([&] {
                    for (std::size_t i; (i = next.fetch_add(1)) < values.size();) {
                        try {
                            rows[i] = sweep_row(cfg, grid, psi, vptr, p_ref, values[i]);
                        } catch (...) {
                            std::lock_guard<std::mutex> hold(error_mu);
                            if (!first_error) first_error = std::current_exception();
                        }
                    }
                });
            for (auto& th : pool) th.join();
            if (first_error) std::rethrow_exception(first_error);
        }
        if (json_fmt) {
            std::ostringstream j;
            j << "{\n  \"schema_version\": 1,\n  \"axis\": "
              << (cfg.analysis.sweep->axis == SweepAxis::q ? "\"q\"" : "\"alpha\"")
              << ",\n  \"rows\": [\n";
            for (std::size_t r = 0; r < rows.size(); ++r) {
                j << "    {\"value\": " << io::jnum(rows[r].value)
                  << ", \"product\": " << io::jnum(rows[r].product)
                  << ", \"exact_bound\": " << io::jnum(rows[r].exact_bound)
                  << ", \"delta_K\": " << io::jnum(rows[r].delta_k)
                  << ", \"mt_bound\": " << io::jnum(rows[r].mt_bound)
                  << (r + 1 < rows.size() ? "},\n" : "}\n");
            }
            j << "  ]\n}\n";
            save("sweep.json", j.str());
        } else {
            io::Csv csv;
            csv.row({"value", "product", "exact_bound", "delta_K", "mt_bound"});
            for (const auto& r : rows)
                csv.row({io::f17(r.value), io::f17(r.product), io::f17(r.exact_bound),
                         io::f17(r.delta_k), io::f17(r.mt_bound)});
            save("sweep.csv", csv.str());
        }
    }

    {
        std::ostringstream j;
        j << "{\n"
          << "  \"schema_version\": 1,\n"
          << "  \"tool_version\": " << io::jstr(tool_version) << ",\n"
          << "  \"config_hash\": " << io::jstr("fnv1a64:" + io::fnv1a_hex(raw)) << ",\n"
          << "  \"format\": " << (json_fmt ? "\"json\"" : "\"csv\"") << ",\n"
          << "  \"override_flags\": " << io::jbool(override_flags) << ",\n"
          << "  \"p_ref\": " << io::jnum(p_ref) << ",\n"
          << "  \"reliability\": {";
        for (std::size_t i = 0; i < flags.size(); ++i)
            j << (i ? ", " : "") << io::jstr(flags[i].name) << ": " << io::jbool(flags[i].value);
        j << "},\n  \"outputs\": [";
        for (std::size_t i = 0; i < outputs.size(); ++i)
            j << (i ? ", " : "") << io::jstr(outputs[i]);
        j << "]\n}\n";
        save("manifest.json", j.str());
    }

    std::vector<std::string> bad;
    for (const auto& f : flags)
        if (!f.healthy) bad.push_back(f.name);
    if (!bad.empty() && !override_flags) {
        log << "results flagged unreliable:";
        for (const auto& b : bad) log << " " << b;
        log << " (outputs written to " << dir.string()
            << "; rerun with --override-flags to accept)\n";
        return 4;
    }
    log << "wrote " << outputs.size() << " files to " << dir.string() << "\n";
    return 0;
}

} // namespace scenario
} // namespace hybridqm
