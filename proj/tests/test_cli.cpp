// Scenario layer: config parsing, run artifacts, determinism, schemas.
//
// Numeric oracles are thin here on purpose; the physics is covered by the
// per-module suites and the selftest binary. What this file pins down is the
// contract of the tool around the numerics: rejected configs name the field
// that broke, runs are reproducible byte for byte, tabular output follows
// RFC 4180 with full-precision round-trip values, and every JSON artifact
// matches the schema shipped next to the sources.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenario.hpp"

using namespace hybridqm;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;
using njson = nlohmann::json;

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("hybridqm_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool mentions(const std::string& msg, const std::string& needle) {
    return msg.find(needle) != std::string::npos;
}

// What parse_config rejects the body with, or "(accepted)".
std::string rejection(const njson& body) {
    try {
        scenario::parse_config(body);
    } catch (const config_error& e) {
        return e.what();
    }
    return "(accepted)";
}

njson base_config() {
    njson cfg;
    cfg["schema_version"] = 1;
    cfg["params"] = {{"q", 1.3}, {"alpha", 1.7}};
    cfg["grid"] = {{"n_points", 256}, {"x_min", -12.0}, {"x_max", 12.0}};
    cfg["state"] = {{"type", "gaussian"}, {"center_x", 0.0}, {"center_k", 2.0}, {"sigma", 1.0}};
    cfg["potential"] = {{"type", "none"}};
    cfg["analysis"] = njson::object();
    return cfg;
}

// Writes the body next to the output directory and runs it.
int run_config(const njson& body, const fs::path& out_dir, bool override_flags = false) {
    fs::path cfg_path = out_dir.string() + ".json";
    write_file(cfg_path, body.dump(2) + "\n");
    std::ostringstream log;
    return scenario::run_scenario(cfg_path.string(), out_dir.string(), override_flags, log);
}

bool type_matches(const njson& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
}

// Validates the draft-07 subset the shipped schemas actually use:
// type, required, properties, additionalProperties, items, enum, oneOf, const.
void validate_schema(const njson& inst, const njson& schema, const std::string& where,
                     std::vector<std::string>& errors) {
    if (schema.contains("const")) {
        if (inst != schema.at("const")) errors.push_back(where + ": const mismatch");
        return;
    }
    if (schema.contains("oneOf")) {
        int hits = 0;
        for (const njson& sub : schema.at("oneOf")) {
            std::vector<std::string> sub_errors;
            validate_schema(inst, sub, where, sub_errors);
            if (sub_errors.empty()) ++hits;
        }
        if (hits != 1)
            errors.push_back(where + ": matched " + std::to_string(hits) + " oneOf branches");
        return;
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const njson& cand : schema.at("enum")) hit = hit || inst == cand;
        if (!hit) errors.push_back(where + ": not in enum");
    }
    if (schema.contains("type")) {
        const njson& t = schema.at("type");
        bool ok = t.is_array() ? std::any_of(t.begin(), t.end(),
                                             [&](const njson& u) {
                                                 return type_matches(inst, u.get<std::string>());
                                             })
                               : type_matches(inst, t.get<std::string>());
        if (!ok) {
            errors.push_back(where + ": wrong type");
            return;
        }
    }
    if (inst.is_object()) {
        if (schema.contains("required"))
            for (const njson& k : schema.at("required"))
                if (!inst.contains(k.get<std::string>()))
                    errors.push_back(where + ": missing " + k.get<std::string>());
        const njson* props = schema.contains("properties") ? &schema.at("properties") : nullptr;
        for (auto it = inst.begin(); it != inst.end(); ++it) {
            if (props && props->contains(it.key())) {
                validate_schema(it.value(), props->at(it.key()), where + "." + it.key(), errors);
            } else if (schema.contains("additionalProperties")) {
                const njson& ap = schema.at("additionalProperties");
                if (ap.is_boolean()) {
                    if (!ap.get<bool>()) errors.push_back(where + ": unexpected key " + it.key());
                } else {
                    validate_schema(it.value(), ap, where + "." + it.key(), errors);
                }
            }
        }
    }
    if (inst.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const njson& el : inst)
            validate_schema(el, schema.at("items"), where + "[" + std::to_string(i++) + "]",
                            errors);
    }
}

struct CwdGuard {
    fs::path saved;
    explicit CwdGuard(const fs::path& to) : saved(fs::current_path()) { fs::current_path(to); }
    ~CwdGuard() { fs::current_path(saved); }
};

} // namespace

TEST_CASE("config rejection names the offending field", "[cli]") {
    REQUIRE(rejection(base_config()) == "(accepted)");

    auto cfg = base_config();
    cfg["params"]["q"] = 1.0;
    REQUIRE(mentions(rejection(cfg), "params.q"));

    cfg = base_config();
    cfg["frequency"] = 3.0;
    REQUIRE(mentions(rejection(cfg), "frequency"));

    cfg = base_config();
    cfg["schema_version"] = 2;
    REQUIRE(mentions(rejection(cfg), "schema_version"));

    cfg = base_config();
    cfg["analysis"]["qsl"] = true; // no evolution block to analyze
    REQUIRE(mentions(rejection(cfg), "analysis.qsl"));

    cfg = base_config();
    cfg["analysis"]["sweep"] = {{"axis", "q"}, {"values", {1.2, 1.0}}};
    REQUIRE(mentions(rejection(cfg), "analysis.sweep.values[1]"));

    cfg = base_config();
    cfg["state"] = {{"type", "two_mode"}, {"k1_index", 5}, {"k2_index", 5}};
    REQUIRE(mentions(rejection(cfg), "state.k2_index"));

    cfg = base_config();
    cfg["potential"] = {{"type", "harmonic"}, {"omega", 1.0}};
    cfg["evolution"] = {{"dt", 0.001}, {"n_steps", 10}, {"splitting", "exact_free"}};
    REQUIRE(mentions(rejection(cfg), "evolution.splitting"));

    cfg = base_config();
    cfg["output"] = {{"format", "yaml"}};
    REQUIRE(mentions(rejection(cfg), "output.format"));

    cfg = base_config();
    cfg["p_ref"] = -2.0;
    REQUIRE(mentions(rejection(cfg), "p_ref"));
}

TEST_CASE("tabulated potential interpolates linearly and checks its domain", "[cli]") {
    auto dir = fresh_dir("table");
    fs::path ramp = dir / "ramp.dat";
    write_file(ramp, "# piecewise ramp\n-10 -10\n0 0\n10 30\n");

    auto g = Grid1D::make(16, -8.0, 8.0);
    Potential v = scenario::table_potential(*g, ramp.string());
    for (std::size_t j = 0; j < g->n(); ++j) {
        double x = g->x()[j];
        double expect = x < 0.0 ? x : 3.0 * x;
        REQUIRE(v.samples[j] == Approx(expect).margin(1e-12));
    }

    auto wide = Grid1D::make(16, -32.0, 32.0);
    REQUIRE_THROWS_AS(scenario::table_potential(*wide, ramp.string()), config_error);

    fs::path three = dir / "three.dat";
    write_file(three, "0 1\n1 2 3\n");
    REQUIRE_THROWS_AS(scenario::table_potential(*g, three.string()), config_error);

    fs::path backwards = dir / "backwards.dat";
    write_file(backwards, "0 1\n-1 2\n");
    REQUIRE_THROWS_AS(scenario::table_potential(*g, backwards.string()), config_error);
}

TEST_CASE("near-standard gaussian run lands on the textbook product", "[cli]") {
    auto out = fresh_dir("sqm");
    njson cfg = base_config();
    cfg["params"] = {{"q", 1.00000001}, {"alpha", 2.0}};
    cfg["grid"] = {{"n_points", 1024}, {"x_min", -32.0}, {"x_max", 32.0}};
    cfg["state"] = {{"type", "gaussian"}, {"center_x", 0.0}, {"center_k", 0.0}, {"sigma", 1.0}};
    cfg["analysis"] = {{"uncertainty", true}};
    cfg["p_ref"] = "auto";
    REQUIRE(run_config(cfg, out) == 0);

    njson rep = njson::parse(read_file(out / "uncertainty.json"));
    double product = rep.at("product").get<double>();
    double bound = rep.at("exact_bound").get<double>();
    REQUIRE(product / 0.5 == Approx(1.0).margin(1e-5));
    REQUIRE(bound / 0.5 == Approx(1.0).margin(1e-5));
    REQUIRE(rep.at("slack").get<double>() >= -1e-9);
    REQUIRE(rep.at("expansion_in_regime").get<bool>());
}

TEST_CASE("two-mode run measures orthogonalization at the speed-limit bound", "[cli]") {
    auto out = fresh_dir("qsl");
    std::string cfg_path = std::string(HYBRIDQM_SOURCE_DIR) + "/configs/two_mode_qsl.json";
    std::ostringstream log;
    REQUIRE(scenario::run_scenario(cfg_path, out.string(), false, log) == 0);

    njson rep = njson::parse(read_file(out / "qsl.json"));
    REQUIRE(rep.at("t_perp_measured").is_number());
    double ratio = rep.at("t_perp_measured").get<double>() / rep.at("mt_bound").get<double>();
    REQUIRE(ratio == Approx(1.0).margin(1e-6));
    REQUIRE(rep.at("mt_integral_ok").get<bool>());
}

TEST_CASE("repeat runs are byte-identical and csv follows convention", "[cli]") {
    njson cfg = base_config();
    cfg["potential"] = {{"type", "harmonic"}, {"omega", 1.0}};
    cfg["evolution"] = {{"dt", 0.005}, {"n_steps", 200}, {"record_every", 10},
                        {"splitting", "strang"}};
    cfg["analysis"] = {{"uncertainty", true}, {"qsl", true}};

    auto out_a = fresh_dir("repeat_a");
    auto out_b = fresh_dir("repeat_b");
    fs::path cfg_path = out_a.string() + ".json";
    write_file(cfg_path, cfg.dump(2) + "\n");
    std::ostringstream log;
    REQUIRE(scenario::run_scenario(cfg_path.string(), out_a.string(), false, log) == 0);
    REQUIRE(scenario::run_scenario(cfg_path.string(), out_b.string(), false, log) == 0);

    auto listing = [](const fs::path& d) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(d))
            names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };
    auto names_a = listing(out_a);
    REQUIRE(names_a == listing(out_b));
    REQUIRE(!names_a.empty());
    for (const auto& name : names_a) {
        INFO(name);
        REQUIRE(read_file(out_a / name) == read_file(out_b / name));
    }

    std::string tr = read_file(out_a / "trace.csv");
    const std::string header =
        "t,fidelity,bures_angle,mean_x,mean_vg,energy_mean,energy_var,norm,autocorr";
    REQUIRE(tr.rfind(header + "\r\n", 0) == 0);

    std::size_t lines = 0;
    for (std::size_t start = 0; start < tr.size(); ++lines) {
        std::size_t nl = tr.find('\n', start);
        REQUIRE(nl != std::string::npos);
        REQUIRE(nl > start);
        REQUIRE(tr[nl - 1] == '\r');
        start = nl + 1;
    }
    REQUIRE(lines == 22); // header plus the initial record plus 200/10 more

    // every cell of the first data row survives a strtod round trip at %.17g
    std::size_t row_begin = tr.find('\n') + 1;
    std::string row = tr.substr(row_begin, tr.find('\n', row_begin) - row_begin - 1);
    std::istringstream cells(row);
    std::string cell;
    std::size_t n_cells = 0;
    while (std::getline(cells, cell, ',')) {
        ++n_cells;
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        REQUIRE(end == cell.c_str() + cell.size());
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        REQUIRE(cell == buf);
    }
    REQUIRE(n_cells == 9);
}

TEST_CASE("unhealthy reliability flags gate the exit code unless overridden", "[cli]") {
    njson cfg = base_config();
    cfg["params"] = {{"q", 2.6}, {"alpha", 1.7}}; // log 2.6 is far outside the small-eps regime
    cfg["analysis"] = {{"uncertainty", true}};

    auto out = fresh_dir("gate");
    REQUIRE(run_config(cfg, out) == 4);
    njson man = njson::parse(read_file(out / "manifest.json"));
    REQUIRE(man.at("reliability").at("expansion_in_regime").get<bool>() == false);

    auto out2 = fresh_dir("gate_override");
    REQUIRE(run_config(cfg, out2, true) == 0);
    njson man2 = njson::parse(read_file(out2 / "manifest.json"));
    REQUIRE(man2.at("override_flags").get<bool>());
}

TEST_CASE("a second run cannot enter a locked output directory", "[cli]") {
    auto out = fresh_dir("locked");
    write_file(out / ".hybridqm.lock", "held\n");

    fs::path cfg_path = out.string() + ".json";
    write_file(cfg_path, base_config().dump(2) + "\n");
    std::ostringstream log;
    std::string msg = "(no error)";
    try {
        scenario::run_scenario(cfg_path.string(), out.string(), false, log);
    } catch (const config_error& e) {
        msg = e.what();
    }
    REQUIRE(mentions(msg, "locked by another run"));
}

TEST_CASE("thread cap honors the environment override", "[cli]") {
    ::setenv("HYBRIDQM_THREADS", "2", 1);
    std::size_t n = scenario::thread_cap(8);
    REQUIRE(n >= 1);
    REQUIRE(n <= 2);

    ::setenv("HYBRIDQM_THREADS", "zero", 1);
    REQUIRE_THROWS_AS(scenario::thread_cap(8), config_error);
    ::unsetenv("HYBRIDQM_THREADS");
}

TEST_CASE("json artifacts validate against the shipped schemas", "[cli]") {
    njson cfg = base_config();
    cfg["potential"] = {{"type", "harmonic"}, {"omega", 1.0}};
    cfg["evolution"] = {{"dt", 0.005}, {"n_steps", 160}, {"record_every", 10},
                        {"splitting", "strang"}};
    cfg["analysis"] = {{"uncertainty", true},
                       {"qsl", true},
                       {"ehrenfest", true},
                       {"autocorr_fit", true},
                       {"limits_suite", true},
                       {"propagator", {{"t", 0.5}, {"source_width", 0.25}}},
                       {"sweep", {{"axis", "alpha"}, {"values", {1.5, 2.0}}}}};
    cfg["output"] = {{"format", "json"}};

    auto out = fresh_dir("schema_run");
    // override so a low-confidence fit on this short trace cannot gate the run
    REQUIRE(run_config(cfg, out, true) == 0);

    const fs::path schemas = fs::path(HYBRIDQM_SOURCE_DIR) / "schemas";
    const char* pairs[][2] = {
        {"trace.json", "trace.schema.json"},
        {"uncertainty.json", "uncertainty.schema.json"},
        {"qsl.json", "qsl.schema.json"},
        {"ehrenfest.json", "ehrenfest.schema.json"},
        {"fit.json", "fit.schema.json"},
        {"limits.json", "limits.schema.json"},
        {"propagator.json", "propagator.schema.json"},
        {"sweep.json", "sweep.schema.json"},
        {"manifest.json", "manifest.schema.json"},
    };
    for (const auto& pr : pairs) {
        INFO(pr[0]);
        njson inst = njson::parse(read_file(out / pr[0]));
        njson schema = njson::parse(read_file(schemas / pr[1]));
        std::vector<std::string> errors;
        validate_schema(inst, schema, pr[0], errors);
        INFO((errors.empty() ? std::string("clean") : errors.front()));
        REQUIRE(errors.empty());
    }

    njson man = njson::parse(read_file(out / "manifest.json"));
    REQUIRE(man.at("outputs").size() == 8); // every artifact except the manifest itself
}

TEST_CASE("shipped sample configs parse and match the config schema", "[cli]") {
    njson schema =
        njson::parse(read_file(fs::path(HYBRIDQM_SOURCE_DIR) / "schemas/config.schema.json"));
    const char* names[] = {"sqm_uncertainty.json",  "two_mode_qsl.json", "hybrid_quartic.json",
                           "levy_propagator.json",  "q_sweep.json",      "table_well.json"};

    CwdGuard guard(HYBRIDQM_SOURCE_DIR); // table potential paths are repo-relative
    for (const char* name : names) {
        INFO(name);
        njson body = njson::parse(read_file(fs::path("configs") / name));
        std::vector<std::string> errors;
        validate_schema(body, schema, name, errors);
        INFO((errors.empty() ? std::string("clean") : errors.front()));
        REQUIRE(errors.empty());
        REQUIRE_NOTHROW(scenario::parse_config(body));
    }
}
