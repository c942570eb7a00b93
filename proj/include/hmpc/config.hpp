#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "hmpc/benchmark.hpp"
#include "hmpc/model_io.hpp"

namespace hmpc {

struct SurrogateSource {
    std::uint64_t seed = kCryoPresetSeed;
    double coupling = kCryoPresetCoupling;
};

struct BetaSweep {
    double start = 0.0, stop = 1.0, step = 0.05;
};

struct NegotiateOptions {
    long count = 50;
    bool randomize = true;
    double amplitude = 1.0;   ///< half-width of the uniform random initial profiles
    std::optional<Vector> r;  ///< set-point to negotiate at; r_d when absent
};

/// Everything a CLI run needs. Matrices left empty are filled from the plant at resolve time.
struct RunConfig {
    std::uint64_t seed = 0;
    std::variant<SurrogateSource, std::string> plant = SurrogateSource{};
    Index horizon = kPresetHorizon;
    std::array<std::optional<Matrix>, 2> Q, R;
    std::string weights = "disturbance_rejection";
    std::array<std::optional<Matrix>, 2> Qc, Rc;
    int q = kPresetTailExponent;
    std::optional<Vector> r_d;
    CoordinatorConfig coordinator;
    std::optional<double> beta;  ///< nullopt: use the certified recommendation
    BetaSweep sweep;
    NegotiateOptions negotiate;
    std::variant<std::monostate, std::string, ScenarioScript> scenario;
    std::optional<ControlMode> mode;
    std::string output_dir = "out";
    std::string transport = "inproc";
    std::string base_dir = ".";  ///< directory relative paths are resolved against (not serialised)

    [[nodiscard]] std::string resolve_path(const std::string& p) const {
        const std::filesystem::path path(p);
        return path.is_absolute() ? p : (std::filesystem::path(base_dir) / path).string();
    }
};

namespace detail {

inline std::array<std::optional<Matrix>, 2> weight_pair(FieldReader& r, const std::string& key) {
    std::array<std::optional<Matrix>, 2> out;
    const json* v = r.optional(key);
    if (!v) return out;
    FieldReader w(*v, r.path(key));
    for (int s = 0; s < 2; ++s) {
        const char* name = s == 0 ? "s1" : "s2";
        if (const json* m = w.optional(name)) {
            if (m->is_number()) fail(ErrorCode::InvalidConfig, w.path(name) + ": give a matrix or {\"diag\": [...]}");
            out[s] = m->is_object() ? FieldReader::as_weight(*m, w.path(name), static_cast<Index>((*m)["diag"].size()))
                                    : FieldReader::as_matrix(*m, w.path(name));
        }
    }
    w.finish();
    return out;
}

inline json weight_pair_to_json(const std::array<std::optional<Matrix>, 2>& w) {
    json j = json::object();
    for (int s = 0; s < 2; ++s)
        if (w[s]) j[s == 0 ? "s1" : "s2"] = codec::matrix_to_json(*w[s]);
    return j;
}

inline bool any(const std::array<std::optional<Matrix>, 2>& w) { return w[0] || w[1]; }

}  // namespace detail

[[nodiscard]] inline RunConfig run_config_from_json(const json& j, const std::string& base_dir = ".") {
    FieldReader r(j, "");
    RunConfig c;
    c.base_dir = base_dir;
    const long seed = r.integer("seed", 0);
    if (seed < 0) fail(ErrorCode::InvalidConfig, r.path("seed") + ": must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);

    if (const json* p = r.optional("plant")) {
        FieldReader pr(*p, r.path("plant"));
        if (pr.has("file")) {
            c.plant = pr.string("file");
        } else if (pr.has("surrogate")) {
            FieldReader sr = pr.object("surrogate");
            SurrogateSource s;
            const long ps = sr.integer("seed");
            if (ps < 0) fail(ErrorCode::InvalidConfig, sr.path("seed") + ": must be non-negative");
            s.seed = static_cast<std::uint64_t>(ps);
            s.coupling = sr.number("coupling");
            if (s.coupling < 0.0) fail(ErrorCode::InvalidConfig, sr.path("coupling") + ": must be non-negative");
            sr.finish();
            c.plant = s;
        } else {
            fail(ErrorCode::InvalidConfig, r.path("plant") + ": expected \"file\" or \"surrogate\"");
        }
        pr.finish();
    }

    if (const json* l = r.optional("local")) {
        FieldReader lr(*l, r.path("local"));
        c.horizon = lr.integer("horizon", kPresetHorizon);
        if (c.horizon < 1) fail(ErrorCode::InvalidConfig, lr.path("horizon") + ": must be at least 1");
        c.Q = detail::weight_pair(lr, "Q");
        c.R = detail::weight_pair(lr, "R");
        lr.finish();
    }

    if (const json* cj = r.optional("central")) {
        FieldReader cr(*cj, r.path("central"));
        c.weights = cr.string("mode", c.weights);
        c.q = static_cast<int>(cr.integer("q", kPresetTailExponent));
        if (c.q < 0) fail(ErrorCode::InvalidConfig, cr.path("q") + ": must be non-negative");
        if (cr.has("r_d")) c.r_d = cr.vector("r_d");
        c.Qc = detail::weight_pair(cr, "Qc");
        c.Rc = detail::weight_pair(cr, "Rc");
        cr.finish();
    }

    if (const json* co = r.optional("coordinator")) {
        FieldReader kr(*co, r.path("coordinator"));
        auto& k = c.coordinator;
        if (const json* b = kr.optional("beta")) {
            if (b->is_string() && b->get<std::string>() == "auto") {
                c.beta.reset();
            } else {
                c.beta = FieldReader::as_number(*b, kr.path("beta"));
            }
        }
        if (const json* s = kr.optional("beta_sweep")) {
            FieldReader sr(*s, kr.path("beta_sweep"));
            c.sweep.start = sr.number("start", 0.0);
            c.sweep.stop = sr.number("stop", 1.0);
            c.sweep.step = sr.number("step", 0.05);
            sr.finish();
            if (!(c.sweep.step > 0.0) || c.sweep.stop < c.sweep.start)
                fail(ErrorCode::InvalidConfig, kr.path("beta_sweep") + ": needs start <= stop and step > 0");
        }
        k.tol = kr.number("tol", k.tol);
        k.max_iter = kr.integer("max_iter", k.max_iter);
        k.delta = kr.number("delta", k.delta);
        k.m = static_cast<int>(kr.integer("m", k.m));
        k.workers = static_cast<int>(kr.integer("workers", k.workers));
        k.warm_start = kr.boolean("warm_start", k.warm_start);
        k.divergence_sentinel = kr.number("divergence_sentinel", k.divergence_sentinel);
        k.growth_window = kr.integer("growth_window", k.growth_window);
        kr.finish();
        if (k.m < 1 || k.m % 2 == 0) fail(ErrorCode::InvalidConfig, kr.path("m") + ": must be a positive odd number");
        CoordinatorConfig probe = k;
        if (c.beta) probe.beta = *c.beta;
        try {
            probe.validate();
        } catch (const Error& e) {
            fail(ErrorCode::InvalidConfig, kr.where() + ": " + e.message());
        }
    }

    if (const json* n = r.optional("negotiate")) {
        FieldReader nr(*n, r.path("negotiate"));
        c.negotiate.count = nr.integer("count", c.negotiate.count);
        if (c.negotiate.count < 0) fail(ErrorCode::InvalidConfig, nr.path("count") + ": must be non-negative");
        c.negotiate.randomize = nr.boolean("randomize", c.negotiate.randomize);
        c.negotiate.amplitude = nr.number("amplitude", c.negotiate.amplitude);
        if (nr.has("r")) c.negotiate.r = nr.vector("r");
        nr.finish();
    }

    if (const json* s = r.optional("scenario")) {
        if (s->is_string()) {
            c.scenario = s->get<std::string>();
        } else {
            c.scenario = scenario_from_json(*s, r.path("scenario"));
        }
    }
    if (const json* m = r.optional("mode")) c.mode = parse_control_mode(FieldReader::as_string(*m, r.path("mode")), r.path("mode"));
    c.output_dir = r.string("output_dir", c.output_dir);
    c.transport = r.string("transport", c.transport);
    if (c.transport != "inproc" && c.transport.rfind("wire:", 0) != 0)
        fail(ErrorCode::InvalidConfig, r.path("transport") + ": expected inproc or wire:<host:port>,<host:port>");
    r.finish();
    return c;
}

[[nodiscard]] inline json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    if (const auto* s = std::get_if<SurrogateSource>(&c.plant)) {
        j["plant"] = {{"surrogate", {{"seed", s->seed}, {"coupling", s->coupling}}}};
    } else {
        j["plant"] = {{"file", std::get<std::string>(c.plant)}};
    }
    j["local"] = {{"horizon", c.horizon}};
    if (detail::any(c.Q)) j["local"]["Q"] = detail::weight_pair_to_json(c.Q);
    if (detail::any(c.R)) j["local"]["R"] = detail::weight_pair_to_json(c.R);
    j["central"] = {{"mode", c.weights}, {"q", c.q}};
    if (c.r_d) j["central"]["r_d"] = codec::vector_to_json(*c.r_d);
    if (detail::any(c.Qc)) j["central"]["Qc"] = detail::weight_pair_to_json(c.Qc);
    if (detail::any(c.Rc)) j["central"]["Rc"] = detail::weight_pair_to_json(c.Rc);
    const auto& k = c.coordinator;
    j["coordinator"] = {{"beta", c.beta ? json(*c.beta) : json("auto")},
                        {"beta_sweep", {{"start", c.sweep.start}, {"stop", c.sweep.stop}, {"step", c.sweep.step}}},
                        {"tol", k.tol},
                        {"max_iter", k.max_iter},
                        {"delta", k.delta},
                        {"m", k.m},
                        {"workers", k.workers},
                        {"warm_start", k.warm_start},
                        {"divergence_sentinel", k.divergence_sentinel},
                        {"growth_window", k.growth_window}};
    j["negotiate"] = {{"count", c.negotiate.count}, {"randomize", c.negotiate.randomize}, {"amplitude", c.negotiate.amplitude}};
    if (c.negotiate.r) j["negotiate"]["r"] = codec::vector_to_json(*c.negotiate.r);
    if (const auto* p = std::get_if<std::string>(&c.scenario)) j["scenario"] = *p;
    if (const auto* s = std::get_if<ScenarioScript>(&c.scenario)) j["scenario"] = to_json(*s);
    if (c.mode) j["mode"] = to_string(*c.mode);
    j["output_dir"] = c.output_dir;
    j["transport"] = c.transport;
    return j;
}

[[nodiscard]] inline RunConfig load_run_config(const std::string& path) {
    const json j = read_json_file(path);
    const auto dir = std::filesystem::path(path).parent_path();
    try {
        return run_config_from_json(j, dir.empty() ? "." : dir.string());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.message());
    }
}

[[nodiscard]] inline CoupledPlant build_plant(const RunConfig& c) {
    if (const auto* s = std::get_if<SurrogateSource>(&c.plant)) return make_surrogate_plant(s->seed, s->coupling);
    return load_plant(c.resolve_path(std::get<std::string>(c.plant)));
}

/// Controller setup for `plant`: explicit weights where given, preset defaults otherwise.
[[nodiscard]] inline ControllerSetup build_setup(const RunConfig& c, const CoupledPlant& p) {
    ControllerSetup s;
    s.local = preset_local_weights(p, c.horizon);
    std::array<Matrix, 2> Qc;
    if (!(c.Qc[0] && c.Qc[1])) {
        try {
            Qc = weight_preset(c.weights, p.s1.ny(), p.s2.ny());
        } catch (const Error& e) {
            fail(ErrorCode::InvalidConfig, "/central/mode: " + e.message());
        }
    }
    Vector r_d = c.r_d ? *c.r_d : Vector::Zero(p.s1.ny() + p.s2.ny());
    if (r_d.size() != p.s1.ny() + p.s2.ny())
        fail(ErrorCode::InvalidConfig, "/central/r_d: expected " + std::to_string(p.s1.ny() + p.s2.ny()) + " entries");
    for (int i = 0; i < 2; ++i) {
        const std::string who = i == 0 ? "s1" : "s2";
        if (c.Q[i]) s.local[i].Q = *c.Q[i];
        if (c.R[i]) s.local[i].R = *c.R[i];
        try {
            s.local[i].validate(p.sub(i).nx(), p.sub(i).nu());
        } catch (const Error& e) {
            fail(ErrorCode::InvalidConfig, "/local/" + who + ": " + e.message());
        }
        auto& cc = s.central[i];
        cc.Qc = c.Qc[i] ? *c.Qc[i] : Qc[i];
        cc.Rc = c.Rc[i] ? *c.Rc[i] : Matrix::Zero(p.sub(i).nu(), p.sub(i).nu());
        cc.q = c.q;
        cc.r_d = i == 0 ? r_d.head(p.s1.ny()) : r_d.tail(p.s2.ny());
        try {
            cc.validate(p.sub(i).ny(), p.sub(i).nu());
        } catch (const Error& e) {
            fail(ErrorCode::InvalidConfig, "/central/" + who + ": " + e.message());
        }
    }
    s.coordinator = c.coordinator;
    s.coordinator.beta = c.beta.value_or(0.5);
    s.auto_beta = !c.beta.has_value();
    s.certification_grid = beta_grid(c.sweep.start, c.sweep.stop, c.sweep.step);
    return s;
}

[[nodiscard]] inline ScenarioScript build_scenario(const RunConfig& c) {
    ScenarioScript sc;
    if (const auto* p = std::get_if<std::string>(&c.scenario)) {
        const std::string path = c.resolve_path(*p);
        const json j = read_json_file(path);
        try {
            sc = scenario_from_json(j);
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.message());
        }
    } else if (const auto* s = std::get_if<ScenarioScript>(&c.scenario)) {
        sc = *s;
    } else {
        fail(ErrorCode::InvalidConfig, "/scenario: required for simulate");
    }
    sc.seed = c.seed;
    if (c.mode) sc.mode = *c.mode;
    return sc;
}

}  // namespace hmpc
