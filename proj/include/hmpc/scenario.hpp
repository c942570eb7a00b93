#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hmpc/json_fields.hpp"

namespace hmpc {

enum class ControlMode { Hierarchical, Decentralized };

constexpr const char* to_string(ControlMode m) { return m == ControlMode::Hierarchical ? "hierarchical" : "decentralized"; }

inline ControlMode parse_control_mode(const std::string& s, const std::string& at = "mode") {
    if (s == "hierarchical") return ControlMode::Hierarchical;
    if (s == "decentralized") return ControlMode::Decentralized;
    fail(ErrorCode::InvalidConfig, at + ": expected hierarchical or decentralized, got '" + s + "'");
}

/// Periodic rectangular pulse, active on samples [start, stop). Period in samples.
struct HeatPulse {
    double amplitude = 0.0;
    long period = 1;
    double duty = 0.0;
    long start = 0;
    long stop = -1;  ///< negative: never stops

    void validate(const std::string& at = "pulse") const {
        if (!std::isfinite(amplitude)) fail(ErrorCode::InvalidConfig, at + ": amplitude must be finite");
        if (period < 1) fail(ErrorCode::InvalidConfig, at + ": period must be at least one sample");
        if (!(duty >= 0.0 && duty <= 1.0)) fail(ErrorCode::InvalidConfig, at + ": duty must lie in [0, 1]");
        if (start < 0) fail(ErrorCode::InvalidConfig, at + ": start must be non-negative");
    }

    bool operator==(const HeatPulse&) const = default;
};

[[nodiscard]] inline double heat_pulse(long t, const HeatPulse& p) {
    if (t < p.start || (p.stop >= 0 && t >= p.stop)) return 0.0;
    const long phase = (t - p.start) % p.period;
    return static_cast<double>(phase) < p.duty * static_cast<double>(p.period) ? p.amplitude : 0.0;
}

struct DisturbanceChannel {
    int subsystem = 0;  ///< 0 for s1, 1 for s2
    Index channel = 0;
    HeatPulse pulse;

    bool operator==(const DisturbanceChannel&) const = default;
};

/// Sum of all pulse trains feeding each disturbance vector at sample t.
[[nodiscard]] inline std::array<Vector, 2> disturbance_at(long t, const std::vector<DisturbanceChannel>& channels,
                                                          const std::array<Index, 2>& widths) {
    std::array<Vector, 2> w{Vector::Zero(widths[0]), Vector::Zero(widths[1])};
    for (const auto& c : channels) {
        if (c.subsystem < 0 || c.subsystem > 1 || c.channel < 0 || c.channel >= widths[static_cast<std::size_t>(c.subsystem)])
            fail(ErrorCode::DimensionMismatch, "disturbance channel out of range");
        w[static_cast<std::size_t>(c.subsystem)](c.channel) += heat_pulse(t, c.pulse);
    }
    return w;
}

struct ScenarioEvent {
    enum class Kind { SetReference, SetWeights, FixSetpoint, TakeActuator, Release };
    long time = 0;
    Kind kind = Kind::SetReference;

    Vector r_d;  ///< SetReference: full central reference

    std::string weights_mode;                  ///< SetWeights: named preset, or empty
    std::optional<std::array<Matrix, 2>> Qc;   ///< SetWeights: explicit output weights
    std::optional<std::array<Matrix, 2>> Rc;   ///< SetWeights: explicit input weights

    Index index = 0;    ///< FixSetpoint / Release of a set-point: global set-point index
    double value = 0.0; ///< FixSetpoint: operator value

    int subsystem = -1;            ///< TakeActuator / Release of an actuator
    Index actuator = 0;
    std::optional<Index> output;   ///< TakeActuator: output dropped from tracking (default: actuator)
    std::vector<double> values;    ///< TakeActuator: operator deviations from `time` on, last value held

    [[nodiscard]] bool releases_actuator() const { return kind == Kind::Release && subsystem >= 0; }
};

struct ScenarioScript {
    long duration = 0;
    ControlMode mode = ControlMode::Hierarchical;
    std::uint64_t seed = 0;
    double initial_state_scale = 0.0;  ///< random initial state magnitude, drawn from `seed`
    std::optional<Vector> r_d;          ///< initial central reference; zero when absent
    std::vector<DisturbanceChannel> disturbances;
    std::vector<ScenarioEvent> events;

    /// Checks event times, pulse parameters and the handover sequence.
    void validate() const {
        if (duration < 0) fail(ErrorCode::InvalidConfig, "/duration: must be non-negative");
        if (!(initial_state_scale >= 0.0)) fail(ErrorCode::InvalidConfig, "/initial_state_scale: must be non-negative");
        for (std::size_t i = 0; i < disturbances.size(); ++i)
            disturbances[i].pulse.validate("/disturbances/" + std::to_string(i));
        std::set<std::pair<int, Index>> taken;
        for (std::size_t i : ordered_events()) {
            const auto& e = events[i];
            const std::string at = "/events/" + std::to_string(i);
            if (e.time < 0 || e.time >= std::max<long>(duration, 1))
                fail(ErrorCode::InvalidConfig, at + ": event time " + std::to_string(e.time) + " outside the run");
            if (e.kind == ScenarioEvent::Kind::TakeActuator) {
                if (e.values.empty()) fail(ErrorCode::InvalidConfig, at + ": operator stream is empty");
                if (!taken.insert({e.subsystem, e.actuator}).second)
                    fail(ErrorCode::InvalidConfig, at + ": actuator already handed over");
            } else if (e.releases_actuator()) {
                if (!taken.erase({e.subsystem, e.actuator}))
                    fail(ErrorCode::InvalidConfig, at + ": release of an actuator that is not handed over");
            }
        }
    }

    /// Event indices sorted by time, stable for equal times.
    [[nodiscard]] std::vector<std::size_t> ordered_events() const {
        std::vector<std::size_t> idx(events.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return events[a].time < events[b].time; });
        return idx;
    }
};

// --- JSON -------------------------------------------------------------------

namespace detail {

inline int subsystem_index(const std::string& s, const std::string& at) {
    if (s == "s1") return 0;
    if (s == "s2") return 1;
    fail(ErrorCode::InvalidConfig, at + ": expected s1 or s2");
}

inline const char* subsystem_name(int s) { return s == 0 ? "s1" : "s2"; }

inline std::array<Matrix, 2> matrix_pair_from_json(FieldReader r) {
    std::array<Matrix, 2> out{FieldReader::as_matrix(r.required("s1"), r.path("s1")),
                              FieldReader::as_matrix(r.required("s2"), r.path("s2"))};
    r.finish();
    return out;
}

inline json matrix_pair_to_json(const std::array<Matrix, 2>& m) {
    return {{"s1", codec::matrix_to_json(m[0])}, {"s2", codec::matrix_to_json(m[1])}};
}

}  // namespace detail

inline json to_json(const HeatPulse& p) {
    json j{{"amplitude", p.amplitude}, {"period", p.period}, {"duty", p.duty}, {"start", p.start}};
    if (p.stop >= 0) j["stop"] = p.stop;
    return j;
}

inline json to_json(const ScenarioEvent& e) {
    json j{{"time", e.time}};
    switch (e.kind) {
        case ScenarioEvent::Kind::SetReference:
            j["type"] = "set_reference";
            j["r_d"] = codec::vector_to_json(e.r_d);
            break;
        case ScenarioEvent::Kind::SetWeights:
            j["type"] = "set_weights";
            if (!e.weights_mode.empty()) j["mode"] = e.weights_mode;
            if (e.Qc) j["Qc"] = detail::matrix_pair_to_json(*e.Qc);
            if (e.Rc) j["Rc"] = detail::matrix_pair_to_json(*e.Rc);
            break;
        case ScenarioEvent::Kind::FixSetpoint:
            j["type"] = "fix_setpoint";
            j["index"] = e.index;
            j["value"] = e.value;
            break;
        case ScenarioEvent::Kind::TakeActuator:
            j["type"] = "take_actuator";
            j["subsystem"] = detail::subsystem_name(e.subsystem);
            j["actuator"] = e.actuator;
            if (e.output) j["output"] = *e.output;
            j["values"] = e.values;
            break;
        case ScenarioEvent::Kind::Release:
            j["type"] = "release";
            if (e.releases_actuator()) {
                j["subsystem"] = detail::subsystem_name(e.subsystem);
                j["actuator"] = e.actuator;
            } else {
                j["setpoint"] = e.index;
            }
            break;
    }
    return j;
}

inline ScenarioEvent scenario_event_from_json(FieldReader r) {
    ScenarioEvent e;
    e.time = r.integer("time");
    const std::string type = r.string("type");
    if (type == "set_reference") {
        e.kind = ScenarioEvent::Kind::SetReference;
        e.r_d = r.vector("r_d");
    } else if (type == "set_weights") {
        e.kind = ScenarioEvent::Kind::SetWeights;
        e.weights_mode = r.string("mode", "");
        if (r.has("Qc")) e.Qc = detail::matrix_pair_from_json(r.object("Qc"));
        if (r.has("Rc")) e.Rc = detail::matrix_pair_from_json(r.object("Rc"));
        if (e.weights_mode.empty() && !e.Qc && !e.Rc)
            fail(ErrorCode::InvalidConfig, r.where() + ": set_weights needs a mode, Qc or Rc");
    } else if (type == "fix_setpoint") {
        e.kind = ScenarioEvent::Kind::FixSetpoint;
        e.index = r.integer("index");
        e.value = r.number("value");
    } else if (type == "take_actuator") {
        e.kind = ScenarioEvent::Kind::TakeActuator;
        e.subsystem = detail::subsystem_index(r.string("subsystem"), r.path("subsystem"));
        e.actuator = r.integer("actuator");
        if (r.has("output")) e.output = r.integer("output");
        const Vector v = r.vector("values");
        e.values.assign(v.data(), v.data() + v.size());
    } else if (type == "release") {
        e.kind = ScenarioEvent::Kind::Release;
        if (r.has("setpoint")) {
            e.index = r.integer("setpoint");
        } else {
            e.subsystem = detail::subsystem_index(r.string("subsystem"), r.path("subsystem"));
            e.actuator = r.integer("actuator");
        }
    } else {
        fail(ErrorCode::InvalidConfig, r.path("type") + ": unknown event type '" + type + "'");
    }
    r.finish();
    return e;
}

inline json to_json(const ScenarioScript& s) {
    json j{{"duration", s.duration}, {"mode", to_string(s.mode)}, {"seed", s.seed}};
    if (s.initial_state_scale > 0.0) j["initial_state_scale"] = s.initial_state_scale;
    if (s.r_d) j["r_d"] = codec::vector_to_json(*s.r_d);
    j["disturbances"] = json::array();
    for (const auto& d : s.disturbances) {
        json dj = to_json(d.pulse);
        dj["subsystem"] = detail::subsystem_name(d.subsystem);
        dj["channel"] = d.channel;
        j["disturbances"].push_back(dj);
    }
    j["events"] = json::array();
    for (const auto& e : s.events) j["events"].push_back(to_json(e));
    return j;
}

[[nodiscard]] inline ScenarioScript scenario_from_json(const json& j, const std::string& root = "") {
    FieldReader r(j, root);
    ScenarioScript s;
    s.duration = r.integer("duration");
    s.mode = parse_control_mode(r.string("mode", "hierarchical"), r.path("mode"));
    const long seed = r.integer("seed", 0);
    if (seed < 0) fail(ErrorCode::InvalidConfig, r.path("seed") + ": must be non-negative");
    s.seed = static_cast<std::uint64_t>(seed);
    s.initial_state_scale = r.number("initial_state_scale", 0.0);
    if (r.has("r_d")) s.r_d = r.vector("r_d");
    if (const json* d = r.optional("disturbances")) {
        if (!d->is_array()) fail(ErrorCode::InvalidConfig, r.path("disturbances") + ": expected an array");
        for (std::size_t i = 0; i < d->size(); ++i) {
            const std::string at = r.path("disturbances") + "/" + std::to_string(i);
            FieldReader dr((*d)[i], at);
            DisturbanceChannel c;
            c.subsystem = detail::subsystem_index(dr.string("subsystem"), dr.path("subsystem"));
            c.channel = dr.integer("channel", 0);
            c.pulse.amplitude = dr.number("amplitude");
            c.pulse.period = dr.integer("period");
            c.pulse.duty = dr.number("duty");
            c.pulse.start = dr.integer("start", 0);
            c.pulse.stop = dr.integer("stop", -1);
            c.pulse.validate(at);
            dr.finish();
            s.disturbances.push_back(c);
        }
    }
    if (const json* ev = r.optional("events")) {
        if (!ev->is_array()) fail(ErrorCode::InvalidConfig, r.path("events") + ": expected an array");
        for (std::size_t i = 0; i < ev->size(); ++i)
            s.events.push_back(scenario_event_from_json(FieldReader((*ev)[i], r.path("events") + "/" + std::to_string(i))));
    }
    r.finish();
    s.validate();
    return s;
}

}  // namespace hmpc
