#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "hmpc/local_controller.hpp"

namespace hmpc {

/// Operator takes actuator `actuator` of `subsystem`; tracking of `output` is dropped.
struct ActuatorHandover {
    int subsystem = 0;
    Index actuator = 0;
    Index output = 0;
};

/**
 * Control-side view of a plant with some actuators under operator control. Each taken
 * actuator becomes an extra incoming channel of its subsystem, appended in the order
 * of the handovers; indices below refer to the original plant.
 */
struct ControlStructure {
    CoupledPlant original;
    std::vector<ActuatorHandover> active;
    CoupledPlant control;
    std::array<std::vector<Index>, 2> inputs;           ///< original index of each remaining input
    std::array<std::vector<Index>, 2> outputs;          ///< original index of each remaining output
    std::array<std::vector<Index>, 2> operator_inputs;  ///< original index of each operator channel

    /// Global set-point index in the control structure of an original global index, or -1 if dropped.
    [[nodiscard]] Index reduced_setpoint_index(Index global) const {
        const Index ny1 = original.s1.ny();
        const int s = global < ny1 ? 0 : 1;
        const Index local = s == 0 ? global : global - ny1;
        const auto& o = outputs[static_cast<std::size_t>(s)];
        const auto it = std::find(o.begin(), o.end(), local);
        if (it == o.end()) return -1;
        const Index pos = static_cast<Index>(it - o.begin());
        return s == 0 ? pos : static_cast<Index>(outputs[0].size()) + pos;
    }
};

namespace detail {

inline std::vector<std::string> drop_label(std::vector<std::string> labels, Index i) {
    if (!labels.empty()) labels.erase(labels.begin() + i);
    return labels;
}

/// Moves input column j into a new trailing coupling channel and drops output row o.
inline SubsystemModel hand_over_input(const SubsystemModel& m, Index j, Index o) {
    SubsystemModel r = m;
    r.B = drop_col(m.B, j);
    r.G = append_col(m.G, m.B.col(j));
    r.C = drop_row(m.C, o);
    const Matrix D_rows = drop_row(m.D, o);
    r.D = drop_col(D_rows, j);
    r.E = append_col(drop_row(m.E, o), D_rows.col(j));
    r.Dv = drop_col(m.Dv, j);
    r.Ev = append_col(m.Ev, m.Dv.col(j));
    r.U0 = drop_entry(m.U0, j);
    r.Y0 = drop_entry(m.Y0, o);
    r.input_labels = drop_label(m.input_labels, j);
    r.output_labels = drop_label(m.output_labels, o);
    return r;
}

inline Matrix select(const Matrix& m, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b) out(static_cast<Index>(a), static_cast<Index>(b)) = m(idx[a], idx[b]);
    return out;
}

inline Vector select(const Vector& v, const std::vector<Index>& idx) {
    Vector out(static_cast<Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) out(static_cast<Index>(a)) = v(idx[a]);
    return out;
}

}  // namespace detail

/// Applies the handovers in order. Throws InvalidHandover or SteadyMapBroken.
[[nodiscard]] inline ControlStructure restructure(const CoupledPlant& original, const std::vector<ActuatorHandover>& active) {
    ControlStructure cs;
    cs.original = original;
    cs.active = active;
    cs.control = original;
    for (int s = 0; s < 2; ++s) {
        cs.inputs[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(original.sub(s).nu()));
        std::iota(cs.inputs[static_cast<std::size_t>(s)].begin(), cs.inputs[static_cast<std::size_t>(s)].end(), Index{0});
        cs.outputs[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(original.sub(s).ny()));
        std::iota(cs.outputs[static_cast<std::size_t>(s)].begin(), cs.outputs[static_cast<std::size_t>(s)].end(), Index{0});
    }
    for (const auto& h : active) {
        if (h.subsystem < 0 || h.subsystem > 1) fail(ErrorCode::InvalidHandover, "handover subsystem must be s1 or s2");
        const auto s = static_cast<std::size_t>(h.subsystem);
        const std::string who = "s" + std::to_string(h.subsystem + 1);
        auto& in = cs.inputs[s];
        auto& out = cs.outputs[s];
        const auto ji = std::find(in.begin(), in.end(), h.actuator);
        if (h.actuator < 0 || h.actuator >= original.sub(h.subsystem).nu())
            fail(ErrorCode::InvalidHandover, who + " has no actuator " + std::to_string(h.actuator));
        if (ji == in.end()) fail(ErrorCode::InvalidHandover, who + " actuator " + std::to_string(h.actuator) + " is already handed over");
        const auto oi = std::find(out.begin(), out.end(), h.output);
        if (oi == out.end()) fail(ErrorCode::SteadyMapBroken, who + " output " + std::to_string(h.output) + " is not tracked any more");
        if (in.size() == 1) fail(ErrorCode::SteadyMapBroken, who + " would lose its last actuator");

        const auto j = static_cast<Index>(ji - in.begin());
        const auto o = static_cast<Index>(oi - out.begin());
        cs.control.sub(h.subsystem) = detail::hand_over_input(cs.control.sub(h.subsystem), j, o);
        cs.control.exogenous[s] += 1;
        in.erase(ji);
        out.erase(oi);
        cs.operator_inputs[s].push_back(h.actuator);
        try {
            (void)steady_map(cs.control.sub(h.subsystem));
        } catch (const Error& e) {
            fail(ErrorCode::SteadyMapBroken, who + " after handover: " + e.message());
        }
    }
    require_valid(cs.control);
    return cs;
}

[[nodiscard]] inline ControlStructure apply_handover(const ControlStructure& cs, const ActuatorHandover& h) {
    auto active = cs.active;
    active.push_back(h);
    return restructure(cs.original, active);
}

[[nodiscard]] inline ControlStructure release_handover(const ControlStructure& cs, int subsystem, Index actuator) {
    auto active = cs.active;
    const auto it = std::find_if(active.begin(), active.end(),
                                 [&](const ActuatorHandover& h) { return h.subsystem == subsystem && h.actuator == actuator; });
    if (it == active.end()) fail(ErrorCode::InvalidHandover, "actuator is not under operator control");
    active.erase(it);
    return restructure(cs.original, active);
}

/// Central weights and reference restricted to the remaining inputs and outputs.
[[nodiscard]] inline CentralCostConfig reduce_central(const CentralCostConfig& cc, const ControlStructure& cs, int s) {
    CentralCostConfig out = cc;
    out.Qc = detail::select(cc.Qc, cs.outputs[static_cast<std::size_t>(s)]);
    if (cc.Rc.size() > 0) out.Rc = detail::select(cc.Rc, cs.inputs[static_cast<std::size_t>(s)]);
    out.r_d = detail::select(cc.r_d, cs.outputs[static_cast<std::size_t>(s)]);
    return out;
}

[[nodiscard]] inline LocalMpcConfig reduce_local(const LocalMpcConfig& cfg, const ControlStructure& cs, int s) {
    LocalMpcConfig out = cfg;
    out.R = detail::select(cfg.R, cs.inputs[static_cast<std::size_t>(s)]);
    return out;
}

/// Reassembles a full actuator vector from controller moves and operator values.
[[nodiscard]] inline Vector expand_inputs(const ControlStructure& cs, int s, const Vector& controller, const Vector& operator_values) {
    const auto k = static_cast<std::size_t>(s);
    Vector u = Vector::Zero(cs.original.sub(s).nu());
    if (controller.size() != static_cast<Index>(cs.inputs[k].size()) ||
        operator_values.size() != static_cast<Index>(cs.operator_inputs[k].size()))
        fail(ErrorCode::DimensionMismatch, "expand_inputs sizes");
    for (std::size_t a = 0; a < cs.inputs[k].size(); ++a) u(cs.inputs[k][a]) = controller(static_cast<Index>(a));
    for (std::size_t a = 0; a < cs.operator_inputs[k].size(); ++a) u(cs.operator_inputs[k][a]) = operator_values(static_cast<Index>(a));
    return u;
}

}  // namespace hmpc
