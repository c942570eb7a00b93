#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hmpc/coordinator.hpp"
#include "hmpc/handover.hpp"
#include "hmpc/scenario.hpp"

namespace hmpc {

/// Plant states beyond this max-norm end the run as diverged.
inline constexpr double kOverflowSentinel = 1e9;

/// Output weights of the named central-cost modes (two outputs in s1, one in s2).
[[nodiscard]] inline std::array<Matrix, 2> weight_preset(const std::string& name, Index ny1, Index ny2) {
    if (ny1 != 2 || ny2 != 1)
        fail(ErrorCode::InvalidConfig, "weight preset '" + name + "' needs two outputs in s1 and one in s2");
    Vector d1(2);
    if (name == "disturbance_rejection") {
        d1 << 1e2, 1e6;
    } else if (name == "level_steering") {
        d1 << 1e6, 1.0;
    } else if (name == "temperature_steering") {
        d1 << 1.0, 1e6;
    } else {
        fail(ErrorCode::InvalidConfig, "unknown weight preset '" + name + "'");
    }
    return {Matrix(d1.asDiagonal()), Matrix::Identity(1, 1)};
}

struct ControllerSetup {
    std::array<LocalMpcConfig, 2> local;
    std::array<CentralCostConfig, 2> central;  ///< sized for the original plant
    CoordinatorConfig coordinator;
    /// Replace beta by the certified recommendation at start-up and after every handover.
    bool auto_beta = false;
    std::vector<double> certification_grid = beta_grid(0.0, 1.0, 0.05);
};

struct StepRecord {
    long k = 0;
    std::array<Vector, 2> u;  ///< applied input deviations, original actuators
    std::array<Vector, 2> y;  ///< output deviations at k
    Vector r_d;               ///< central reference, all outputs
    Vector r_opt;             ///< applied auxiliary set-point; NaN on outputs not tracked
    long iterations = 0;
    double final_error = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool fallback = false;
    long failed_nodes = 0;
    double negotiation_ms = 0.0;
    double state_norm = 0.0;  ///< max-norm of x(k)
    double J = std::numeric_limits<double>::quiet_NaN();
};

enum class Verdict { Stable, Diverged, NegotiationFailure };

constexpr const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "stable";
        case Verdict::Diverged: return "diverged";
        case Verdict::NegotiationFailure: return "negotiation_failure";
    }
    return "unknown";
}

struct CertificationEvent {
    long k = 0;
    CertificationReport report;
    double beta = 0.0;  ///< filter coefficient in use after this certification
};

struct SimulationLog {
    ControlMode mode = ControlMode::Hierarchical;
    std::vector<StepRecord> records;
    Verdict verdict = Verdict::Stable;
    std::optional<long> halted_at;
    std::vector<CertificationEvent> certifications;
    std::array<Vector, 2> U0, Y0;
    std::vector<std::string> notes;
};

/**
 * Receding-horizon loop around the true plant. Subsystem agents are either built here
 * from the plant (and rebuilt on actuator handover) or supplied from outside, e.g. as
 * remote endpoints; external agents do not support actuator handover.
 */
class ClosedLoop {
public:
    ClosedLoop(CoupledPlant plant, ControllerSetup setup, ControlMode mode)
        : setup_(std::move(setup)), mode_(mode), central_(setup_.central) {
        require_valid(plant);
        if (plant.exogenous[0] != 0 || plant.exogenous[1] != 0)
            fail(ErrorCode::InvalidConfig, "the physical plant cannot declare exogenous channels");
        structure_ = restructure(plant, {});
        state_ = PlantState::zero(plant);
        beta_ = setup_.coordinator.beta;
        rebuild();
    }

    ClosedLoop(CoupledPlant plant, ControllerSetup setup, ControlMode mode, std::array<SubsystemAgent*, 2> external)
        : setup_(std::move(setup)), mode_(mode), central_(setup_.central), agents_(external) {
        require_valid(plant);
        structure_ = restructure(plant, {});
        state_ = PlantState::zero(plant);
        beta_ = setup_.coordinator.beta;
        for (int s = 0; s < 2; ++s) agents_[s]->configure(central_[s]);
        certify();
    }

    [[nodiscard]] const PlantState& state() const { return state_; }
    void set_state(PlantState st) {
        if (st.x1.size() != structure_.original.s1.nx() || st.x2.size() != structure_.original.s2.nx())
            fail(ErrorCode::DimensionMismatch, "initial state size");
        state_ = std::move(st);
    }

    [[nodiscard]] const ControlStructure& structure() const { return structure_; }
    [[nodiscard]] double beta() const { return beta_; }
    [[nodiscard]] const std::vector<CertificationEvent>& certifications() const { return certifications_; }
    [[nodiscard]] SubsystemAgent& agent(int s) { return *agents_[static_cast<std::size_t>(s)]; }
    [[nodiscard]] EndpointPair endpoints() const { return {agents_[0], agents_[1]}; }

    [[nodiscard]] Vector reference() const {
        Vector r(central_[0].r_d.size() + central_[1].r_d.size());
        r << central_[0].r_d, central_[1].r_d;
        return r;
    }

    void set_reference(const Vector& r_d) {
        const Index n1 = central_[0].r_d.size();
        if (r_d.size() != n1 + central_[1].r_d.size()) fail(ErrorCode::DimensionMismatch, "reference size");
        central_[0].r_d = r_d.head(n1);
        central_[1].r_d = r_d.tail(central_[1].r_d.size());
        push_central();
    }

    void set_weights(const std::optional<std::array<Matrix, 2>>& Qc, const std::optional<std::array<Matrix, 2>>& Rc) {
        auto next = central_;
        for (int s = 0; s < 2; ++s) {
            if (Qc) next[s].Qc = (*Qc)[s];
            if (Rc) next[s].Rc = (*Rc)[s];
            next[s].validate(structure_.original.sub(s).ny(), structure_.original.sub(s).nu());
        }
        central_ = next;
        push_central();
    }

    /// Level-1 handover: the operator imposes set-point component `index` (all outputs numbering).
    void fix_setpoint(Index index, double value) {
        if (index < 0 || index >= reference().size()) fail(ErrorCode::InvalidHandover, "set-point index out of range");
        fixed_[index] = value;
    }
    void release_setpoint(Index index) {
        if (!fixed_.erase(index)) fail(ErrorCode::InvalidHandover, "set-point component is not operator fixed");
    }

    /// Level-2 handover: actuator goes to the operator stream, controllers are rebuilt and re-certified.
    void take_actuator(const ActuatorHandover& h, std::vector<double> values) {
        if (external()) fail(ErrorCode::InvalidConfig, "actuator handover needs in-process subsystems");
        if (values.empty()) fail(ErrorCode::InvalidHandover, "operator stream is empty");
        structure_ = apply_handover(structure_, h);
        streams_[{h.subsystem, h.actuator}] = {state_.k, std::move(values)};
        rebuild();
    }

    void release_actuator(int subsystem, Index actuator) {
        if (external()) fail(ErrorCode::InvalidConfig, "actuator handover needs in-process subsystems");
        structure_ = release_handover(structure_, subsystem, actuator);
        streams_.erase({subsystem, actuator});
        rebuild();
    }

    [[nodiscard]] Vector operator_values(int s, long k) const {
        const auto& idx = structure_.operator_inputs[static_cast<std::size_t>(s)];
        Vector v(static_cast<Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const auto& st = streams_.at({s, idx[a]});
            const auto i = static_cast<std::size_t>(std::clamp<long>(k - st.start, 0, static_cast<long>(st.values.size()) - 1));
            v(static_cast<Index>(a)) = st.values[i];
        }
        return v;
    }

    /// One sampling period: coordinate (or solve locally), apply the first moves, advance the plant.
    StepRecord step(const std::array<Vector, 2>& w) {
        const long k = state_.k;
        StepRecord rec;
        rec.k = k;
        rec.state_norm = std::max(max_abs(state_.x1), max_abs(state_.x2));
        rec.r_d = reference();
        for (int s = 0; s < 2; ++s) agents_[s]->observe(state_.x(s), k);

        std::array<Vector, 2> opv;
        ExogenousProfiles exo;
        for (int s = 0; s < 2; ++s) {
            opv[s] = operator_values(s, k);
            if (opv[s].size() > 0) {
                Profile p(agents_[s]->info().horizon, opv[s].size());
                for (Index i = 0; i < p.horizon(); ++i) p.at(i) = opv[s];
                exo.profiles[s] = std::move(p);
            }
        }
        const std::array<CentralCostConfig, 2> cc{reduce_central(central_[0], structure_, 0), reduce_central(central_[1], structure_, 1)};
        Vector r_d(cc[0].r_d.size() + cc[1].r_d.size());
        r_d << cc[0].r_d, cc[1].r_d;

        std::array<Vector, 2> moves;
        Vector r_applied = r_d;
        if (mode_ == ControlMode::Hierarchical) {
            std::vector<FixedComponent> fixed;
            for (const auto& [g, value] : fixed_)
                if (const Index i = structure_.reduced_setpoint_index(g); i >= 0) fixed.push_back({i, value});
            CoordinatorConfig cfg = setup_.coordinator;
            cfg.beta = beta_;
            std::optional<ProfilePair> v0;
            if (cfg.warm_start && warm_) v0 = shift_profiles(*warm_);
            const CoordinationResult res = coordinate_step(endpoints(), cfg, r_d, fixed, v0, exo, k);
            warm_ = res.outcome.v_inf;
            r_applied = res.r_opt;
            rec.iterations = res.outcome.iterations;
            rec.final_error = res.outcome.error_trace.empty() ? 0.0 : res.outcome.error_trace.back();
            rec.converged = res.outcome.converged();
            rec.fallback = res.fallback;
            rec.failed_nodes = std::count_if(res.nodes.begin(), res.nodes.end(),
                                             [](const NodeResult& n) { return n.status != NegotiationStatus::Converged; });
            rec.negotiation_ms = res.elapsed_ms;
            rec.J = res.outcome.J();
            for (int s = 0; s < 2; ++s) {
                const auto m = agents_[s]->committed_move();
                if (!m) fail(ErrorCode::ProtocolError, "subsystem " + std::to_string(s + 1) + " has no committed move");
                moves[s] = *m;
            }
        } else {
            for (int s = 0; s < 2; ++s) {
                const Profile e = exo.profiles[s] ? *exo.profiles[s] : Profile(agents_[s]->info().horizon, 0);
                moves[s] = agents_[s]->decentralized_move(s == 0 ? r_d.head(cc[0].r_d.size()) : r_d.tail(cc[1].r_d.size()), e);
            }
        }
        rec.r_opt = expand_setpoint(r_applied);

        const Vector u1 = expand_inputs(structure_, 0, moves[0], opv[0]);
        const Vector u2 = expand_inputs(structure_, 1, moves[1], opv[1]);
        const PlantStep ps = step_plant(structure_.original, state_, u1, u2, w[0], w[1]);
        rec.u = {u1, u2};
        rec.y = {ps.y1, ps.y2};
        state_ = ps.next;
        return rec;
    }

private:
    struct Stream {
        long start = 0;
        std::vector<double> values;
    };

    [[nodiscard]] bool external() const { return owned_[0] == nullptr; }

    void rebuild() {
        for (int s = 0; s < 2; ++s) {
            owned_[s] = std::make_unique<SubsystemHandler>(
                structure_.control.sub(s), reduce_local(setup_.local[s], structure_, s),
                reduce_central(central_[s], structure_, s), structure_.control.exogenous[static_cast<std::size_t>(s)]);
            agents_[s] = owned_[s].get();
        }
        certify();
    }

    void certify() {
        if (mode_ != ControlMode::Hierarchical) return;
        CertificationEvent ev;
        ev.k = state_.k;
        ev.report = certify_convergence(endpoints(), setup_.certification_grid);
        if (setup_.auto_beta && ev.report.certified()) beta_ = *ev.report.recommended_beta;
        ev.beta = beta_;
        certifications_.push_back(std::move(ev));
    }

    void push_central() {
        for (int s = 0; s < 2; ++s) agents_[s]->configure(reduce_central(central_[s], structure_, s));
    }

    [[nodiscard]] Vector expand_setpoint(const Vector& reduced) const {
        Vector full = Vector::Constant(reference().size(), std::numeric_limits<double>::quiet_NaN());
        for (Index g = 0; g < full.size(); ++g)
            if (const Index i = structure_.reduced_setpoint_index(g); i >= 0) full(g) = reduced(i);
        return full;
    }

    ControllerSetup setup_;
    ControlMode mode_;
    std::array<CentralCostConfig, 2> central_;
    ControlStructure structure_;
    std::array<std::unique_ptr<SubsystemHandler>, 2> owned_;
    std::array<SubsystemAgent*, 2> agents_{nullptr, nullptr};
    PlantState state_;
    double beta_ = 0.5;
    std::map<Index, double> fixed_;
    std::map<std::pair<int, Index>, Stream> streams_;
    std::optional<ProfilePair> warm_;
    std::vector<CertificationEvent> certifications_;
};

namespace detail {

inline void apply_event(ClosedLoop& loop, const ScenarioEvent& e) {
    const auto& p = loop.structure().original;
    switch (e.kind) {
        case ScenarioEvent::Kind::SetReference: loop.set_reference(e.r_d); break;
        case ScenarioEvent::Kind::SetWeights: {
            std::optional<std::array<Matrix, 2>> Qc = e.Qc;
            if (!e.weights_mode.empty()) Qc = weight_preset(e.weights_mode, p.s1.ny(), p.s2.ny());
            loop.set_weights(Qc, e.Rc);
            break;
        }
        case ScenarioEvent::Kind::FixSetpoint: loop.fix_setpoint(e.index, e.value); break;
        case ScenarioEvent::Kind::TakeActuator:
            loop.take_actuator({e.subsystem, e.actuator, e.output.value_or(e.actuator)}, e.values);
            break;
        case ScenarioEvent::Kind::Release:
            if (e.releases_actuator()) {
                loop.release_actuator(e.subsystem, e.actuator);
            } else {
                loop.release_setpoint(e.index);
            }
            break;
    }
}

inline PlantState random_state(const CoupledPlant& p, std::uint64_t seed, double scale) {
    PlantState st = PlantState::zero(p);
    if (scale <= 0.0) return st;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int s = 0; s < 2; ++s)
        for (Index i = 0; i < st.x(s).size(); ++i) st.x(s)(i) = dist(rng);
    return st;
}

}  // namespace detail

/// Runs the scenario on an already assembled loop, which must sit at its initial state.
inline SimulationLog run_scenario(const ScenarioScript& sc, ClosedLoop& loop) {
    sc.validate();
    SimulationLog log;
    log.mode = sc.mode;
    const auto& plant = loop.structure().original;
    log.U0 = {plant.s1.U0, plant.s2.U0};
    log.Y0 = {plant.s1.Y0, plant.s2.Y0};
    loop.set_state(detail::random_state(plant, sc.seed, sc.initial_state_scale));
    if (sc.r_d) loop.set_reference(*sc.r_d);

    const auto order = sc.ordered_events();
    std::size_t next = 0;
    bool negotiation_trouble = false;
    for (long k = 0; k < sc.duration; ++k) {
        try {
            while (next < order.size() && sc.events[order[next]].time == k) detail::apply_event(loop, sc.events[order[next++]]);
            const auto w = disturbance_at(k, sc.disturbances, {plant.s1.nw(), plant.s2.nw()});
            StepRecord rec = loop.step(w);
            if (sc.mode == ControlMode::Hierarchical && (!rec.converged || rec.failed_nodes > 0)) negotiation_trouble = true;
            log.records.push_back(std::move(rec));
        } catch (const Error& e) {
            log.notes.push_back("step " + std::to_string(k) + ": " + e.what());
            log.verdict = Verdict::NegotiationFailure;
            log.halted_at = k;
            break;
        }
        const auto& st = loop.state();
        const double norm = std::max(max_abs(st.x1), max_abs(st.x2));
        if (!std::isfinite(norm) || norm > kOverflowSentinel) {
            log.verdict = Verdict::Diverged;
            log.halted_at = k;
            log.notes.push_back("state max-norm exceeded the overflow sentinel after step " + std::to_string(k));
            break;
        }
    }
    if (log.verdict == Verdict::Stable && negotiation_trouble) log.verdict = Verdict::NegotiationFailure;
    log.certifications = loop.certifications();
    return log;
}

inline SimulationLog run_scenario(const ScenarioScript& sc, const CoupledPlant& plant, const ControllerSetup& setup) {
    ClosedLoop loop(plant, setup, sc.mode);
    return run_scenario(sc, loop);
}

// --- reporting ----------------------------------------------------------------

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace detail

/// CSV column order: k, u*, U*, y*, Y*, rd_*, ropt_*, iterations, final_error, converged,
/// fallback, failed_nodes, negotiation_ms, state_norm, J.
inline void write_log_csv(const SimulationLog& log, std::ostream& out) {
    const std::array<Index, 2> nu{log.U0[0].size(), log.U0[1].size()}, ny{log.Y0[0].size(), log.Y0[1].size()};
    const auto cols = [&](const char* stem, const std::array<Index, 2>& n) {
        std::string h;
        for (int s = 0; s < 2; ++s)
            for (Index i = 0; i < n[static_cast<std::size_t>(s)]; ++i) h += std::string(",") + stem + std::to_string(s + 1) + "_" + std::to_string(i + 1);
        return h;
    };
    out << "k" << cols("u", nu) << cols("U", nu) << cols("y", ny) << cols("Y", ny);
    for (Index j = 0; j < ny[0] + ny[1]; ++j) out << ",rd_" << j + 1;
    for (Index j = 0; j < ny[0] + ny[1]; ++j) out << ",ropt_" << j + 1;
    out << ",iterations,final_error,converged,fallback,failed_nodes,negotiation_ms,state_norm,J\n";
    for (const auto& r : log.records) {
        out << r.k;
        for (int s = 0; s < 2; ++s)
            for (Index i = 0; i < r.u[s].size(); ++i) out << ',' << detail::num(r.u[s](i));
        for (int s = 0; s < 2; ++s)
            for (Index i = 0; i < r.u[s].size(); ++i) out << ',' << detail::num(r.u[s](i) + log.U0[s](i));
        for (int s = 0; s < 2; ++s)
            for (Index i = 0; i < r.y[s].size(); ++i) out << ',' << detail::num(r.y[s](i));
        for (int s = 0; s < 2; ++s)
            for (Index i = 0; i < r.y[s].size(); ++i) out << ',' << detail::num(r.y[s](i) + log.Y0[s](i));
        for (Index j = 0; j < r.r_d.size(); ++j) out << ',' << detail::num(r.r_d(j));
        for (Index j = 0; j < r.r_opt.size(); ++j) out << ',' << detail::num(r.r_opt(j));
        out << ',' << r.iterations << ',' << detail::num(r.final_error) << ',' << (r.converged ? 1 : 0) << ','
            << (r.fallback ? 1 : 0) << ',' << r.failed_nodes << ',' << detail::num(r.negotiation_ms) << ','
            << detail::num(r.state_norm) << ',' << detail::num(r.J) << '\n';
    }
}

/// Peak |y| per output over records [from, to).
[[nodiscard]] inline Vector peak_outputs(const SimulationLog& log, std::size_t from, std::size_t to) {
    const Index n = log.Y0[0].size() + log.Y0[1].size();
    Vector peak = Vector::Zero(n);
    for (std::size_t i = from; i < std::min(to, log.records.size()); ++i) {
        const auto& r = log.records[i];
        Vector y(n);
        y << r.y[0], r.y[1];
        peak = peak.cwiseMax(y.cwiseAbs());
    }
    return peak;
}

/// Largest |r_opt - r_d| per output over the tracked steps.
[[nodiscard]] inline Vector max_setpoint_gap(const SimulationLog& log) {
    const Index n = log.Y0[0].size() + log.Y0[1].size();
    Vector gap = Vector::Zero(n);
    for (const auto& r : log.records)
        for (Index j = 0; j < n; ++j)
            if (std::isfinite(r.r_opt(j))) gap(j) = std::max(gap(j), std::abs(r.r_opt(j) - r.r_d(j)));
    return gap;
}

[[nodiscard]] inline json summary_json(const SimulationLog& log) {
    json j;
    j["verdict"] = to_string(log.verdict);
    j["mode"] = to_string(log.mode);
    j["steps"] = log.records.size();
    j["halted_at"] = log.halted_at ? json(*log.halted_at) : json(nullptr);
    const std::size_t n = log.records.size(), q = n / 4;
    j["max_abs_y"] = codec::vector_to_json(peak_outputs(log, 0, n));
    j["max_abs_y_first_quarter"] = codec::vector_to_json(peak_outputs(log, 0, q));
    j["max_abs_y_last_quarter"] = codec::vector_to_json(peak_outputs(log, n - q, n));
    j["max_setpoint_gap"] = codec::vector_to_json(max_setpoint_gap(log));

    std::vector<double> times, errors;
    long converged = 0, fallbacks = 0, max_iter = 0;
    double iter_sum = 0.0;
    for (const auto& r : log.records) {
        times.push_back(r.negotiation_ms);
        if (std::isfinite(r.final_error)) errors.push_back(r.final_error);
        converged += r.converged ? 1 : 0;
        fallbacks += r.fallback ? 1 : 0;
        max_iter = std::max(max_iter, r.iterations);
        iter_sum += static_cast<double>(r.iterations);
    }
    j["negotiation"] = {{"converged_steps", converged},
                        {"fallback_steps", fallbacks},
                        {"max_final_error", errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end())},
                        {"mean_iterations", n > 0 ? iter_sum / static_cast<double>(n) : 0.0},
                        {"max_iterations", max_iter}};
    j["timing_ms"] = {{"p50", detail::percentile(times, 50)},
                      {"p90", detail::percentile(times, 90)},
                      {"p99", detail::percentile(times, 99)},
                      {"max", times.empty() ? 0.0 : *std::max_element(times.begin(), times.end())}};
    j["certifications"] = json::array();
    for (const auto& c : log.certifications) {
        json cj{{"k", c.k}, {"beta", c.beta}, {"certified", c.report.certified()}};
        if (c.report.certified()) {
            cj["recommended_beta"] = *c.report.recommended_beta;
            cj["recommended_rho"] = c.report.recommended_rho;
        }
        j["certifications"].push_back(cj);
    }
    j["notes"] = log.notes;
    return j;
}

}  // namespace hmpc
