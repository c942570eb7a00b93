#pragma once

#include <array>
#include <sstream>
#include <string>
#include <vector>

#include "hmpc/error.hpp"
#include "hmpc/linalg.hpp"

namespace hmpc {

/// Loop matrices with a condition number above this are rejected as singular.
inline constexpr double kLoopConditionLimit = 1e12;

/**
 * Linear deviation model of one subsystem.
 *
 *   x+ = A x + B u + G v + F w
 *   y  = C x + D u + E v
 *   e  = Cv x + Dv u + Ev v
 *
 * `v` is the coupling vector this subsystem receives, `e` the coupling vector it
 * emits towards the other subsystem. U0 and Y0 are the operating point and never
 * enter the dynamics.
 */
struct SubsystemModel {
    std::string name;
    Matrix A, B, G, F;
    Matrix C, D, E;
    Matrix Cv, Dv, Ev;
    Vector U0, Y0;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;

    [[nodiscard]] Index nx() const { return A.rows(); }
    [[nodiscard]] Index nu() const { return B.cols(); }
    [[nodiscard]] Index ny() const { return C.rows(); }
    [[nodiscard]] Index nv_in() const { return G.cols(); }
    [[nodiscard]] Index nv_out() const { return Cv.rows(); }
    [[nodiscard]] Index nw() const { return F.cols(); }

    /// Human-readable dimension and finiteness issues, each naming the offending matrix.
    [[nodiscard]] std::vector<std::string> check(const std::string& prefix) const {
        std::vector<std::string> issues;
        const auto expect = [&](const Matrix& m, const char* id, Index rows, Index cols) {
            if (m.rows() != rows || m.cols() != cols) {
                std::ostringstream os;
                os << "dimension mismatch: " << prefix << "." << id << " is " << m.rows() << "x" << m.cols()
                   << ", expected " << rows << "x" << cols;
                issues.push_back(os.str());
            } else if (!all_finite(m)) {
                issues.push_back("non-finite entries in " + prefix + "." + id);
            }
        };
        const Index n = A.rows();
        expect(A, "A", n, n);
        expect(B, "B", n, B.cols());
        expect(G, "G", n, G.cols());
        expect(F, "F", n, F.cols());
        expect(C, "C", C.rows(), n);
        expect(D, "D", C.rows(), nu());
        expect(E, "E", C.rows(), nv_in());
        expect(Cv, "Cv", Cv.rows(), n);
        expect(Dv, "Dv", Cv.rows(), nu());
        expect(Ev, "Ev", Cv.rows(), nv_in());
        if (U0.size() != nu()) issues.push_back("dimension mismatch: " + prefix + ".U0 length differs from input count");
        if (Y0.size() != ny()) issues.push_back("dimension mismatch: " + prefix + ".Y0 length differs from output count");
        if (!U0.allFinite() || !Y0.allFinite()) issues.push_back("non-finite operating point in " + prefix);
        if (nu() != ny()) {
            std::ostringstream os;
            os << "non-square steady-state map in " << prefix << ": " << nu() << " inputs vs " << ny() << " outputs";
            issues.push_back(os.str());
        }
        if (!input_labels.empty() && static_cast<Index>(input_labels.size()) != nu())
            issues.push_back("dimension mismatch: " + prefix + ".input_labels");
        if (!output_labels.empty() && static_cast<Index>(output_labels.size()) != ny())
            issues.push_back("dimension mismatch: " + prefix + ".output_labels");
        return issues;
    }
};

/**
 * Two subsystems wired back to back: the coupling received by one is emitted by the
 * other. `exogenous[s]` extra channels may be appended to the coupling vector received
 * by subsystem s; they are driven from outside (operator actuator streams) instead of
 * by the other subsystem.
 */
struct CoupledPlant {
    SubsystemModel s1, s2;
    std::array<Index, 2> exogenous{0, 0};

    [[nodiscard]] const SubsystemModel& sub(int s) const { return s == 0 ? s1 : s2; }
    [[nodiscard]] SubsystemModel& sub(int s) { return s == 0 ? s1 : s2; }
};

struct PlantState {
    Vector x1, x2;
    long k = 0;

    [[nodiscard]] const Vector& x(int s) const { return s == 0 ? x1 : x2; }
    [[nodiscard]] Vector& x(int s) { return s == 0 ? x1 : x2; }

    static PlantState zero(const CoupledPlant& p) { return {Vector::Zero(p.s1.nx()), Vector::Zero(p.s2.nx()), 0}; }
};

namespace detail {

/// Incoming coupling columns of `Ev` that are driven by the other subsystem.
inline Matrix coupled_part(const SubsystemModel& m, Index exo) { return m.Ev.leftCols(m.nv_in() - exo); }
inline Matrix exogenous_part(const SubsystemModel& m, Index exo) { return m.Ev.rightCols(exo); }

}  // namespace detail

/// I - Ev(S2)·Ev(S1) restricted to the channels that close the algebraic loop.
[[nodiscard]] inline Matrix loop_matrix(const CoupledPlant& p) {
    const Matrix P = detail::coupled_part(p.s2, p.exogenous[1]);
    const Matrix R = detail::coupled_part(p.s1, p.exogenous[0]);
    return Matrix::Identity(P.rows(), P.rows()) - P * R;
}

struct ValidationReport {
    std::vector<std::string> issues;
    double loop_condition = 1.0;
    std::array<double, 2> open_loop_spectral_radius{0.0, 0.0};

    [[nodiscard]] bool ok() const { return issues.empty(); }
};

[[nodiscard]] inline ValidationReport validate_model(const CoupledPlant& p) {
    ValidationReport rep;
    const std::array<std::string, 2> names{"s1", "s2"};
    for (int s = 0; s < 2; ++s) {
        auto sub = p.sub(s).check(names[s]);
        rep.issues.insert(rep.issues.end(), sub.begin(), sub.end());
    }
    for (int s = 0; s < 2; ++s) {
        const auto& recv = p.sub(s);
        const auto& emit = p.sub(1 - s);
        if (p.exogenous[s] < 0 || p.exogenous[s] > recv.nv_in()) {
            rep.issues.push_back("invalid exogenous channel count for " + names[s]);
            continue;
        }
        if (recv.nv_in() - p.exogenous[s] != emit.nv_out()) {
            std::ostringstream os;
            os << "dimension mismatch: coupling into " << names[s] << " has " << recv.nv_in() - p.exogenous[s]
               << " channels but " << names[1 - s] << " emits " << emit.nv_out();
            rep.issues.push_back(os.str());
        }
    }
    if (!rep.issues.empty()) return rep;

    rep.loop_condition = condition_number(loop_matrix(p));
    if (!(rep.loop_condition <= kLoopConditionLimit)) {
        std::ostringstream os;
        os << "loop conditioning: I - Ev1*Ev2 has condition number " << rep.loop_condition;
        rep.issues.push_back(os.str());
    }
    for (int s = 0; s < 2; ++s) rep.open_loop_spectral_radius[s] = spectral_radius(p.sub(s).A);
    return rep;
}

inline void require_valid(const CoupledPlant& p) {
    const auto rep = validate_model(p);
    if (rep.ok()) return;
    const bool loop = rep.issues.front().rfind("loop conditioning", 0) == 0;
    std::string msg;
    for (const auto& i : rep.issues) msg += i + "; ";
    fail(loop ? ErrorCode::SingularLoop : ErrorCode::DimensionMismatch, msg);
}

struct CouplingSignals {
    Vector v1, v2;  ///< full incoming coupling vectors, exogenous channels included
};

/**
 * Solves both coupling equations at once by eliminating v2:
 * (I - P R) v1 = a1 + P a2, with P, R the loop parts of Ev(S2), Ev(S1).
 */
[[nodiscard]] inline CouplingSignals resolve_coupling(const CoupledPlant& p, const PlantState& st, const Vector& u1,
                                                      const Vector& u2, const Vector& e1 = {}, const Vector& e2 = {}) {
    const Index x1 = p.exogenous[0], x2 = p.exogenous[1];
    if (st.x1.size() != p.s1.nx() || st.x2.size() != p.s2.nx() || u1.size() != p.s1.nu() || u2.size() != p.s2.nu() ||
        e1.size() != x1 || e2.size() != x2)
        fail(ErrorCode::DimensionMismatch, "resolve_coupling argument sizes");

    const Matrix M = loop_matrix(p);
    const double cond = condition_number(M);
    if (!(cond <= kLoopConditionLimit)) fail(ErrorCode::SingularLoop, "loop matrix condition number " + std::to_string(cond));

    const Matrix P = detail::coupled_part(p.s2, x2);
    const Matrix R = detail::coupled_part(p.s1, x1);
    Vector a1 = p.s2.Cv * st.x2 + p.s2.Dv * u2;
    Vector a2 = p.s1.Cv * st.x1 + p.s1.Dv * u1;
    if (x2 > 0) a1 += detail::exogenous_part(p.s2, x2) * e2;
    if (x1 > 0) a2 += detail::exogenous_part(p.s1, x1) * e1;

    CouplingSignals out;
    const Vector v1 = M.size() == 0 ? Vector(0) : Vector(M.fullPivLu().solve(a1 + P * a2));
    const Vector v2 = a2 + R * v1;
    out.v1.resize(v1.size() + x1);
    out.v1 << v1, e1;
    out.v2.resize(v2.size() + x2);
    out.v2 << v2, e2;
    return out;
}

struct PlantStep {
    PlantState next;
    Vector y1, y2;
    CouplingSignals v;
};

/// Advances the plant one sample. Outputs are the disturbance-free output equations at time k.
[[nodiscard]] inline PlantStep step_plant(const CoupledPlant& p, const PlantState& st, const Vector& u1, const Vector& u2,
                                          const Vector& w1, const Vector& w2, const Vector& e1 = {},
                                          const Vector& e2 = {}) {
    if (w1.size() != p.s1.nw() || w2.size() != p.s2.nw()) fail(ErrorCode::DimensionMismatch, "step_plant disturbance sizes");
    PlantStep out;
    out.v = resolve_coupling(p, st, u1, u2, e1, e2);
    out.next.x1 = p.s1.A * st.x1 + p.s1.B * u1 + p.s1.G * out.v.v1 + p.s1.F * w1;
    out.next.x2 = p.s2.A * st.x2 + p.s2.B * u2 + p.s2.G * out.v.v2 + p.s2.F * w2;
    out.next.k = st.k + 1;
    out.y1 = p.s1.C * st.x1 + p.s1.D * u1 + p.s1.E * out.v.v1;
    out.y2 = p.s2.C * st.x2 + p.s2.D * u2 + p.s2.E * out.v.v2;
    return out;
}

}  // namespace hmpc
