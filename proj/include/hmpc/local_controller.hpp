#pragma once

#include <cmath>
#include <mutex>
#include <optional>
#include <string>

#include "hmpc/prediction.hpp"
#include "hmpc/protocol.hpp"

namespace hmpc {

/// Condensed Hessians with a condition number above this are rejected.
inline constexpr double kHessianConditionLimit = 1e12;
inline constexpr double kSteadyConditionLimit = 1e12;

struct LocalMpcConfig {
    Matrix Q;  ///< state weight, symmetric PSD
    Matrix R;  ///< input weight, symmetric PD
    Index N = 1;

    void validate(Index nx, Index nu) const {
        if (N < 1) fail(ErrorCode::InvalidConfig, "local horizon must be at least 1");
        if (Q.rows() != nx || Q.cols() != nx || R.rows() != nu || R.cols() != nu)
            fail(ErrorCode::DimensionMismatch, "local MPC weights do not match the model");
        if (!is_symmetric(Q) || !is_symmetric(R)) fail(ErrorCode::InvalidConfig, "local MPC weights must be symmetric");
        if (min_symmetric_eigenvalue(Q) < -1e-12 * std::max(1.0, max_abs(Q)))
            fail(ErrorCode::InvalidConfig, "local state weight Q must be positive semidefinite");
        if (!(min_symmetric_eigenvalue(R) > 0.0)) fail(ErrorCode::InvalidConfig, "local input weight R must be positive definite");
    }
};

/// One subsystem's share of the central cost.
struct CentralCostConfig {
    Matrix Qc;   ///< output weight (ny x ny, PSD)
    Matrix Rc;   ///< total-input weight (nu x nu, PSD)
    int q = 0;   ///< tail-weight exponent
    Vector r_d;  ///< desired output deviation

    void validate(Index ny, Index nu) const {
        if (Qc.rows() != ny || Qc.cols() != ny || Rc.rows() != nu || Rc.cols() != nu || r_d.size() != ny)
            fail(ErrorCode::DimensionMismatch, "central cost weights do not match the model");
        if (q < 0) fail(ErrorCode::InvalidConfig, "tail exponent q must be non-negative");
        for (const Matrix* m : {&Qc, &Rc}) {
            if (!is_symmetric(*m)) fail(ErrorCode::InvalidConfig, "central weights must be symmetric");
            if (min_symmetric_eigenvalue(*m) < -1e-12 * std::max(1.0, max_abs(*m)))
                fail(ErrorCode::InvalidConfig, "central weights must be positive semidefinite");
        }
    }
};

struct SteadyPair {
    Vector x_d, u_d;
};

/// Linear maps r -> x_d and r -> u_d of the steady pair (zero coupling deviation).
struct SteadyMap {
    Matrix to_state;  ///< nx x ny
    Matrix to_input;  ///< nu x ny
};

[[nodiscard]] inline SteadyMap steady_map(const SubsystemModel& m) {
    const Index nx = m.nx(), nu = m.nu(), ny = m.ny();
    if (nu != ny) fail(ErrorCode::SingularSteadyMap, "steady pair needs as many inputs as outputs");
    Matrix block(nx + ny, nx + nu);
    block << Matrix::Identity(nx, nx) - m.A, -m.B, m.C, m.D;
    const double cond = condition_number(block);
    if (!(cond <= kSteadyConditionLimit))
        fail(ErrorCode::SingularSteadyMap, "steady-state block matrix has condition number " + std::to_string(cond));
    Matrix rhs = Matrix::Zero(nx + ny, ny);
    rhs.bottomRows(ny).setIdentity();
    const Matrix sol = block.fullPivLu().solve(rhs);
    return {sol.topRows(nx), sol.bottomRows(nu)};
}

[[nodiscard]] inline SteadyPair steady_pair(const SubsystemModel& m, const Vector& r) {
    if (r.size() != m.ny()) fail(ErrorCode::DimensionMismatch, "set-point size differs from the output count");
    const SteadyMap sm = steady_map(m);
    return {sm.to_state * r, sm.to_input * r};
}

/**
 * Closed-form unconstrained MPC law u_opt = Kx x + Kr r + Kv v, and the composed maps
 * of the emitted coupling (Mx_bar, Mr_bar, Mv_bar) and of the predicted outputs.
 */
struct GainSet {
    Matrix Kx, Kr, Kv;
    Matrix Mx_bar, Mr_bar, Mv_bar;
    Matrix Ox_bar, Or_bar, Ov_bar;
    double hessian_condition = 1.0;

    [[nodiscard]] Vector control(const Vector& x, const Vector& r, const Vector& V) const {
        Vector u = Kx * x + Kr * r;
        if (Kv.cols() > 0) u.noalias() += Kv * V;
        return u;
    }
};

[[nodiscard]] inline GainSet compute_mpc_gains(const SubsystemModel& m, const LiftedMaps& L, const LocalMpcConfig& cfg) {
    cfg.validate(m.nx(), m.nu());
    if (cfg.N != L.N) fail(ErrorCode::DimensionMismatch, "local MPC horizon differs from the lifted horizon");
    const Index N = L.N, nu = L.nu;
    const SteadyMap sm = steady_map(m);

    const Matrix& Su = L.state.u;
    const Matrix W = detail::blockdiag_times(cfg.Q, Su, N);  // Qbar * Su
    Matrix H = Su.transpose() * W;
    detail::add_blockdiag(H, cfg.R, N);
    H = 0.5 * (H + H.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(H.rows() - 1);
    GainSet g;
    g.hessian_condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (!(g.hessian_condition <= kHessianConditionLimit))
        fail(ErrorCode::IllConditionedHessian, "condensed Hessian condition number " + std::to_string(g.hessian_condition));

    const Eigen::LLT<Matrix> llt(H);
    const Matrix Wt = W.transpose();
    g.Kx = -llt.solve(Wt * L.state.x);
    g.Kv = L.nv_in > 0 ? Matrix(-llt.solve(Wt * L.state.v)) : Matrix(N * nu, 0);
    g.Kr = llt.solve(Wt * repeat_rows(sm.to_state, N) + repeat_rows(cfg.R * sm.to_input, N));

    g.Mx_bar = L.coupling.x + L.coupling.u * g.Kx;
    g.Mr_bar = L.coupling.u * g.Kr;
    g.Mv_bar = L.coupling.v + L.coupling.u * g.Kv;
    g.Ox_bar = L.output.x + L.output.u * g.Kx;
    g.Or_bar = L.output.u * g.Kr;
    g.Ov_bar = L.output.v + L.output.u * g.Kv;
    return g;
}

[[nodiscard]] inline Profile solve_local_mpc(const GainSet& g, const Vector& x, const Vector& r, const Profile& v) {
    if (x.size() != g.Kx.cols() || r.size() != g.Kr.cols() || v.stacked().size() != g.Kv.cols())
        fail(ErrorCode::DimensionMismatch, "solve_local_mpc argument sizes");
    const Index nu = v.horizon() > 0 ? g.Kx.rows() / v.horizon() : 0;
    return Profile::from_stacked(g.control(x, r, v.stacked()), nu);
}

/// Local tracking cost sum_i |x(k+i) - x_d|_Q^2 + |u_i - u_d|_R^2.
[[nodiscard]] inline double local_mpc_cost(const SubsystemModel& m, const LiftedMaps& L, const LocalMpcConfig& cfg,
                                           const Vector& x, const Vector& r, const Profile& u, const Profile& v) {
    const SteadyPair sp = steady_pair(m, r);
    const Prediction pr = predict_profiles(L, x, u, v);
    double J = 0.0;
    for (Index i = 0; i < L.N; ++i) {
        const Vector dx = pr.states.at(i) - sp.x_d;
        const Vector du = u.at(i) - sp.u_d;
        J += dx.dot(cfg.Q * dx) + du.dot(cfg.R * du);
    }
    return J;
}

namespace detail {

inline double tail_weight(Index i, Index N, int q) {
    return std::pow(static_cast<double>(i) / static_cast<double>(N), q);
}

/// Central contribution from already-predicted outputs and the move profile.
inline double central_cost_from_outputs(const SubsystemModel& m, const CentralCostConfig& cc, const Vector& Y,
                                        const Vector& U, Index N) {
    const Index ny = m.ny(), nu = m.nu();
    const bool input_term = cc.Rc.size() > 0 && max_abs(cc.Rc) > 0.0;
    double J = 0.0;
    for (Index i = 0; i < N; ++i) {
        const double w = tail_weight(i + 1, N, cc.q);
        const Vector ey = Y.segment(i * ny, ny) - cc.r_d;
        double stage = ey.dot(cc.Qc * ey);
        if (input_term) {
            const Vector ut = m.U0 + U.segment(i * nu, nu);
            stage += ut.dot(cc.Rc * ut);
        }
        J += w * stage;
    }
    return J;
}

}  // namespace detail

/// sum_{i=1..N} (i/N)^q [ |y(k+i) - r_d|_Qc^2 + |U0 + u_i|_Rc^2 ].
[[nodiscard]] inline double evaluate_central_contribution(const SubsystemModel& m, const LiftedMaps& L,
                                                          const CentralCostConfig& cc, const Profile& u,
                                                          const Vector& x, const Profile& v) {
    cc.validate(m.ny(), m.nu());
    const Prediction pr = predict_profiles(L, x, u, v);
    return detail::central_cost_from_outputs(m, cc, pr.outputs.stacked(), u.stacked(), L.N);
}

/// Condensed coupling sensitivity a subsystem shares for convergence certification.
struct SensitivityReport {
    Matrix Mv_bar;
    Index coupling_channels = 0;   ///< incoming channels driven by the other subsystem
    Index exogenous_channels = 0;  ///< incoming channels driven externally (operator)
};

/// Abstract subsystem as seen by the coordinator: in-process handler or remote client.
class SubsystemEndpoint {
public:
    virtual ~SubsystemEndpoint() = default;
    virtual NegotiationResponse serve(const NegotiationRequest& request) = 0;
    [[nodiscard]] virtual SubsystemInfo info() const = 0;
    [[nodiscard]] virtual SensitivityReport sensitivity() const = 0;
};

/**
 * Plant-facing side of a subsystem: it measures its own state, accepts central weights
 * and drives its actuators. The coordinator only ever sees the SubsystemEndpoint part.
 */
class SubsystemAgent : public SubsystemEndpoint {
public:
    virtual void observe(const Vector& x, long step) = 0;
    virtual void configure(const CentralCostConfig& cc) = 0;
    /// First move released by the last commit, or by the last decentralised solve.
    [[nodiscard]] virtual std::optional<Vector> committed_move() const = 0;
    /// Local move with r = r_d and zero presumed coupling; `exogenous` feeds operator channels.
    virtual Vector decentralized_move(const Vector& r, const Profile& exogenous) = 0;
};

/**
 * Subsystem side of the negotiation. Owns x_s(k) privately and keeps the arguments of
 * the most recent negotiate request so a commit can release the first move.
 */
class SubsystemHandler final : public SubsystemAgent {
public:
    SubsystemHandler(SubsystemModel model, LocalMpcConfig local, CentralCostConfig central, Index exogenous = 0)
        : model_(std::move(model)), local_(std::move(local)), central_(std::move(central)), exogenous_(exogenous) {
        central_.validate(model_.ny(), model_.nu());
        lifted_ = lift_subsystem(model_, local_.N);
        gains_ = compute_mpc_gains(model_, lifted_, local_);
        x_ = Vector::Zero(model_.nx());
    }

    void observe(const Vector& x, long step) override {
        if (x.size() != model_.nx()) fail(ErrorCode::DimensionMismatch, "observed state size");
        std::lock_guard lock(mutex_);
        x_ = x;
        step_ = step;
        last_.reset();
        committed_.reset();
    }

    void configure(const CentralCostConfig& cc) override {
        cc.validate(model_.ny(), model_.nu());
        std::lock_guard lock(mutex_);
        central_ = cc;
    }

    NegotiationResponse serve(const NegotiationRequest& req) override {
        if (req.kind == NegotiationRequest::Kind::Commit) return commit(req);
        const Index N = lifted_.N;
        if (req.r.size() != model_.ny() || req.r_d.size() != model_.ny())
            return NegotiationResponse::error("set-point width mismatch", req.step, req.sigma);
        if (req.v.horizon() != N || req.v.width() != model_.nv_in() || req.v.stacked().size() != N * model_.nv_in())
            return NegotiationResponse::error("coupling profile shape mismatch", req.step, req.sigma);

        Vector x;
        CentralCostConfig cc;
        {
            std::lock_guard lock(mutex_);
            x = x_;
            cc = central_;
        }
        const Vector& V = req.v.stacked();
        const Vector U = gains_.control(x, req.r, V);
        Vector Y = gains_.Ox_bar * x + gains_.Or_bar * req.r;
        if (V.size() > 0) Y.noalias() += gains_.Ov_bar * V;
        cc.r_d = req.r_d;

        NegotiationResponse resp;
        resp.kind = NegotiationResponse::Kind::Reply;
        resp.step = req.step;
        resp.sigma = req.sigma;
        resp.J = detail::central_cost_from_outputs(model_, cc, Y, U, N);
        Vector emitted = gains_.Mx_bar * x + gains_.Mr_bar * req.r;
        if (V.size() > 0) emitted.noalias() += gains_.Mv_bar * V;
        resp.v_hat = model_.nv_out() > 0 ? Profile::from_stacked(std::move(emitted), model_.nv_out()) : Profile(N, 0);

        std::lock_guard lock(mutex_);
        last_ = U;
        return resp;
    }

    Vector decentralized_move(const Vector& r, const Profile& exogenous) override {
        if (r.size() != model_.ny()) fail(ErrorCode::DimensionMismatch, "set-point width mismatch");
        const Index N = lifted_.N, nv = model_.nv_in(), e = exogenous_;
        if (e > 0 && (exogenous.horizon() != N || exogenous.width() != e))
            fail(ErrorCode::DimensionMismatch, "exogenous profile shape mismatch");
        Vector V = Vector::Zero(N * nv);
        for (Index i = 0; i < N && e > 0; ++i) V.segment(i * nv + nv - e, e) = exogenous.at(i);
        std::lock_guard lock(mutex_);
        const Vector U = gains_.control(x_, r, V);
        last_ = U;
        committed_ = U.head(model_.nu());
        return *committed_;
    }

    [[nodiscard]] SubsystemInfo info() const override {
        return {lifted_.N, model_.ny(), model_.nv_in(), model_.nv_out()};
    }

    [[nodiscard]] SensitivityReport sensitivity() const override {
        return {gains_.Mv_bar, model_.nv_in() - exogenous_, exogenous_};
    }

    [[nodiscard]] std::optional<Vector> committed_move() const override {
        std::lock_guard lock(mutex_);
        return committed_;
    }
    [[nodiscard]] std::optional<Vector> last_control_profile() const {
        std::lock_guard lock(mutex_);
        return last_;
    }

    [[nodiscard]] const SubsystemModel& model() const { return model_; }
    [[nodiscard]] const LiftedMaps& lifted() const { return lifted_; }
    [[nodiscard]] const GainSet& gains() const { return gains_; }
    [[nodiscard]] const LocalMpcConfig& local_config() const { return local_; }
    [[nodiscard]] CentralCostConfig central_config() const {
        std::lock_guard lock(mutex_);
        return central_;
    }
    [[nodiscard]] Index exogenous_channels() const { return exogenous_; }

private:
    NegotiationResponse commit(const NegotiationRequest& req) {
        std::lock_guard lock(mutex_);
        if (!last_) return NegotiationResponse::error("commit without a preceding negotiation", req.step, req.sigma);
        committed_ = last_->head(model_.nu());
        NegotiationResponse resp;
        resp.kind = NegotiationResponse::Kind::Committed;
        resp.step = req.step;
        resp.sigma = req.sigma;
        return resp;
    }

    SubsystemModel model_;
    LocalMpcConfig local_;
    CentralCostConfig central_;
    Index exogenous_ = 0;
    LiftedMaps lifted_;
    GainSet gains_;

    mutable std::mutex mutex_;
    Vector x_;
    long step_ = 0;
    std::optional<Vector> last_;
    std::optional<Vector> committed_;
};

}  // namespace hmpc
