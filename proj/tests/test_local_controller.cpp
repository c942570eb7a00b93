#include <gtest/gtest.h>

#include "hmpc/local_controller.hpp"
#include "support.hpp"

using namespace hmpc;
using namespace hmpc::testing;

namespace {

Profile scalar_profile(std::initializer_list<double> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v(i++) = x;
    return Profile::from_stacked(v, 1);
}

/// Minimiser of the local cost from a weighted least-squares problem built by simulation.
Vector direct_qp(const SubsystemModel& m, const LocalMpcConfig& cfg, const Vector& x0, const Vector& r, const Vector& V) {
    const Index N = cfg.N, nx = m.nx(), nu = m.nu(), nv = m.nv_in();
    const SteadyPair sp = steady_pair(m, r);
    const auto simulate = [&](const Vector& U, const Vector& x, const Vector& v) {
        Vector X(N * nx);
        Vector s = x;
        for (Index i = 0; i < N; ++i) {
            s = m.A * s + m.B * U.segment(i * nu, nu) + m.G * v.segment(i * nv, nv);
            X.segment(i * nx, nx) = s;
        }
        return X;
    };
    const Vector free = simulate(Vector::Zero(N * nu), x0, V);
    Matrix Phi(N * nx, N * nu);
    for (Index j = 0; j < N * nu; ++j) Phi.col(j) = simulate(Vector::Unit(N * nu, j), Vector::Zero(nx), Vector::Zero(N * nv));
    const Matrix Lq = Eigen::SelfAdjointEigenSolver<Matrix>(cfg.Q).operatorSqrt();
    const Matrix Lr = Eigen::SelfAdjointEigenSolver<Matrix>(cfg.R).operatorSqrt();
    Matrix A = Matrix::Zero(N * (nx + nu), N * nu);
    Vector b = Vector::Zero(N * (nx + nu));
    for (Index i = 0; i < N; ++i) {
        A.middleRows(i * nx, nx) = Lq * Phi.middleRows(i * nx, nx);
        b.segment(i * nx, nx) = Lq * (sp.x_d - free.segment(i * nx, nx));
        A.block(N * nx + i * nu, i * nu, nu, nu) = Lr;
        b.segment(N * nx + i * nu, nu) = Lr * sp.u_d;
    }
    return A.colPivHouseholderQr().solve(b);
}

struct Case {
    SubsystemModel m;
    LocalMpcConfig cfg;
    LiftedMaps L;
    GainSet g;
};

Case random_case(std::mt19937_64& rng, int trial) {
    const RandomShape s{2 + trial % 3, 1 + trial % 2, 1 + trial % 2, 2};
    Case c;
    c.m = random_model(rng, s, 1.0);
    const Index N = 2 + trial % 7;
    const Matrix Qh = Matrix::Random(s.nx, s.nx);
    const Matrix Rh = Matrix::Random(s.nu, s.nu);
    c.cfg = {Qh * Qh.transpose(), Rh * Rh.transpose() + 0.5 * Matrix::Identity(s.nu, s.nu), N};
    c.L = lift_subsystem(c.m, N);
    c.g = compute_mpc_gains(c.m, c.L, c.cfg);
    return c;
}

}  // namespace

TEST(SteadyPair, ScalarExample) {
    const auto sp = steady_pair(scalar_model(0.5, 1.0, 0.0), Vector::Constant(1, 2.0));
    EXPECT_NEAR(sp.x_d(0), 2.0, 1e-14);
    EXPECT_NEAR(sp.u_d(0), 1.0, 1e-14);
}

TEST(SteadyPair, ZeroReference) {
    const auto sp = steady_pair(scalar_model(0.5, 1.0, 0.0), Vector::Zero(1));
    EXPECT_EQ(sp.x_d(0), 0.0);
    EXPECT_EQ(sp.u_d(0), 0.0);
}

TEST(SteadyPair, SingularMap) {
    try {
        (void)steady_pair(scalar_model(1.0, 0.0, 0.0), Vector::Ones(1));
        FAIL() << "expected SingularSteadyMap";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularSteadyMap);
    }
}

TEST(SteadyPair, NonSquareIsRejected) {
    auto m = scalar_model(0.5, 1.0, 0.0);
    m.B = Matrix::Ones(1, 2);
    m.D = Matrix::Zero(1, 2);
    m.Dv = Matrix::Zero(1, 2);
    EXPECT_THROW((void)steady_map(m), Error);
}

TEST(SteadyPair, SolvesTheSteadyEquations) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_model(rng, {4, 2, 1, 1}, 1.0);
        const Vector r = random_vector(rng, 2);
        const auto sp = steady_pair(m, r);
        EXPECT_LE(max_abs(m.A * sp.x_d + m.B * sp.u_d - sp.x_d), 1e-10);
        EXPECT_LE(max_abs(m.C * sp.x_d + m.D * sp.u_d - r), 1e-10);
    }
}

TEST(Gains, OneStepCalculusOracle) {
    const auto m = scalar_model(0.5, 1.0, 1.0);
    const LocalMpcConfig cfg{scalar(1.0), scalar(1.0), 1};
    const auto L = lift_subsystem(m, 1);
    const auto g = compute_mpc_gains(m, L, cfg);
    const Vector r = Vector::Ones(1);
    EXPECT_NEAR(solve_local_mpc(g, Vector::Zero(1), r, scalar_profile({0})).at(0)(0), 0.75, 1e-14);
    EXPECT_NEAR(solve_local_mpc(g, Vector::Zero(1), r, scalar_profile({1})).at(0)(0), 0.25, 1e-14);
}

TEST(Gains, NoStateWeightGivesSteadyInput) {
    const auto m = scalar_model(0.5, 1.0, 1.0);
    const LocalMpcConfig cfg{scalar(0.0), scalar(1.0), 3};
    const auto L = lift_subsystem(m, 3);
    const auto g = compute_mpc_gains(m, L, cfg);
    const auto u = solve_local_mpc(g, Vector::Constant(1, 4.0), Vector::Ones(1), scalar_profile({2, -1, 3}));
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(u.at(i)(0), 0.5, 1e-14);
}

TEST(Gains, IllConditionedHessian) {
    // Two actuators acting identically on the state.
    auto m = scalar_model(0.5, 1.0, 1.0);
    m.A = 0.5 * Matrix::Identity(2, 2);
    m.B = Matrix::Ones(2, 2);
    m.G = Matrix::Ones(2, 1);
    m.F = Matrix::Ones(2, 1);
    m.C = Matrix::Identity(2, 2);
    m.D = Matrix::Zero(2, 2);
    m.D(1, 1) = 1.0;
    m.E = Matrix::Zero(2, 1);
    m.Cv = Matrix::Zero(1, 2);
    m.Dv = Matrix::Zero(1, 2);
    m.U0 = m.Y0 = Vector::Zero(2);
    const LocalMpcConfig cfg{1e14 * Matrix::Identity(2, 2), 1e-3 * Matrix::Identity(2, 2), 1};
    try {
        (void)compute_mpc_gains(m, lift_subsystem(m, 1), cfg);
        FAIL() << "expected IllConditionedHessian";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IllConditionedHessian);
    }
}

TEST(Gains, InvalidWeightsRejected) {
    const auto m = scalar_model(0.5, 1.0, 1.0);
    EXPECT_THROW((void)compute_mpc_gains(m, lift_subsystem(m, 1), {scalar(1.0), scalar(0.0), 1}), Error);
    EXPECT_THROW((void)compute_mpc_gains(m, lift_subsystem(m, 1), {scalar(-1.0), scalar(1.0), 1}), Error);
}

TEST(Gains, MatchDirectQpSolve) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const Case c = random_case(rng, trial);
        const Vector x = random_vector(rng, c.m.nx());
        const Vector r = random_vector(rng, c.m.ny());
        const Vector V = random_vector(rng, c.cfg.N * c.m.nv_in());
        const Vector u = c.g.control(x, r, V);
        const Vector ref = direct_qp(c.m, c.cfg, x, r, V);
        ASSERT_LE(max_abs(u - ref), 1e-9 * (1.0 + max_abs(ref))) << "trial " << trial;
    }
}

TEST(Gains, CompositeMapsMatchCouplingMap) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const Case c = random_case(rng, trial);
        const Vector x = random_vector(rng, c.m.nx());
        const Vector r = random_vector(rng, c.m.ny());
        const Profile v = Profile::from_stacked(random_vector(rng, c.cfg.N * c.m.nv_in()), c.m.nv_in());
        const Profile u = solve_local_mpc(c.g, x, r, v);
        const Vector direct = coupling_profile_map(c.L, x, u, v).stacked();
        const Vector composed = c.g.Mx_bar * x + c.g.Mr_bar * r + c.g.Mv_bar * v.stacked();
        ASSERT_LE(max_abs(direct - composed), 1e-10 * (1.0 + max_abs(direct)));
        const Vector y = predict_profiles(c.L, x, u, v).outputs.stacked();
        ASSERT_LE(max_abs(y - (c.g.Ox_bar * x + c.g.Or_bar * r + c.g.Ov_bar * v.stacked())), 1e-10 * (1.0 + max_abs(y)));
    }
}

TEST(SolveLocalMpc, StationaryAtSteadyPair) {
    std::mt19937_64 rng(24);
    const auto m = random_model(rng, {3, 1, 1, 1}, 0.0);
    const LocalMpcConfig cfg = identity_local(m, 6);
    const auto L = lift_subsystem(m, 6);
    const auto g = compute_mpc_gains(m, L, cfg);
    const Vector r = Vector::Constant(1, 0.7);
    const auto sp = steady_pair(m, r);
    const auto u = solve_local_mpc(g, sp.x_d, r, Profile(6, 1));
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(u.at(i)(0), sp.u_d(0), 1e-10);
}

TEST(SolveLocalMpc, Homogeneous) {
    std::mt19937_64 rng(25);
    const Case c = random_case(rng, 3);
    const Vector x = random_vector(rng, c.m.nx()), r = random_vector(rng, c.m.ny());
    const Profile v = Profile::from_stacked(random_vector(rng, c.cfg.N * c.m.nv_in()), c.m.nv_in());
    const Profile v2 = Profile::from_stacked(2.0 * v.stacked(), c.m.nv_in());
    const Vector a = solve_local_mpc(c.g, x, r, v).stacked();
    const Vector b = solve_local_mpc(c.g, 2.0 * x, 2.0 * r, v2).stacked();
    EXPECT_LE(max_abs(b - 2.0 * a), 1e-12 * (1.0 + max_abs(a)));
}

TEST(SolveLocalMpc, ArgumentSizes) {
    std::mt19937_64 rng(26);
    const Case c = random_case(rng, 1);
    EXPECT_THROW((void)solve_local_mpc(c.g, Vector::Zero(c.m.nx() + 1), Vector::Zero(c.m.ny()), Profile(c.cfg.N, c.m.nv_in())), Error);
}

TEST(SolveLocalMpc, PerturbationsNeverDecreaseCost) {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 200; ++trial) {
        const Case c = random_case(rng, trial);
        const Vector x = random_vector(rng, c.m.nx()), r = random_vector(rng, c.m.ny());
        const Profile v = Profile::from_stacked(random_vector(rng, c.cfg.N * c.m.nv_in()), c.m.nv_in());
        const Profile u = solve_local_mpc(c.g, x, r, v);
        const double J0 = local_mpc_cost(c.m, c.L, c.cfg, x, r, u, v);
        for (int d = 0; d < 20; ++d) {
            const Vector dir = random_vector(rng, u.stacked().size());
            const Profile up = Profile::from_stacked(u.stacked() + 1e-4 * dir, u.width());
            ASSERT_GE(local_mpc_cost(c.m, c.L, c.cfg, x, r, up, v), J0 - 1e-12 * (1.0 + J0));
        }
    }
}

TEST(CentralContribution, AllZero) {
    const auto m = scalar_model(0.5, 1.0, 1.0);
    const auto L = lift_subsystem(m, 3);
    const CentralCostConfig cc{scalar(1.0), scalar(1.0), 2, Vector::Zero(1)};
    EXPECT_EQ(evaluate_central_contribution(m, L, cc, Profile(3, 1), Vector::Zero(1), Profile(3, 1)), 0.0);
}

TEST(CentralContribution, HandSums) {
    // A = 0, B = 1: the output profile equals the move profile.
    auto m = scalar_model(0.0, 1.0, 0.0);
    const auto L = lift_subsystem(m, 2);
    CentralCostConfig cc{scalar(1.0), scalar(0.0), 0, Vector::Zero(1)};
    const Profile u = scalar_profile({1, 3});
    EXPECT_DOUBLE_EQ(evaluate_central_contribution(m, L, cc, u, Vector::Zero(1), Profile(2, 1)), 10.0);
    cc.q = 1;
    EXPECT_DOUBLE_EQ(evaluate_central_contribution(m, L, cc, u, Vector::Zero(1), Profile(2, 1)), 9.5);
}

TEST(CentralContribution, InputTermUsesOperatingPoint) {
    auto m = scalar_model(0.0, 1.0, 0.0);
    m.U0 = Vector::Constant(1, 2.0);
    const auto L = lift_subsystem(m, 2);
    const CentralCostConfig cc{scalar(0.0), scalar(1.0), 0, Vector::Zero(1)};
    EXPECT_DOUBLE_EQ(evaluate_central_contribution(m, L, cc, scalar_profile({1, -2}), Vector::Zero(1), Profile(2, 1)), 9.0);
}

TEST(Handler, DecoupledRepliesIgnoreCoupling) {
    const auto m = scalar_model(0.5, 1.0, 0.0, 1.0, 0.0);
    SubsystemHandler h(m, {scalar(1.0), scalar(1.0), 4}, {scalar(1.0), scalar(0.0), 0, Vector::Zero(1)});
    h.observe(Vector::Constant(1, 0.3), 0);
    NegotiationRequest req;
    req.r = Vector::Constant(1, 0.2);
    req.r_d = Vector::Zero(1);
    req.v = scalar_profile({1, 2, 3, 4});
    const auto a = h.serve(req);
    req.v = scalar_profile({-5, 0, 9, 1});
    const auto b = h.serve(req);
    ASSERT_FALSE(a.is_error());
    EXPECT_TRUE(a.v_hat.stacked() == b.v_hat.stacked());
    EXPECT_EQ(a.J, b.J);
}

TEST(Handler, SteadyPairReplyCarriesOnlyInputTerm) {
    const auto m = scalar_model(0.5, 1.0, 0.0);
    auto mm = m;
    mm.U0 = Vector::Constant(1, 1.5);
    const Index N = 4;
    const int q = 2;
    SubsystemHandler h(mm, {scalar(1.0), scalar(1.0), N}, {scalar(3.0), scalar(2.0), q, Vector::Zero(1)});
    const Vector r = Vector::Constant(1, 0.8);
    const auto sp = steady_pair(mm, r);
    h.observe(sp.x_d, 0);
    NegotiationRequest req;
    req.r = r;
    req.r_d = r;
    req.v = Profile(N, 1);
    const auto resp = h.serve(req);
    double expected = 0.0;
    for (int i = 1; i <= N; ++i) expected += std::pow(static_cast<double>(i) / N, q) * 2.0 * std::pow(1.5 + sp.u_d(0), 2);
    EXPECT_NEAR(resp.J, expected, 1e-12 * expected);
}

TEST(Handler, CommitReleasesFirstMove) {
    std::mt19937_64 rng(28);
    const auto m = random_model(rng, {3, 2, 2, 1}, 1.0);
    SubsystemHandler h(m, identity_local(m, 5), identity_central(m));
    EXPECT_FALSE(h.committed_move().has_value());
    NegotiationRequest commit;
    commit.kind = NegotiationRequest::Kind::Commit;
    EXPECT_TRUE(h.serve(commit).is_error());

    const Vector x = random_vector(rng, 3);
    h.observe(x, 7);
    NegotiationRequest req;
    req.r = random_vector(rng, 2);
    req.r_d = Vector::Zero(2);
    req.v = Profile::from_stacked(random_vector(rng, 10), 2);
    (void)h.serve(req);
    const auto done = h.serve(commit);
    EXPECT_EQ(done.kind, NegotiationResponse::Kind::Committed);
    const Vector u = h.gains().control(x, req.r, req.v.stacked());
    ASSERT_TRUE(h.committed_move().has_value());
    EXPECT_TRUE(*h.committed_move() == u.head(2));
}

TEST(Handler, ProtocolViolationsAreErrorReplies) {
    const auto m = scalar_model(0.5, 1.0, 1.0);
    SubsystemHandler h(m, {scalar(1.0), scalar(1.0), 3}, {scalar(1.0), scalar(0.0), 0, Vector::Zero(1)});
    NegotiationRequest req;
    req.r = Vector::Zero(2);
    req.r_d = Vector::Zero(1);
    req.v = Profile(3, 1);
    EXPECT_TRUE(h.serve(req).is_error());
    req.r = Vector::Zero(1);
    req.v = Profile(2, 1);
    EXPECT_TRUE(h.serve(req).is_error());
}

TEST(Handler, DecentralizedMoveUsesZeroCoupling) {
    std::mt19937_64 rng(29);
    const auto m = random_model(rng, {3, 1, 2, 1}, 1.0);
    SubsystemHandler h(m, identity_local(m, 5), identity_central(m));
    const Vector x = random_vector(rng, 3);
    h.observe(x, 0);
    const Vector r = random_vector(rng, 1);
    const Vector u = h.decentralized_move(r, Profile(5, 0));
    EXPECT_TRUE(u == h.gains().control(x, r, Vector::Zero(10)).head(1));
    EXPECT_TRUE(*h.committed_move() == u);
}

TEST(Privacy, ResponseSchemaHasNoStateOrModelFields) {
    NegotiationResponse r;
    r.v_hat = Profile(2, 1);
    r.J = 1.0;
    const json j = to_json(r);
    for (const auto& [key, value] : j.items()) {
        EXPECT_TRUE(key == "type" || key == "step" || key == "sigma" || key == "v_hat" || key == "J") << key;
    }
    const json e = to_json(NegotiationResponse::error("bad"));
    for (const auto& [key, value] : e.items()) EXPECT_TRUE(key == "type" || key == "step" || key == "sigma" || key == "message") << key;
}

TEST(Protocol, RoundTripIsBitExact) {
    std::mt19937_64 rng(30);
    NegotiationRequest req;
    req.step = 4;
    req.sigma = 9;
    req.r = random_vector(rng, 3);
    req.r_d = random_vector(rng, 3);
    req.v = Profile::from_stacked(random_vector(rng, 12), 3);
    const auto back = request_from_json(json::parse(to_json(req).dump()));
    EXPECT_TRUE(back.r == req.r);
    EXPECT_TRUE(back.v.stacked() == req.v.stacked());
    EXPECT_EQ(back.v.width(), 3);
    EXPECT_EQ(back.sigma, 9);

    NegotiationResponse resp;
    resp.v_hat = Profile::from_stacked(random_vector(rng, 8), 2);
    resp.J = 0.1 + 0.2;
    const auto rb = response_from_json(json::parse(to_json(resp).dump()), 2);
    EXPECT_TRUE(rb.v_hat.stacked() == resp.v_hat.stacked());
    EXPECT_EQ(rb.J, resp.J);
}

TEST(Protocol, MalformedMessagesThrow) {
    EXPECT_THROW((void)request_from_json(json{{"type", "bogus"}}), Error);
    EXPECT_THROW((void)request_from_json(json{{"type", "negotiate"}, {"r", {1.0}}}), Error);
}
