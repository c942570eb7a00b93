#include <gtest/gtest.h>

#include "hmpc/coordinator.hpp"
#include "support.hpp"

using namespace hmpc;
using namespace hmpc::testing;

namespace {

/// Endpoint with a scripted affine reply v_hat = a v + c and a fixed cost.
class AffineEndpoint final : public SubsystemEndpoint {
public:
    AffineEndpoint(double a, double c, Index N = 1) : a_(a), c_(c), N_(N) {}

    NegotiationResponse serve(const NegotiationRequest& req) override {
        NegotiationResponse r;
        if (req.kind == NegotiationRequest::Kind::Commit) {
            r.kind = NegotiationResponse::Kind::Committed;
            return r;
        }
        r.v_hat = Profile::from_stacked((a_ * req.v.stacked()).array() + c_, 1);
        r.J = 1.0;
        return r;
    }
    [[nodiscard]] SubsystemInfo info() const override { return {N_, 1, 1, 1}; }
    [[nodiscard]] SensitivityReport sensitivity() const override { return {a_ * Matrix::Identity(N_, N_), 1, 0}; }

private:
    double a_, c_;
    Index N_;
};

Profile scalar_profile(double v) { return Profile::from_stacked(Vector::Constant(1, v), 1); }

ProfilePair pair(double a, double b) { return {scalar_profile(a), scalar_profile(b)}; }

}  // namespace

TEST(Filter, FullStepTakesTheReply) {
    const auto out = filter_update(pair(3, 4), pair(1, 2), 1.0);
    EXPECT_EQ(out[0].stacked()(0), 1.0);
    EXPECT_EQ(out[1].stacked()(0), 2.0);
}

TEST(Filter, Midpoint) {
    EXPECT_EQ(filter_update(pair(0, 0), pair(2, 2), 0.5)[0].stacked()(0), 1.0);
}

TEST(Filter, FixedPointUnchanged) {
    for (double b : {0.1, 0.5, 0.9, 1.0}) {
        const auto out = filter_update(pair(0.3, -7), pair(0.3, -7), b);
        EXPECT_EQ(out[0].stacked()(0), 0.3);
        EXPECT_EQ(out[1].stacked()(0), -7.0);
    }
}

TEST(Filter, ShapeMismatchThrows) {
    ProfilePair a = pair(0, 0);
    ProfilePair b{Profile(2, 1), Profile(1, 1)};
    EXPECT_THROW((void)filter_update(a, b, 0.5), Error);
}

TEST(FixedPoint, DecoupledGeometricTrace) {
    const CoupledPlant p = scalar_plant(0.5, 1.0, 0.0, 1.0, 0.0);
    HandlerPair h(p, 6);
    h[0].observe(Vector::Constant(1, 1.0), 0);
    h[1].observe(Vector::Constant(1, -2.0), 0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    cfg.tol = 1e-5;
    const Vector r = Vector::Zero(2);
    const ProfilePair v0 = zero_coupling(h.endpoints());
    const auto out = fixed_point_solve(h.endpoints(), r, r, v0, cfg);
    ASSERT_TRUE(out.converged());

    // The replies do not depend on v, so e_sigma = beta (1 - beta)^(sigma - 1) |v_hat - v0|.
    NegotiationRequest req;
    req.r = Vector::Zero(1);
    req.r_d = Vector::Zero(1);
    req.v = Profile(6, 1);
    const double e0 = std::max(max_abs(h[0].serve(req).v_hat.stacked()), max_abs(h[1].serve(req).v_hat.stacked()));
    for (std::size_t s = 0; s < out.error_trace.size(); ++s)
        EXPECT_NEAR(out.error_trace[s], cfg.beta * std::pow(1.0 - cfg.beta, static_cast<double>(s)) * e0, 1e-15 * e0);
    const long expected = 1 + static_cast<long>(std::ceil(std::log(cfg.tol / (cfg.beta * e0)) / std::log(1.0 - cfg.beta)));
    EXPECT_EQ(out.iterations, expected);
}

TEST(FixedPoint, StartingAtTheFixedPoint) {
    std::mt19937_64 rng(31);
    const CoupledPlant p = random_plant(rng, 0.8);
    HandlerPair h(p, 5);
    h[0].observe(random_vector(rng, p.s1.nx()), 0);
    h[1].observe(random_vector(rng, p.s2.nx()), 0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    cfg.tol = 1e-13;
    const Vector r = random_vector(rng, 2);
    ASSERT_LT(h.rho(0.5), 1.0);
    const auto first = fixed_point_solve(h.endpoints(), r, r, zero_coupling(h.endpoints()), cfg);
    ASSERT_TRUE(first.converged());
    cfg.tol = 1e-5;
    const auto again = fixed_point_solve(h.endpoints(), r, r, first.v_inf, cfg);
    EXPECT_TRUE(again.converged());
    EXPECT_EQ(again.iterations, 1);
    EXPECT_LE(again.error_trace.front(), cfg.tol);
}

TEST(FixedPoint, DestabilisingScalarPairDiverges) {
    AffineEndpoint e1(4.0, 0.1), e2(1.0, 0.2);
    const EndpointPair ep{&e1, &e2};
    EXPECT_NEAR(spectral_radius(assemble_iteration_matrix(Matrix::Constant(1, 1, 4.0), Matrix::Constant(1, 1, 1.0), 0.5)), 1.5, 1e-12);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    const auto out = fixed_point_solve(ep, Vector::Zero(2), Vector::Zero(2), pair(0.3, -0.1), cfg);
    EXPECT_EQ(out.status, NegotiationStatus::Diverged);
    EXPECT_LT(out.iterations, cfg.max_iter);
}

TEST(FixedPoint, SlowGrowthIsClassifiedAtBudgetEnd) {
    // rho = 1.0025: the sentinel is never reached within the budget.
    AffineEndpoint e1(1.01, 0.0), e2(1.0, 0.0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    const auto out = fixed_point_solve({&e1, &e2}, Vector::Zero(2), Vector::Zero(2), pair(1.0, 1.0), cfg);
    EXPECT_EQ(out.iterations, cfg.max_iter);
    EXPECT_LT(out.error_trace.back(), cfg.divergence_sentinel);
    EXPECT_EQ(out.status, NegotiationStatus::Diverged);
}

TEST(FixedPoint, SlowContractionExhaustsBudget) {
    AffineEndpoint e1(0.99, 0.0), e2(0.99, 0.0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    cfg.max_iter = 100;
    const auto out = fixed_point_solve({&e1, &e2}, Vector::Zero(2), Vector::Zero(2), pair(1.0, 1.0), cfg);
    EXPECT_EQ(out.status, NegotiationStatus::BudgetExhausted);
}

TEST(FixedPoint, ErrorRepliesRaiseProtocolError) {
    const CoupledPlant p = scalar_plant(0.5, 1.0, 1.0, 1.0, 0.0);
    HandlerPair h(p, 3);
    CoordinatorConfig cfg;
    try {
        (void)fixed_point_solve(h.endpoints(), Vector::Zero(2), Vector::Zero(2), {Profile(2, 1), Profile(2, 1)}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProtocolError);
    }
}

TEST(FixedPoint, InvalidConfigRejected) {
    AffineEndpoint e1(0.1, 0.0), e2(0.1, 0.0);
    CoordinatorConfig cfg;
    cfg.beta = 0.0;
    EXPECT_THROW((void)fixed_point_solve({&e1, &e2}, Vector::Zero(2), Vector::Zero(2), pair(0, 0), cfg), Error);
    cfg.beta = 0.5;
    cfg.tol = 0.0;
    EXPECT_THROW((void)fixed_point_solve({&e1, &e2}, Vector::Zero(2), Vector::Zero(2), pair(0, 0), cfg), Error);
}

TEST(IterationMatrix, BetaZeroIsIdentity) {
    const Matrix Z = assemble_iteration_matrix(Matrix::Random(3, 2), Matrix::Random(2, 3), 0.0);
    EXPECT_TRUE(Z == Matrix::Identity(5, 5));
}

TEST(IterationMatrix, ZeroBlocks) {
    const Matrix Z = assemble_iteration_matrix(Matrix::Zero(1, 1), Matrix::Zero(1, 1), 0.3);
    EXPECT_TRUE(Z.isApprox(0.7 * Matrix::Identity(2, 2)));
}

TEST(IterationMatrix, UnitBlocks) {
    const Matrix Z = assemble_iteration_matrix(Matrix::Ones(1, 1), Matrix::Ones(1, 1), 0.5);
    EXPECT_TRUE(Z == Matrix::Constant(2, 2, 0.5));
    EXPECT_NEAR(spectral_radius(Z), 1.0, 1e-14);
}

TEST(IterationMatrix, ShapeMismatch) {
    EXPECT_THROW((void)assemble_iteration_matrix(Matrix::Zero(2, 3), Matrix::Zero(2, 3), 0.5), Error);
}

TEST(SpectralRadius, Examples) {
    EXPECT_DOUBLE_EQ(spectral_radius(Matrix::Identity(4, 4)), 1.0);
    EXPECT_NEAR(spectral_radius(Matrix{{0.0, 2.0}, {0.5, 0.0}}), 1.0, 1e-12);
    EXPECT_NEAR(spectral_radius(Matrix{{0.0, 0.5}, {0.5, 0.0}}), 0.5, 1e-12);
    EXPECT_THROW((void)spectral_radius(Matrix::Constant(2, 2, std::numeric_limits<double>::infinity())), Error);
}

TEST(SpectralRadius, ReducedSpectrumMatchesFullMatrix) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 40; ++trial) {
        const CoupledPlant p = random_plant(rng, 0.5 + trial * 0.1);
        HandlerPair h(p, 1 + trial % 5);
        const Matrix& M1 = h[0].gains().Mv_bar;
        const Matrix& M2 = h[1].gains().Mv_bar;
        const auto mu = coupling_spectrum(M1, M2);
        for (double b : {0.1, 0.35, 0.8, 1.0}) {
            const double full = spectral_radius(assemble_iteration_matrix(M1, M2, b));
            ASSERT_NEAR(spectral_radius_from_spectrum(mu, b), full, 1e-8 * std::max(1.0, full));
        }
    }
}

TEST(Certification, BetaZeroIsExactlyOne) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const CoupledPlant p = random_plant(rng, 3.0 * trial);
        HandlerPair h(p, 4);
        const auto rep = certify_convergence(h.endpoints(), {0.0, 0.5});
        EXPECT_EQ(rep.rows.front().rho, 1.0);
    }
}

TEST(Certification, DecoupledPlantFollowsOneMinusBeta) {
    const CoupledPlant p = scalar_plant(0.5, 1.0, 0.0, 1.0, 0.0);
    HandlerPair h(p, 5);
    const auto rep = certify_convergence(h.endpoints(), beta_grid(0.0, 1.0, 0.05));
    ASSERT_EQ(rep.rows.size(), 21u);
    for (const auto& row : rep.rows) EXPECT_NEAR(row.rho, 1.0 - row.beta, 1e-12);
    ASSERT_TRUE(rep.certified());
    EXPECT_EQ(*rep.recommended_beta, 1.0);
}

TEST(Certification, NoConvergentBeta) {
    AffineEndpoint e1(4.0, 0.0), e2(1.0, 0.0);
    const auto rep = certify_convergence(EndpointPair{&e1, &e2}, beta_grid(0.0, 1.0, 0.05));
    EXPECT_FALSE(rep.certified());
}

TEST(Certification, GridValuesAreClean) {
    const auto g = beta_grid(0.0, 1.0, 0.05);
    ASSERT_EQ(g.size(), 21u);
    EXPECT_EQ(g[3], 0.15);
    EXPECT_EQ(g[20], 1.0);
}

TEST(SetpointGrid, OneDimensional) {
    const auto g = build_setpoint_grid(Vector::Zero(1), 1.0, 3);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_EQ(g[0](0), -1.0);
    EXPECT_EQ(g[1](0), 0.0);
    EXPECT_EQ(g[2](0), 1.0);
}

TEST(SetpointGrid, ThreeAxes) {
    Vector rd(3);
    rd << 1.0, -2.0, 0.5;
    const auto g = build_setpoint_grid(rd, 0.5, 3);
    ASSERT_EQ(g.size(), 27u);
    EXPECT_TRUE(g[13] == rd);
    EXPECT_EQ(g[1](2), rd(2));
    EXPECT_EQ(g[1](1), rd(1) - 0.5);
}

TEST(SetpointGrid, TooSmallOrEven) {
    try {
        (void)build_setpoint_grid(Vector::Zero(2), 1.0, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == ErrorCode::GridTooSmall || e.code() == ErrorCode::InvalidGrid);
    }
    try {
        (void)build_setpoint_grid(Vector::Zero(1), 1.0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridTooSmall);
    }
    EXPECT_THROW((void)build_setpoint_grid(Vector::Zero(3), 1.0, 4), Error);
}

TEST(QuadraticFitTest, Parabola) {
    const auto g = build_setpoint_grid(Vector::Zero(1), 1.0, 3);
    const auto fit = fit_quadratic(g, {1.0, 0.0, 1.0});
    EXPECT_NEAR(fit.Q(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(fit.f(0), 0.0, 1e-12);
    EXPECT_NEAR(fit.c, 0.0, 1e-12);
}

TEST(QuadraticFitTest, ShiftedParabola) {
    const auto g = build_setpoint_grid(Vector::Zero(1), 1.0, 3);
    const auto fit = fit_quadratic(g, {4.0, 1.0, 0.0});
    EXPECT_NEAR(fit.Q(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(fit.f(0), -2.0, 1e-12);
    EXPECT_NEAR(fit.c, 1.0, 1e-12);
}

TEST(QuadraticFitTest, TwoDimensionalCoefficients) {
    const auto g = build_setpoint_grid(Vector::Zero(2), 1.0, 3);
    std::vector<double> J;
    for (const auto& r : g) J.push_back(r(0) * r(0) + 2 * r(1) * r(1) + r(0) * r(1));
    const auto fit = fit_quadratic(g, J);
    EXPECT_TRUE(fit.Q.isApprox(Matrix{{2.0, 1.0}, {1.0, 4.0}}, 1e-12));
    EXPECT_LE(max_abs(fit.f), 1e-12);
    EXPECT_NEAR(fit.c, 0.0, 1e-12);
    EXPECT_LE(fit.residual, 1e-12);
}

TEST(QuadraticFitTest, OffCentreRandomQuadratic) {
    std::mt19937_64 rng(34);
    const Matrix H = Matrix::Random(3, 3);
    const Matrix Q = H * H.transpose() + Matrix::Identity(3, 3);
    const Vector f = random_vector(rng, 3);
    Vector rd(3);
    rd << 100.0, -40.0, 3.0;
    const auto g = build_setpoint_grid(rd, 0.25, 3);
    std::vector<double> J;
    for (const auto& r : g) J.push_back(0.5 * r.dot(Q * r) + f.dot(r) + 2.0);
    const auto fit = fit_quadratic(g, J);
    EXPECT_LE(max_abs(fit.Q - Q), 1e-6 * max_abs(Q));
    EXPECT_LE(fit.relative_residual, 1e-8);
}

TEST(QuadraticFitTest, RankDeficient) {
    std::vector<Vector> nodes(6, Vector::Zero(2));
    for (int i = 0; i < 6; ++i) nodes[i](0) = i;
    try {
        (void)fit_quadratic(nodes, std::vector<double>(6, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
    }
}

TEST(QuadraticFitTest, EvenDataGivesExactlyZeroGradient) {
    const auto g = build_setpoint_grid(Vector::Zero(3), 1.0, 3);
    std::vector<double> J;
    for (const auto& r : g) J.push_back(0.3 * r(0) * r(0) + 1.7 * r(1) * r(1) + r(2) * r(2) + 0.4 * r(0) * r(2) + 5.0);
    const auto fit = fit_quadratic(g, J);
    EXPECT_EQ(max_abs(fit.f), 0.0);
    const auto sp = optimal_setpoint(fit, {}, Vector::Zero(3));
    EXPECT_FALSE(sp.fallback);
    EXPECT_TRUE(sp.r == Vector::Zero(3));
}

TEST(OptimalSetpoint, DiagonalSolve) {
    QuadraticFit fit;
    fit.Q = Matrix{{2.0, 0.0}, {0.0, 2.0}};
    fit.f = Vector{{-2.0, -4.0}};
    const auto sp = optimal_setpoint(fit, {}, Vector::Zero(2));
    EXPECT_DOUBLE_EQ(sp.r(0), 1.0);
    EXPECT_DOUBLE_EQ(sp.r(1), 2.0);
    const auto fixed = optimal_setpoint(fit, {{1, 0.0}}, Vector::Zero(2));
    EXPECT_DOUBLE_EQ(fixed.r(0), 1.0);
    EXPECT_EQ(fixed.r(1), 0.0);
}

TEST(OptimalSetpoint, CoupledConstraint) {
    QuadraticFit fit;
    fit.Q = Matrix{{2.0, 1.0}, {1.0, 2.0}};
    fit.f = Vector{{-1.0, 0.0}};
    const auto sp = optimal_setpoint(fit, {{1, 0.75}}, Vector::Zero(2));
    // min over r0 of r0^2 + 0.75 r0 - r0 -> r0 = 0.125
    EXPECT_NEAR(sp.r(0), 0.125, 1e-15);
    EXPECT_EQ(sp.r(1), 0.75);
}

TEST(OptimalSetpoint, IndefiniteFallsBack) {
    QuadraticFit fit;
    fit.Q = Matrix{{2.0, 0.0}, {0.0, -1.0}};
    fit.f = Vector{{1.0, 1.0}};
    const Vector rd{{0.3, -0.2}};
    const auto sp = optimal_setpoint(fit, {}, rd);
    EXPECT_TRUE(sp.fallback);
    EXPECT_TRUE(sp.r == rd);
    const auto fixed = optimal_setpoint(fit, {{0, 9.0}}, rd);
    EXPECT_TRUE(fixed.fallback);
    EXPECT_EQ(fixed.r(0), 9.0);
}

TEST(OptimalSetpoint, ScalingInvariance) {
    std::mt19937_64 rng(35);
    const Matrix H = Matrix::Random(3, 3);
    QuadraticFit fit;
    fit.Q = H * H.transpose() + Matrix::Identity(3, 3);
    fit.f = random_vector(rng, 3);
    const Vector r = optimal_setpoint(fit, {}, Vector::Zero(3)).r;
    for (double s : {2.0, 0.5, 3.0, 1024.0}) {
        QuadraticFit scaled = fit;
        scaled.Q *= s;
        scaled.f *= s;
        scaled.c *= s;
        EXPECT_LE(max_abs(optimal_setpoint(scaled, {}, Vector::Zero(3)).r - r), 1e-12 * max_abs(r)) << s;
    }
}

TEST(CoordinateStep, DecoupledMatchesPerSubsystemBruteForce) {
    const CoupledPlant p = scalar_plant(0.7, 1.0, 0.0, 1.0, 0.0);
    std::array<LocalMpcConfig, 2> local{LocalMpcConfig{scalar(1.0), scalar(1.0), 6}, LocalMpcConfig{scalar(1.0), scalar(1.0), 6}};
    std::array<CentralCostConfig, 2> central{CentralCostConfig{scalar(1.0), scalar(0.3), 0, Vector::Constant(1, 0.5)},
                                             CentralCostConfig{scalar(2.0), scalar(0.1), 1, Vector::Constant(1, -0.4)}};
    HandlerPair h(p, local, central);
    h[0].observe(Vector::Constant(1, 1.0), 0);
    h[1].observe(Vector::Constant(1, -0.5), 0);
    CoordinatorConfig cfg;
    cfg.beta = 1.0;
    const Vector r_d{{0.5, -0.4}};
    const auto res = coordinate_step(h.endpoints(), cfg, r_d);
    ASSERT_FALSE(res.fallback);

    for (int s = 0; s < 2; ++s) {
        double best = std::numeric_limits<double>::infinity(), arg = 0.0;
        for (int i = -20000; i <= 20000; ++i) {
            const double r = r_d(s) + i * 1e-4;
            NegotiationRequest req;
            req.r = Vector::Constant(1, r);
            req.r_d = Vector::Constant(1, r_d(s));
            req.v = Profile(6, 1);
            const double J = h[s].serve(req).J;
            if (J < best) {
                best = J;
                arg = r;
            }
        }
        EXPECT_NEAR(res.r_opt(s), arg, 1e-4) << "subsystem " << s + 1;
    }
}

TEST(CoordinateStep, ExactQuadraticIsGridInvariant) {
    std::mt19937_64 rng(36);
    const CoupledPlant p = random_plant(rng, 0.6);
    HandlerPair h(p, 5, 1, 0.1);
    ASSERT_LT(h.rho(0.6), 0.95);
    h[0].observe(random_vector(rng, p.s1.nx()), 0);
    h[1].observe(random_vector(rng, p.s2.nx()), 0);
    CoordinatorConfig cfg;
    cfg.beta = 0.6;
    cfg.tol = 1e-13;
    const Vector r_d = random_vector(rng, 2);
    const auto a = coordinate_step(h.endpoints(), cfg, r_d);
    cfg.m = 5;
    const auto b = coordinate_step(h.endpoints(), cfg, r_d);
    ASSERT_TRUE(a.fit && b.fit);
    EXPECT_LE(a.fit->relative_residual, 1e-8);
    EXPECT_LE(max_abs(a.r_opt - b.r_opt), 1e-8);
}

TEST(CoordinateStep, ZeroWeightsFallBack) {
    const CoupledPlant p = scalar_plant(0.5, 1.0, 0.2, 0.5, 0.0);
    std::array<LocalMpcConfig, 2> local{LocalMpcConfig{scalar(1.0), scalar(1.0), 4}, LocalMpcConfig{scalar(1.0), scalar(1.0), 4}};
    std::array<CentralCostConfig, 2> central{CentralCostConfig{scalar(0.0), scalar(0.0), 0, Vector::Zero(1)},
                                             CentralCostConfig{scalar(0.0), scalar(0.0), 0, Vector::Zero(1)}};
    HandlerPair h(p, local, central);
    h[0].observe(Vector::Constant(1, 1.0), 0);
    CoordinatorConfig cfg;
    const Vector r_d{{0.2, 0.1}};
    const auto res = coordinate_step(h.endpoints(), cfg, r_d);
    EXPECT_TRUE(res.fallback);
    EXPECT_TRUE(res.r_opt == r_d);
    EXPECT_TRUE(h[0].committed_move().has_value());
}

TEST(CoordinateStep, EquilibriumStaysExactlyZero) {
    std::mt19937_64 rng(37);
    const CoupledPlant p = random_plant(rng, 0.7);
    HandlerPair h(p, 5, 2);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    const auto res = coordinate_step(h.endpoints(), cfg, Vector::Zero(2));
    EXPECT_TRUE(res.r_opt == Vector::Zero(2));
    EXPECT_TRUE(*h[0].committed_move() == Vector::Zero(p.s1.nu()));
    EXPECT_TRUE(*h[1].committed_move() == Vector::Zero(p.s2.nu()));
}

TEST(CoordinateStep, WorkersDoNotChangeTheResult) {
    std::mt19937_64 rng(38);
    const CoupledPlant p = random_plant(rng, 0.7, 3, 2, 2, 1, 2, 1);
    HandlerPair h(p, 6, 1, 0.05);
    h[0].observe(random_vector(rng, p.s1.nx()), 0);
    h[1].observe(random_vector(rng, p.s2.nx()), 0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    const Vector r_d = random_vector(rng, 3);
    const auto a = coordinate_step(h.endpoints(), cfg, r_d);
    cfg.workers = 4;
    const auto b = coordinate_step(h.endpoints(), cfg, r_d);
    EXPECT_TRUE(a.r_opt == b.r_opt);
    EXPECT_EQ(a.outcome.iterations, b.outcome.iterations);
    for (std::size_t i = 0; i < a.nodes.size(); ++i) EXPECT_EQ(a.nodes[i].J, b.nodes[i].J);
}

TEST(CoordinateStep, FixedComponentIsExact) {
    std::mt19937_64 rng(39);
    const CoupledPlant p = random_plant(rng, 0.5, 3, 2, 2, 1, 2, 1);
    HandlerPair h(p, 5);
    h[0].observe(random_vector(rng, p.s1.nx()), 0);
    CoordinatorConfig cfg;
    cfg.beta = 0.5;
    const auto res = coordinate_step(h.endpoints(), cfg, Vector::Zero(3), {{1, 0.123456789}});
    EXPECT_EQ(res.r_opt(1), 0.123456789);
}

TEST(WarmStart, ShiftHoldsTheLastValue) {
    Profile a = Profile::from_stacked(Vector::LinSpaced(4, 1, 4), 1);
    const auto out = shift_profiles({a, a});
    EXPECT_EQ(out[0].stacked()(0), 2.0);
    EXPECT_EQ(out[0].stacked()(2), 4.0);
    EXPECT_EQ(out[0].stacked()(3), 4.0);
}
