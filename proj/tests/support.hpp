#pragma once

#include <memory>
#include <random>

#include "hmpc/coordinator.hpp"
#include "hmpc/local_controller.hpp"

namespace hmpc::testing {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// One-state, one-input, one-output subsystem with a single coupling channel each way.
inline SubsystemModel scalar_model(double A, double B, double G, double Cv = 0.0, double Ev = 0.0) {
    SubsystemModel m;
    m.A = scalar(A);
    m.B = scalar(B);
    m.G = scalar(G);
    m.F = scalar(1.0);
    m.C = scalar(1.0);
    m.D = scalar(0.0);
    m.E = scalar(0.0);
    m.Cv = scalar(Cv);
    m.Dv = scalar(0.0);
    m.Ev = scalar(Ev);
    m.U0 = Vector::Zero(1);
    m.Y0 = Vector::Zero(1);
    return m;
}

inline CoupledPlant scalar_plant(double A, double B, double G, double Cv, double Ev) {
    CoupledPlant p;
    p.s1 = scalar_model(A, B, G, Cv, Ev);
    p.s2 = scalar_model(A, B, G, Cv, Ev);
    p.s1.name = "s1";
    p.s2.name = "s2";
    return p;
}

struct RandomShape {
    Index nx = 3, nu = 1, nv_in = 2, nv_out = 2;
};

/// Schur-stable random subsystem; coupling matrices scaled by `gamma`.
inline SubsystemModel random_model(std::mt19937_64& rng, const RandomShape& s, double gamma, double ev_norm = 0.3) {
    std::normal_distribution<double> n01;
    const auto randn = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = n01(rng);
        return m;
    };
    SubsystemModel m;
    Matrix A = randn(s.nx, s.nx);
    A *= 0.8 / std::max(spectral_radius(A), 1e-6);
    m.A = A;
    m.B = randn(s.nx, s.nu);
    m.G = gamma * randn(s.nx, s.nv_in) / std::sqrt(static_cast<double>(s.nx));
    m.F = randn(s.nx, 1);
    m.C = randn(s.nu, s.nx);
    m.D = 0.1 * randn(s.nu, s.nu);
    m.E = 0.1 * gamma * randn(s.nu, s.nv_in);
    m.Cv = gamma * randn(s.nv_out, s.nx) / std::sqrt(static_cast<double>(s.nx));
    m.Dv = 0.1 * gamma * randn(s.nv_out, s.nu);
    Matrix Ev = randn(s.nv_out, s.nv_in);
    const double norm = Eigen::JacobiSVD<Matrix>(Ev).singularValues()(0);
    m.Ev = std::min(gamma, 1.0) * ev_norm * Ev / norm;
    m.U0 = Vector::Zero(s.nu);
    m.Y0 = Vector::Zero(s.nu);
    return m;
}

inline CoupledPlant random_plant(std::mt19937_64& rng, double gamma, Index nx1 = 3, Index nx2 = 2, Index nu1 = 1, Index nu2 = 1,
                                 Index nv1 = 2, Index nv2 = 1) {
    CoupledPlant p;
    p.s1 = random_model(rng, {nx1, nu1, nv1, nv2}, gamma);
    p.s2 = random_model(rng, {nx2, nu2, nv2, nv1}, gamma);
    p.s1.name = "s1";
    p.s2.name = "s2";
    return p;
}

inline LocalMpcConfig identity_local(const SubsystemModel& m, Index N) {
    return {Matrix::Identity(m.nx(), m.nx()), Matrix::Identity(m.nu(), m.nu()), N};
}

inline CentralCostConfig identity_central(const SubsystemModel& m, int q = 0, double rc = 0.0) {
    return {Matrix::Identity(m.ny(), m.ny()), rc * Matrix::Identity(m.nu(), m.nu()), q, Vector::Zero(m.ny())};
}

/// Two in-process subsystem handlers for a plant.
struct HandlerPair {
    std::unique_ptr<SubsystemHandler> h1, h2;

    HandlerPair(const CoupledPlant& p, Index N, int q = 0, double rc = 0.0)
        : h1(std::make_unique<SubsystemHandler>(p.s1, identity_local(p.s1, N), identity_central(p.s1, q, rc), p.exogenous[0])),
          h2(std::make_unique<SubsystemHandler>(p.s2, identity_local(p.s2, N), identity_central(p.s2, q, rc), p.exogenous[1])) {}

    HandlerPair(const CoupledPlant& p, const std::array<LocalMpcConfig, 2>& local, const std::array<CentralCostConfig, 2>& central)
        : h1(std::make_unique<SubsystemHandler>(p.s1, local[0], central[0], p.exogenous[0])),
          h2(std::make_unique<SubsystemHandler>(p.s2, local[1], central[1], p.exogenous[1])) {}

    [[nodiscard]] EndpointPair endpoints() const { return {h1.get(), h2.get()}; }
    [[nodiscard]] SubsystemHandler& operator[](int s) const { return s == 0 ? *h1 : *h2; }

    [[nodiscard]] double rho(double beta) const {
        return spectral_radius_from_spectrum(coupling_spectrum(h1->gains().Mv_bar, h2->gains().Mv_bar), beta);
    }
};

inline Vector random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = d(rng);
    return v;
}

inline ProfilePair random_coupling(std::mt19937_64& rng, const EndpointPair& ep, double scale = 1.0) {
    ProfilePair v = zero_coupling(ep);
    for (auto& p : v) p.stacked() = random_vector(rng, p.stacked().size(), scale);
    return v;
}

}  // namespace hmpc::testing
