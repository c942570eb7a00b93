#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hmpc/coupled_model.hpp"

namespace hmpc {
/// Dimensions of the two-stage refrigerator surrogate.
struct SurrogateShape {
    Index nx1 = 10, nu1 = 2, nx2 = 14, nu2 = 1;
    Index nv1 = 3, nv2 = 3;  ///< coupling received by S1 / by S2
    Index nw1 = 1, nw2 = 1;
};

/// Eigenvalue band of each open-loop A_s and the cap on |Ev1|*|Ev2|.
inline constexpr double kSurrogateEigMin = 0.5;
inline constexpr double kSurrogateEigMax = 0.98;
inline constexpr double kSurrogateEvProductCap = 0.25;

/// Preset whose decentralised loop diverges while the coordinated loop stays certified.
inline constexpr std::uint64_t kCryoPresetSeed = 2;
inline constexpr double kCryoPresetCoupling = 5.5;

namespace detail {

class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double operator()() { return dist_(rng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    Matrix matrix(Index r, Index c) {
        Matrix m(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) m(i, j) = (*this)();
        return m;
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Symmetric A = Q diag(lambda) Q' with lambda drawn in [kSurrogateEigMin, kSurrogateEigMax].
inline Matrix stable_state_matrix(Gaussian& g, Index n) {
    const Eigen::HouseholderQR<Matrix> qr(g.matrix(n, n));
    const Matrix Q = qr.householderQ();
    Vector lambda(n);
    for (Index i = 0; i < n; ++i) lambda(i) = g.uniform(kSurrogateEigMin, kSurrogateEigMax);
    return Q * lambda.asDiagonal() * Q.transpose();
}

inline Matrix with_spectral_norm(const Matrix& m, double norm) {
    if (m.size() == 0) return m;
    Eigen::JacobiSVD<Matrix> svd(m);
    const double s = svd.singularValues()(0);
    return s > 0.0 ? Matrix(m * (norm / s)) : m;
}

inline std::vector<std::string> labels(const char* stem, Index n) {
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back(std::string(stem) + std::to_string(i + 1));
    return out;
}

}  // namespace detail

/**
 * Synthetic stand-in for the refrigerator: deterministic in `seed`, every A_s Schur
 * stable on its own, coupling blocks (G, Cv, Dv, E) scaled by `coupling`. The
 * feedthrough Ev blocks are capped so that |Ev1|*|Ev2| <= 0.25, and vanish with the
 * rest of the coupling at coupling = 0. Operating-point offsets are arbitrary.
 */
[[nodiscard]] inline CoupledPlant make_surrogate_plant(std::uint64_t seed, double coupling,
                                                       const SurrogateShape& shape = {}) {
    if (!std::isfinite(coupling) || coupling < 0.0) fail(ErrorCode::InvalidConfig, "coupling strength must be finite and >= 0");
    detail::Gaussian g(seed);

    const auto build = [&](Index nx, Index nu, Index nv_in, Index nv_out, Index nw, const char* name) {
        SubsystemModel m;
        m.name = name;
        m.A = detail::stable_state_matrix(g, nx);
        m.B = g.matrix(nx, nu) / std::sqrt(static_cast<double>(nx)) * 0.5;
        m.C = g.matrix(nu, nx) / std::sqrt(static_cast<double>(nx));
        m.D = Matrix::Zero(nu, nu);
        m.F = g.matrix(nx, nw) / std::sqrt(static_cast<double>(nx)) * 0.2;
        // Coupling enters mostly through the actuator directions.
        const Matrix matched = m.B * g.matrix(nu, nv_in);
        const Matrix unmatched = g.matrix(nx, nv_in) / std::sqrt(static_cast<double>(nx));
        m.G = coupling * 0.1 * (matched + 0.05 * unmatched);
        m.E = coupling * 0.02 * g.matrix(nu, nv_in);
        m.Cv = coupling * g.matrix(nv_out, nx) / std::sqrt(static_cast<double>(nx));
        m.Dv = coupling * 0.02 * g.matrix(nv_out, nu);
        m.Ev = std::min(coupling, 1.0) * detail::with_spectral_norm(g.matrix(nv_out, nv_in), 0.45);
        m.U0 = g.matrix(nu, 1).col(0).cwiseAbs() * 10.0;
        m.Y0 = g.matrix(nu, 1).col(0).cwiseAbs() * 10.0;
        m.input_labels = detail::labels(name[1] == '1' ? "u1_" : "u2_", nu);
        m.output_labels = detail::labels(name[1] == '1' ? "y1_" : "y2_", nu);
        return m;
    };

    CoupledPlant p;
    p.s1 = build(shape.nx1, shape.nu1, shape.nv1, shape.nv2, shape.nw1, "s1");
    p.s2 = build(shape.nx2, shape.nu2, shape.nv2, shape.nv1, shape.nw2, "s2");
    return p;
}

}  // namespace hmpc

namespace hmpc {

[[nodiscard]] inline CoupledPlant make_cryo_preset() { return make_surrogate_plant(kCryoPresetSeed, kCryoPresetCoupling); }

}  // namespace hmpc
