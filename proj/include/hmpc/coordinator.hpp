#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmpc/local_controller.hpp"

namespace hmpc {

using ProfilePair = std::array<Profile, 2>;
using EndpointPair = std::array<SubsystemEndpoint*, 2>;

struct CoordinatorConfig {
    double beta = 0.5;
    double tol = 1e-5;
    long max_iter = 400;
    double delta = 1.0;
    int m = 3;
    double divergence_sentinel = 1e9;
    /// Trailing window used to classify a run that exhausted its budget.
    long growth_window = 50;
    bool warm_start = true;
    int workers = 1;
    bool record_iterates = false;

    void validate() const {
        if (!(beta > 0.0 && beta <= 1.0)) fail(ErrorCode::InvalidConfig, "beta must lie in (0, 1]");
        if (!(tol > 0.0)) fail(ErrorCode::InvalidConfig, "tol must be positive");
        if (max_iter < 1) fail(ErrorCode::InvalidConfig, "max_iter must be at least 1");
        if (!(delta > 0.0)) fail(ErrorCode::InvalidConfig, "grid spacing delta must be positive");
        if (workers < 1) fail(ErrorCode::InvalidConfig, "workers must be at least 1");
    }
};

enum class NegotiationStatus { Converged, Diverged, BudgetExhausted };

constexpr const char* to_string(NegotiationStatus s) {
    switch (s) {
        case NegotiationStatus::Converged: return "converged";
        case NegotiationStatus::Diverged: return "diverged";
        case NegotiationStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

struct NegotiationOutcome {
    /// Coupling profiles of the last query (coupling channels only). J_parts and the
    /// subsystems' last control profiles were evaluated at exactly these profiles.
    ProfilePair v_inf;
    std::array<double, 2> J_parts{0.0, 0.0};
    std::vector<double> error_trace;
    NegotiationStatus status = NegotiationStatus::BudgetExhausted;
    long iterations = 0;
    /// Filtered iterates v^(0), v^(1), ... when recording is enabled.
    std::vector<ProfilePair> iterates;

    [[nodiscard]] bool converged() const { return status == NegotiationStatus::Converged; }
    [[nodiscard]] double J() const { return J_parts[0] + J_parts[1]; }
};

/// Externally driven channels appended to each subsystem's incoming coupling profile.
struct ExogenousProfiles {
    std::array<std::optional<Profile>, 2> profiles;
};

[[nodiscard]] inline ProfilePair filter_update(const ProfilePair& prev, const ProfilePair& hat, double beta) {
    ProfilePair out;
    for (int s = 0; s < 2; ++s) {
        if (!prev[s].same_shape(hat[s])) fail(ErrorCode::DimensionMismatch, "filter_update profile shapes differ");
        out[s] = Profile::from_stacked(prev[s].stacked() + beta * (hat[s].stacked() - prev[s].stacked()), prev[s].width());
        if (prev[s].width() == 0) out[s] = prev[s];
    }
    return out;
}

[[nodiscard]] inline double max_difference(const ProfilePair& a, const ProfilePair& b) {
    double e = 0.0;
    for (int s = 0; s < 2; ++s)
        if (a[s].stacked().size() > 0) e = std::max(e, (a[s].stacked() - b[s].stacked()).cwiseAbs().maxCoeff());
    return e;
}

namespace detail {

/// Interleaves per step [coupling; exogenous].
inline Profile compose_incoming(const Profile& coupling, const std::optional<Profile>& exo) {
    if (!exo || exo->width() == 0) return coupling;
    if (exo->horizon() != coupling.horizon()) fail(ErrorCode::DimensionMismatch, "exogenous profile horizon");
    Profile out(coupling.horizon(), coupling.width() + exo->width());
    for (Index i = 0; i < coupling.horizon(); ++i) {
        out.at(i).head(coupling.width()) = coupling.at(i);
        out.at(i).tail(exo->width()) = exo->at(i);
    }
    return out;
}

struct Split {
    std::array<Index, 2> dims;
    [[nodiscard]] Vector part(const Vector& r, int s) const { return s == 0 ? r.head(dims[0]) : r.tail(dims[1]); }
};

inline Split setpoint_split(const EndpointPair& ep) { return {{ep[0]->info().setpoint_dim, ep[1]->info().setpoint_dim}}; }

}  // namespace detail

/// Zero coupling profiles shaped for the pair of endpoints (coupling channels only).
[[nodiscard]] inline ProfilePair zero_coupling(const EndpointPair& ep, const ExogenousProfiles& exo = {}) {
    ProfilePair out;
    for (int s = 0; s < 2; ++s) {
        const auto inf = ep[s]->info();
        const Index e = exo.profiles[s] ? exo.profiles[s]->width() : 0;
        out[s] = Profile(inf.horizon, inf.coupling_in - e);
    }
    return out;
}

/**
 * Filtered fixed-point negotiation at frozen states and set-points. Each round sends
 * (r_s, r_d_s, v_s) to both subsystems, swaps the emitted profiles and filters.
 */
[[nodiscard]] inline NegotiationOutcome fixed_point_solve(const EndpointPair& ep, const Vector& r, const Vector& r_d,
                                                          const ProfilePair& v0, const CoordinatorConfig& cfg,
                                                          const ExogenousProfiles& exo = {}, long step = 0) {
    cfg.validate();
    const auto split = detail::setpoint_split(ep);
    if (r.size() != split.dims[0] + split.dims[1] || r_d.size() != r.size())
        fail(ErrorCode::DimensionMismatch, "set-point vector size");

    NegotiationOutcome out;
    ProfilePair V = v0;
    if (cfg.record_iterates) out.iterates.push_back(V);
    std::array<NegotiationRequest, 2> req;
    for (int s = 0; s < 2; ++s) {
        req[s].kind = NegotiationRequest::Kind::Negotiate;
        req[s].step = step;
        req[s].r = split.part(r, s);
        req[s].r_d = split.part(r_d, s);
    }

    for (long sigma = 0; sigma < cfg.max_iter; ++sigma) {
        std::array<NegotiationResponse, 2> resp;
        for (int s = 0; s < 2; ++s) {
            req[s].sigma = sigma;
            req[s].v = detail::compose_incoming(V[s], exo.profiles[s]);
            resp[s] = ep[s]->serve(req[s]);
            if (resp[s].is_error()) fail(ErrorCode::ProtocolError, "subsystem " + std::to_string(s + 1) + ": " + resp[s].message);
        }
        // S2 emits the coupling received by S1 and vice versa.
        const ProfilePair hat{resp[1].v_hat, resp[0].v_hat};
        ProfilePair next = filter_update(V, hat, cfg.beta);
        const double err = max_difference(next, V);

        out.error_trace.push_back(err);
        out.J_parts = {resp[0].J, resp[1].J};
        out.v_inf = V;
        out.iterations = sigma + 1;
        if (cfg.record_iterates) out.iterates.push_back(next);

        if (err <= cfg.tol) {
            out.status = NegotiationStatus::Converged;
            return out;
        }
        if (!std::isfinite(err) || err > cfg.divergence_sentinel) {
            out.status = NegotiationStatus::Diverged;
            return out;
        }
        V = std::move(next);
    }

    // Budget exhausted: a trace still growing over the trailing window counts as divergence.
    const auto& t = out.error_trace;
    const auto w = static_cast<std::size_t>(std::max<long>(1, std::min<long>(cfg.growth_window, static_cast<long>(t.size()) - 1)));
    out.status = NegotiationStatus::BudgetExhausted;
    if (t.size() > w && t[t.size() - 1 - w] > 0.0 && t.back() > t[t.size() - 1 - w])
        out.status = NegotiationStatus::Diverged;
    return out;
}

// --- convergence certification ---------------------------------------------

/// Z(beta) = (1 - beta) I + beta [[0, Mv2_bar], [Mv1_bar, 0]].
[[nodiscard]] inline Matrix assemble_iteration_matrix(const Matrix& Mv1_bar, const Matrix& Mv2_bar, double beta) {
    // Mv1_bar maps S1's incoming profile (n1) to the profile S2 receives (n2).
    const Index n1 = Mv1_bar.cols(), n2 = Mv1_bar.rows();
    if (Mv2_bar.rows() != n1 || Mv2_bar.cols() != n2) fail(ErrorCode::DimensionMismatch, "iteration matrix blocks");
    Matrix Z = Matrix::Zero(n1 + n2, n1 + n2);
    Z.topRightCorner(n1, n2) = beta * Mv2_bar;
    Z.bottomLeftCorner(n2, n1) = beta * Mv1_bar;
    Z.diagonal().array() += 1.0 - beta;
    return Z;
}

/// Columns of an Mv_bar that belong to coupling channels (drops exogenous ones).
[[nodiscard]] inline Matrix coupling_columns(const SensitivityReport& rep, Index horizon) {
    const Index c = rep.coupling_channels, w = c + rep.exogenous_channels;
    if (rep.exogenous_channels == 0) return rep.Mv_bar;
    Matrix out(rep.Mv_bar.rows(), c * horizon);
    for (Index i = 0; i < horizon; ++i) out.middleCols(i * c, c) = rep.Mv_bar.middleCols(i * w, c);
    return out;
}

/**
 * Spectrum of [[0, Mv2], [Mv1, 0]] obtained from the smaller of Mv2*Mv1 / Mv1*Mv2:
 * its eigenvalues are +-sqrt(lambda), padded with zeros when the blocks are not square.
 */
[[nodiscard]] inline ComplexVector coupling_spectrum(const Matrix& Mv1_bar, const Matrix& Mv2_bar) {
    const Index n1 = Mv1_bar.cols(), n2 = Mv1_bar.rows();
    if (Mv2_bar.rows() != n1 || Mv2_bar.cols() != n2) fail(ErrorCode::DimensionMismatch, "iteration matrix blocks");
    const Matrix P = n1 <= n2 ? Matrix(Mv2_bar * Mv1_bar) : Matrix(Mv1_bar * Mv2_bar);
    const ComplexVector lam = eigenvalues(P);
    ComplexVector mu(n1 + n2);
    mu.setZero();
    for (Index i = 0; i < lam.size(); ++i) {
        const std::complex<double> s = std::sqrt(lam(i));
        mu(2 * i) = s;
        mu(2 * i + 1) = -s;
    }
    return mu;
}

[[nodiscard]] inline double spectral_radius_from_spectrum(const ComplexVector& mu, double beta) {
    double rho = mu.size() == 0 ? std::abs(1.0 - beta) : 0.0;
    for (Index i = 0; i < mu.size(); ++i) rho = std::max(rho, std::abs((1.0 - beta) + beta * mu(i)));
    return rho;
}

struct CertificationRow {
    double beta;
    double rho;
};

struct CertificationReport {
    std::vector<CertificationRow> rows;
    std::optional<double> recommended_beta;
    double recommended_rho = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool certified() const { return recommended_beta.has_value(); }
};

[[nodiscard]] inline std::vector<double> beta_grid(double start, double stop, double step) {
    if (!(step > 0.0) || stop < start) fail(ErrorCode::InvalidConfig, "beta sweep needs start <= stop and step > 0");
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
    return out;
}

/// rho(Z(beta)) per grid value; recommends the minimiser among values with rho < 1.
[[nodiscard]] inline CertificationReport certify_convergence(const Matrix& Mv1_bar, const Matrix& Mv2_bar,
                                                             const std::vector<double>& betas) {
    const ComplexVector mu = coupling_spectrum(Mv1_bar, Mv2_bar);
    CertificationReport rep;
    for (double b : betas) {
        const double rho = spectral_radius_from_spectrum(mu, b);
        rep.rows.push_back({b, rho});
        if (b > 0.0 && rho < 1.0 && rho < rep.recommended_rho) {
            rep.recommended_rho = rho;
            rep.recommended_beta = b;
        }
    }
    return rep;
}

[[nodiscard]] inline CertificationReport certify_convergence(const EndpointPair& ep, const std::vector<double>& betas) {
    const Matrix M1 = coupling_columns(ep[0]->sensitivity(), ep[0]->info().horizon);
    const Matrix M2 = coupling_columns(ep[1]->sensitivity(), ep[1]->info().horizon);
    return certify_convergence(M1, M2, betas);
}

// --- set-point grid and quadratic identification ---------------------------

[[nodiscard]] inline std::vector<Vector> build_setpoint_grid(const Vector& r_d, double delta, int m) {
    const Index n = r_d.size();
    const double needed = static_cast<double>((n + 1) * (n + 2)) / 2.0;
    if (m < 1 || std::pow(static_cast<double>(m), static_cast<double>(n)) < needed)
        fail(ErrorCode::GridTooSmall, "m^n_r must be at least (n_r+1)(n_r+2)/2");
    if (m % 2 == 0) fail(ErrorCode::InvalidGrid, "m must be odd so that r_d is a grid node");
    if (!(delta > 0.0)) fail(ErrorCode::InvalidGrid, "delta must be positive");

    std::vector<double> offsets(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) offsets[static_cast<std::size_t>(j)] = delta * (-1.0 + 2.0 * j / (m - 1));
    offsets[static_cast<std::size_t>(m / 2)] = 0.0;

    std::vector<Vector> nodes;
    std::vector<int> digit(static_cast<std::size_t>(n), 0);
    while (true) {
        Vector r = r_d;
        for (Index i = 0; i < n; ++i) r(i) += offsets[static_cast<std::size_t>(digit[static_cast<std::size_t>(i)])];
        nodes.push_back(std::move(r));
        Index pos = n - 1;
        while (pos >= 0 && ++digit[static_cast<std::size_t>(pos)] == m) digit[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
    }
    return nodes;
}

/// J(r) ~ 0.5 r'Qr + f'r + c.
struct QuadraticFit {
    Matrix Q;
    Vector f;
    double c = 0.0;
    double residual = 0.0;           ///< RMS of the fit residuals
    double relative_residual = 0.0;  ///< residual RMS over the RMS of the samples

    [[nodiscard]] double value(const Vector& r) const { return 0.5 * r.dot(Q * r) + f.dot(r) + c; }
};

[[nodiscard]] inline QuadraticFit fit_quadratic(const std::vector<Vector>& nodes, const std::vector<double>& values) {
    if (nodes.empty() || nodes.size() != values.size()) fail(ErrorCode::DimensionMismatch, "fit_quadratic sample count");
    const Index n = nodes.front().size();
    const Index p = (n + 1) * (n + 2) / 2;
    const auto rows = static_cast<Index>(nodes.size());
    if (rows < p) fail(ErrorCode::RankDeficient, "not enough samples for a quadratic fit");

    // Regress on centred and scaled coordinates for conditioning.
    Vector center = Vector::Zero(n);
    for (const auto& r : nodes) center += r;
    center /= static_cast<double>(rows);
    double scale = 0.0;
    for (const auto& r : nodes) scale = std::max(scale, max_abs(r - center));
    if (!(scale > 0.0)) scale = 1.0;

    Matrix X(rows, p);
    Vector y(rows);
    for (Index k = 0; k < rows; ++k) {
        const Vector z = (nodes[static_cast<std::size_t>(k)] - center) / scale;
        Index col = 0;
        for (Index i = 0; i < n; ++i) {
            X(k, col++) = 0.5 * z(i) * z(i);
            for (Index j = i + 1; j < n; ++j) X(k, col++) = z(i) * z(j);
        }
        for (Index i = 0; i < n; ++i) X(k, col++) = z(i);
        X(k, col) = 1.0;
        y(k) = values[static_cast<std::size_t>(k)];
    }
    if (!y.allFinite()) fail(ErrorCode::NonFinite, "non-finite cost samples");

    // On a centrally symmetric node set (every grid built here) the even and odd
    // columns are orthogonal, so the two halves are fitted separately; an exactly even
    // sample set then yields an exactly zero linear term.
    const Index nq = n * (n + 1) / 2;
    std::vector<Index> mirror(static_cast<std::size_t>(rows), -1);
    bool symmetric = true;
    for (Index k = 0; k < rows && symmetric; ++k) {
        const Vector zk = X.row(k).segment(nq, n).transpose();
        for (Index l = 0; l < rows; ++l)
            if ((zk + X.row(l).segment(nq, n).transpose()).cwiseAbs().maxCoeff() <= 1e-12) {
                mirror[static_cast<std::size_t>(k)] = l;
                break;
            }
        symmetric = mirror[static_cast<std::size_t>(k)] >= 0;
    }

    Vector theta(p);
    const auto solve = [](const Matrix& A, const Vector& b) {
        Eigen::ColPivHouseholderQR<Matrix> qr(A);
        if (qr.rank() < A.cols()) fail(ErrorCode::RankDeficient, "regression matrix is rank deficient");
        return Vector(qr.solve(b));
    };
    if (symmetric) {
        Matrix Xe(rows, nq + 1);
        Xe << X.leftCols(nq), X.col(p - 1);
        Vector ye(rows), yo(rows);
        for (Index k = 0; k < rows; ++k) {
            const double ym = y(mirror[static_cast<std::size_t>(k)]);
            ye(k) = 0.5 * (y(k) + ym);
            yo(k) = 0.5 * (y(k) - ym);
        }
        const Vector te = solve(Xe, ye);
        theta << te.head(nq), solve(X.middleCols(nq, n), yo), te(nq);
    } else {
        theta = solve(X, y);
    }

    Matrix Qz(n, n);
    Vector fz(n);
    Index col = 0;
    for (Index i = 0; i < n; ++i) {
        Qz(i, i) = theta(col++);
        for (Index j = i + 1; j < n; ++j) Qz(i, j) = Qz(j, i) = theta(col++);
    }
    for (Index i = 0; i < n; ++i) fz(i) = theta(col++);
    const double cz = theta(col);

    QuadraticFit fit;
    const Matrix Qc = Qz / (scale * scale);
    const Vector fc = fz / scale;
    fit.Q = Qc;
    fit.f = fc - Qc * center;
    fit.c = cz - fc.dot(center) + 0.5 * center.dot(Qc * center);

    const Vector res = X * theta - y;
    fit.residual = std::sqrt(res.squaredNorm() / static_cast<double>(rows));
    const double yrms = std::sqrt(y.squaredNorm() / static_cast<double>(rows));
    fit.relative_residual = yrms > 0.0 ? fit.residual / yrms : fit.residual;
    return fit;
}

struct FixedComponent {
    Index index;
    double value;
};

struct SetpointResult {
    Vector r;
    bool fallback = false;
    std::string reason;
};

/**
 * Minimiser of the fitted quadratic, optionally with operator-fixed components. Falls
 * back to `fallback` (fixed components still imposed) when the free block of Q is not
 * positive definite.
 */
[[nodiscard]] inline SetpointResult optimal_setpoint(const QuadraticFit& fit, const std::vector<FixedComponent>& fixed,
                                                     const Vector& fallback) {
    const Index n = fit.f.size();
    if (fallback.size() != n || fit.Q.rows() != n) fail(ErrorCode::DimensionMismatch, "optimal_setpoint sizes");
    std::vector<bool> is_fixed(static_cast<std::size_t>(n), false);
    SetpointResult out{fallback, false, {}};
    for (const auto& fc : fixed) {
        if (fc.index < 0 || fc.index >= n) fail(ErrorCode::DimensionMismatch, "fixed set-point index out of range");
        is_fixed[static_cast<std::size_t>(fc.index)] = true;
        out.r(fc.index) = fc.value;
    }
    std::vector<Index> free;
    for (Index i = 0; i < n; ++i)
        if (!is_fixed[static_cast<std::size_t>(i)]) free.push_back(i);
    if (free.empty()) return out;

    const auto nf = static_cast<Index>(free.size());
    Matrix Qff(nf, nf);
    Vector rhs(nf);
    for (Index a = 0; a < nf; ++a) {
        rhs(a) = -fit.f(free[a]);
        for (Index b = 0; b < nf; ++b) Qff(a, b) = fit.Q(free[a], free[b]);
        for (Index j = 0; j < n; ++j)
            if (is_fixed[static_cast<std::size_t>(j)]) rhs(a) -= fit.Q(free[a], j) * out.r(j);
    }
    const double scale = max_abs(Qff);
    const Eigen::LLT<Matrix> llt(0.5 * (Qff + Qff.transpose()));
    if (!(scale > 0.0) || llt.info() != Eigen::Success || !(min_symmetric_eigenvalue(Qff) > 1e-12 * scale)) {
        out.fallback = true;
        out.reason = "NotPositiveDefinite: fitted Hessian is not positive definite on the free set-points";
        return out;
    }
    const Vector sol = llt.solve(rhs);
    for (Index a = 0; a < nf; ++a) out.r(free[a]) = sol(a) + 0.0;
    return out;
}

/// r_d with the operator-fixed components imposed.
[[nodiscard]] inline Vector fallback_setpoint(const Vector& r_d, const std::vector<FixedComponent>& fixed) {
    Vector r = r_d;
    for (const auto& fc : fixed) {
        if (fc.index < 0 || fc.index >= r.size()) fail(ErrorCode::DimensionMismatch, "fixed set-point index out of range");
        r(fc.index) = fc.value;
    }
    return r;
}

// --- one coordination step --------------------------------------------------

struct NodeResult {
    Vector r;
    double J = 0.0;
    NegotiationStatus status = NegotiationStatus::BudgetExhausted;
    long iterations = 0;
};

struct CoordinationResult {
    Vector r_opt;
    NegotiationOutcome outcome;  ///< final negotiation at r_opt (the committed one)
    std::optional<QuadraticFit> fit;
    std::vector<NodeResult> nodes;
    bool fallback = false;
    std::string reason;
    double elapsed_ms = 0.0;
};

/**
 * Samples the grid around r_d with one negotiation per node, fits the central cost,
 * minimises it, renegotiates at the optimum and commits both subsystems.
 */
[[nodiscard]] inline CoordinationResult coordinate_step(const EndpointPair& ep, const CoordinatorConfig& cfg,
                                                        const Vector& r_d, const std::vector<FixedComponent>& fixed = {},
                                                        std::optional<ProfilePair> v0 = std::nullopt,
                                                        const ExogenousProfiles& exo = {}, long step = 0) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const ProfilePair start = v0 ? *v0 : zero_coupling(ep, exo);
    const std::vector<Vector> grid = build_setpoint_grid(r_d, cfg.delta, cfg.m);

    CoordinationResult res;
    res.nodes.resize(grid.size());
    CoordinatorConfig node_cfg = cfg;
    node_cfg.record_iterates = false;
    const auto eval = [&](std::size_t i) {
        const auto o = fixed_point_solve(ep, grid[i], r_d, start, node_cfg, exo, step);
        res.nodes[i] = {grid[i], o.J(), o.status, o.iterations};
    };
    if (cfg.workers <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) eval(i);
    } else {
        std::vector<std::future<void>> jobs;
        const auto workers = static_cast<std::size_t>(cfg.workers);
        for (std::size_t w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < grid.size(); i += workers) eval(i);
            }));
        for (auto& j : jobs) j.get();
    }

    const bool all_converged =
        std::all_of(res.nodes.begin(), res.nodes.end(), [](const NodeResult& n) { return n.status == NegotiationStatus::Converged; });
    if (!all_converged) {
        res.fallback = true;
        res.reason = "Diverged: a grid-node negotiation did not converge";
        res.r_opt = fallback_setpoint(r_d, fixed);
    } else {
        std::vector<double> J;
        for (const auto& n : res.nodes) J.push_back(n.J);
        try {
            res.fit = fit_quadratic(grid, J);
            auto sp = optimal_setpoint(*res.fit, fixed, r_d);
            res.r_opt = sp.r;
            res.fallback = sp.fallback;
            res.reason = sp.reason;
        } catch (const Error& e) {
            res.fallback = true;
            res.reason = e.what();
            res.r_opt = fallback_setpoint(r_d, fixed);
        }
    }

    res.outcome = fixed_point_solve(ep, res.r_opt, r_d, start, cfg, exo, step);
    NegotiationRequest commit;
    commit.kind = NegotiationRequest::Kind::Commit;
    commit.step = step;
    commit.sigma = res.outcome.iterations;
    for (int s = 0; s < 2; ++s) {
        const auto resp = ep[s]->serve(commit);
        if (resp.is_error()) fail(ErrorCode::ProtocolError, "commit refused by subsystem " + std::to_string(s + 1) + ": " + resp.message);
    }
    res.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Receding-horizon warm start: drop the first entry, hold the last one.
[[nodiscard]] inline ProfilePair shift_profiles(const ProfilePair& v) {
    ProfilePair out = v;
    for (int s = 0; s < 2; ++s) {
        const Index N = v[s].horizon();
        for (Index i = 0; i + 1 < N; ++i) out[s].at(i) = v[s].at(i + 1);
    }
    return out;
}

}  // namespace hmpc
