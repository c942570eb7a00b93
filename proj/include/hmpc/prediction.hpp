#pragma once

#include <utility>

#include "hmpc/coupled_model.hpp"

namespace hmpc {

/// Horizon-indexed sequence of equally wide vectors, stored stacked (entry 0 first).
class Profile {
public:
    Profile() = default;
    Profile(Index horizon, Index width) : data_(Vector::Zero(horizon * width)), horizon_(horizon), width_(width) {}

    static Profile from_stacked(Vector stacked, Index width) {
        if (width < 0 || (width == 0 ? stacked.size() != 0 : stacked.size() % width != 0))
            fail(ErrorCode::DimensionMismatch, "stacked profile length is not a multiple of its width");
        Profile p;
        p.horizon_ = width == 0 ? 0 : stacked.size() / width;
        p.width_ = width;
        p.data_ = std::move(stacked);
        return p;
    }

    /// Width-0 profiles still carry their horizon length.
    static Profile empty(Index horizon) {
        Profile p;
        p.horizon_ = horizon;
        return p;
    }

    [[nodiscard]] Index horizon() const { return horizon_; }
    [[nodiscard]] Index width() const { return width_; }
    [[nodiscard]] const Vector& stacked() const { return data_; }
    [[nodiscard]] Vector& stacked() { return data_; }

    [[nodiscard]] auto at(Index i) const { return data_.segment(i * width_, width_); }
    [[nodiscard]] auto at(Index i) { return data_.segment(i * width_, width_); }

    [[nodiscard]] bool same_shape(const Profile& o) const { return horizon_ == o.horizon_ && width_ == o.width_; }

    bool operator==(const Profile& o) const { return same_shape(o) && data_ == o.data_; }

private:
    Vector data_;
    Index horizon_ = 0;
    Index width_ = 0;
};

/// Affine-free linear map (x0, U, V) -> stacked signal.
struct LinearMap {
    Matrix x, u, v;

    [[nodiscard]] Vector apply(const Vector& x0, const Vector& U, const Vector& V) const {
        Vector out = x * x0;
        if (u.cols() > 0) out.noalias() += u * U;
        if (v.cols() > 0) out.noalias() += v * V;
        return out;
    }
};

/**
 * Condensed prediction of one subsystem over a horizon of N moves.
 *
 * Indexing: move i (0-based) and coupling entry i drive x(k+i) -> x(k+i+1); the
 * stacked states are x(k+1..k+N). Output and emitted coupling entry i pair
 * x(k+i+1) with move i and coupling entry i.
 */
struct LiftedMaps {
    Index N = 0;
    Index nx = 0, nu = 0, ny = 0, nv_in = 0, nv_out = 0;
    LinearMap state;
    LinearMap output;
    LinearMap coupling;
};

namespace detail {

/// Row-block-wise product blockdiag(left) * S for N row blocks.
inline Matrix blockdiag_times(const Matrix& left, const Matrix& S, Index N) {
    const Index rin = S.rows() / std::max<Index>(N, 1);
    Matrix out(left.rows() * N, S.cols());
    for (Index i = 0; i < N; ++i) out.middleRows(i * left.rows(), left.rows()).noalias() = left * S.middleRows(i * rin, rin);
    return out;
}

inline void add_blockdiag(Matrix& out, const Matrix& block, Index N) {
    for (Index i = 0; i < N; ++i) out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) += block;
}

}  // namespace detail

[[nodiscard]] inline LiftedMaps lift_subsystem(const SubsystemModel& m, Index N) {
    if (N < 1) fail(ErrorCode::DimensionMismatch, "horizon must be at least 1");
    if (const auto issues = m.check(m.name.empty() ? "model" : m.name); !issues.empty())
        fail(ErrorCode::DimensionMismatch, issues.front());

    LiftedMaps L;
    L.N = N;
    L.nx = m.nx();
    L.nu = m.nu();
    L.ny = m.ny();
    L.nv_in = m.nv_in();
    L.nv_out = m.nv_out();
    const Index nx = L.nx, nu = L.nu, nv = L.nv_in;

    Matrix Sx(nx * N, nx);
    Matrix Su = Matrix::Zero(nx * N, nu * N);
    Matrix Sv = Matrix::Zero(nx * N, nv * N);
    for (Index i = 0; i < N; ++i) {
        auto rows = [&](Matrix& S) { return S.middleRows(i * nx, nx); };
        if (i == 0) {
            Sx.topRows(nx) = m.A;
        } else {
            rows(Sx).noalias() = m.A * Sx.middleRows((i - 1) * nx, nx);
            // Only the first i column blocks are populated in the previous row.
            if (nu > 0) rows(Su).leftCols(i * nu).noalias() = m.A * Su.block((i - 1) * nx, 0, nx, i * nu);
            if (nv > 0) rows(Sv).leftCols(i * nv).noalias() = m.A * Sv.block((i - 1) * nx, 0, nx, i * nv);
        }
        Su.block(i * nx, i * nu, nx, nu) = m.B;
        Sv.block(i * nx, i * nv, nx, nv) = m.G;
    }

    L.output.x = detail::blockdiag_times(m.C, Sx, N);
    L.output.u = detail::blockdiag_times(m.C, Su, N);
    L.output.v = detail::blockdiag_times(m.C, Sv, N);
    detail::add_blockdiag(L.output.u, m.D, N);
    detail::add_blockdiag(L.output.v, m.E, N);

    L.coupling.x = detail::blockdiag_times(m.Cv, Sx, N);
    L.coupling.u = detail::blockdiag_times(m.Cv, Su, N);
    L.coupling.v = detail::blockdiag_times(m.Cv, Sv, N);
    detail::add_blockdiag(L.coupling.u, m.Dv, N);
    detail::add_blockdiag(L.coupling.v, m.Ev, N);

    L.state = {std::move(Sx), std::move(Su), std::move(Sv)};
    return L;
}

namespace detail {

inline void check_profile_args(const LiftedMaps& L, const Vector& x0, const Profile& u, const Profile& v) {
    if (x0.size() != L.nx || u.horizon() != L.N || u.width() != L.nu || v.horizon() != L.N || v.width() != L.nv_in)
        fail(ErrorCode::DimensionMismatch, "profile shapes do not match the lifted maps");
}

}  // namespace detail

struct Prediction {
    Profile states;
    Profile outputs;
};

[[nodiscard]] inline Prediction predict_profiles(const LiftedMaps& L, const Vector& x0, const Profile& u, const Profile& v) {
    detail::check_profile_args(L, x0, u, v);
    return {Profile::from_stacked(L.state.apply(x0, u.stacked(), v.stacked()), L.nx),
            Profile::from_stacked(L.output.apply(x0, u.stacked(), v.stacked()), L.ny)};
}

/// Coupling profile this subsystem emits towards the other one along its prediction.
[[nodiscard]] inline Profile coupling_profile_map(const LiftedMaps& L, const Vector& x0, const Profile& u, const Profile& v) {
    detail::check_profile_args(L, x0, u, v);
    if (L.nv_out == 0) return Profile::empty(L.N);
    return Profile::from_stacked(L.coupling.apply(x0, u.stacked(), v.stacked()), L.nv_out);
}

}  // namespace hmpc
