#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "hmpc/error.hpp"

namespace hmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using ComplexVector = Eigen::VectorXcd;

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

template <typename Derived>
[[nodiscard]] double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// 2-norm condition number; +inf for exactly singular matrices, 1 for empty ones.
[[nodiscard]] inline double condition_number(const Matrix& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

[[nodiscard]] inline ComplexVector eigenvalues(const Matrix& m) {
    if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, "eigenvalues of a non-square matrix");
    if (!all_finite(m)) fail(ErrorCode::NonFinite, "eigenvalues of a non-finite matrix");
    if (m.rows() == 0) return {};
    Eigen::EigenSolver<Matrix> es(m, false);
    if (es.info() != Eigen::Success) fail(ErrorCode::NonFinite, "eigenvalue iteration did not converge");
    return es.eigenvalues();
}

/// Largest eigenvalue modulus over the (possibly complex) spectrum.
[[nodiscard]] inline double spectral_radius(const Matrix& m) {
    const ComplexVector ev = eigenvalues(m);
    double rho = 0.0;
    for (Index i = 0; i < ev.size(); ++i) rho = std::max(rho, std::abs(ev(i)));
    return rho;
}

/// Matrix with row `row` removed.
[[nodiscard]] inline Matrix drop_row(const Matrix& m, Index row) {
    Matrix out(m.rows() - 1, m.cols());
    out.topRows(row) = m.topRows(row);
    out.bottomRows(m.rows() - row - 1) = m.bottomRows(m.rows() - row - 1);
    return out;
}

[[nodiscard]] inline Matrix drop_col(const Matrix& m, Index col) {
    Matrix out(m.rows(), m.cols() - 1);
    out.leftCols(col) = m.leftCols(col);
    out.rightCols(m.cols() - col - 1) = m.rightCols(m.cols() - col - 1);
    return out;
}

[[nodiscard]] inline Matrix append_col(const Matrix& m, const Vector& col) {
    Matrix out(m.rows(), m.cols() + 1);
    out.leftCols(m.cols()) = m;
    out.col(m.cols()) = col;
    return out;
}

[[nodiscard]] inline Vector drop_entry(const Vector& v, Index i) {
    Vector out(v.size() - 1);
    out.head(i) = v.head(i);
    out.tail(v.size() - i - 1) = v.tail(v.size() - i - 1);
    return out;
}

/// Block-diagonal repetition of `block` `count` times.
[[nodiscard]] inline Matrix repeat_diag(const Matrix& block, Index count) {
    Matrix out = Matrix::Zero(block.rows() * count, block.cols() * count);
    for (Index i = 0; i < count; ++i) out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
    return out;
}

/// Vertical stacking of `block` `count` times.
[[nodiscard]] inline Matrix repeat_rows(const Matrix& block, Index count) {
    Matrix out(block.rows() * count, block.cols());
    for (Index i = 0; i < count; ++i) out.middleRows(i * block.rows(), block.rows()) = block;
    return out;
}

[[nodiscard]] inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    return max_abs(m - m.transpose()) <= tol * std::max(1.0, max_abs(m));
}

/// Smallest eigenvalue of a symmetric matrix (+inf when empty).
[[nodiscard]] inline double min_symmetric_eigenvalue(const Matrix& m) {
    if (m.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

}  // namespace hmpc
