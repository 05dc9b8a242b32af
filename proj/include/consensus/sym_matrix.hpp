#ifndef CONSENSUS_SYM_MATRIX_HPP
#define CONSENSUS_SYM_MATRIX_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

namespace consensus {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

/// Symmetric N x N matrix stored as its packed upper triangle. Only one copy
/// of each off-diagonal entry exists, so the matrix can never become
/// asymmetric through accumulation.
template <int N>
class SymMatrix {
 public:
  static constexpr int kDim = N;
  static constexpr int kPacked = N * (N + 1) / 2;

  SymMatrix() { packed_.fill(0.0); }

  static SymMatrix zero() { return SymMatrix(); }

  /// Takes the upper triangle of `m`; the lower triangle is ignored.
  static SymMatrix from_upper(const Eigen::Matrix<double, N, N>& m) {
    SymMatrix s;
    for (int i = 0; i < N; ++i)
      for (int j = i; j < N; ++j) s.packed_[slot(i, j)] = m(i, j);
    return s;
  }

  double operator()(int i, int j) const { return packed_[slot(i, j)]; }
  double& at(int i, int j) { return packed_[slot(i, j)]; }

  /// this += scale * uᵀu for a d x N block `u`.
  template <typename Derived>
  void add_gram(const Eigen::MatrixBase<Derived>& u, double scale = 1.0) {
    for (int i = 0; i < N; ++i)
      for (int j = i; j < N; ++j)
        packed_[slot(i, j)] += scale * u.col(i).dot(u.col(j));
  }

  SymMatrix& operator+=(const SymMatrix& o) {
    for (int i = 0; i < kPacked; ++i) packed_[i] += o.packed_[i];
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }

  SymMatrix& operator*=(double s) {
    for (double& v : packed_) v *= s;
    return *this;
  }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  Eigen::Matrix<double, N, N> dense() const {
    Eigen::Matrix<double, N, N> m;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  Vec<N> operator*(const Vec<N>& v) const {
    Vec<N> r = Vec<N>::Zero();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) r(i) += (*this)(i, j) * v(j);
    return r;
  }

  /// vᵀ S v
  double quadratic(const Vec<N>& v) const {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      acc += (*this)(i, i) * v(i) * v(i);
      for (int j = i + 1; j < N; ++j) acc += 2.0 * (*this)(i, j) * v(i) * v(j);
    }
    return acc;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : packed_) m = std::max(m, std::abs(v));
    return m;
  }

  const std::array<double, kPacked>& packed() const { return packed_; }

  static constexpr int slot(int i, int j) {
    if (i > j) {
      const int t = i;
      i = j;
      j = t;
    }
    // Row-major upper triangle: row i starts after i*N - i*(i-1)/2 entries.
    return i * N - i * (i - 1) / 2 + (j - i);
  }

 private:
  std::array<double, kPacked> packed_;
};

/// Packed LDLᵀ factorization of a symmetric positive-definite matrix.
template <int N>
class Ldl {
 public:
  Ldl() = default;

  /// Returns std::nullopt when a pivot is non-positive or negligible relative
  /// to the matrix scale.
  static std::optional<Ldl> factor(const SymMatrix<N>& a) {
    Ldl f;
    const double scale = a.max_abs();
    if (!(scale > 0.0) || !std::isfinite(scale)) return std::nullopt;
    const double tiny = scale * 1e-14;
    for (int j = 0; j < N; ++j) {
      double d = a(j, j);
      for (int k = 0; k < j; ++k) d -= f.l(j, k) * f.l(j, k) * f.diag_[k];
      if (!(d > tiny)) return std::nullopt;
      f.diag_[j] = d;
      for (int i = j + 1; i < N; ++i) {
        double v = a(i, j);
        for (int k = 0; k < j; ++k) v -= f.l(i, k) * f.l(j, k) * f.diag_[k];
        f.l(i, j) = v / d;
      }
    }
    return f;
  }

  Vec<N> solve(const Vec<N>& rhs) const {
    Vec<N> y = rhs;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < i; ++k) y(i) -= l(i, k) * y(k);
    for (int i = 0; i < N; ++i) y(i) /= diag_[i];
    for (int i = N - 1; i >= 0; --i)
      for (int k = i + 1; k < N; ++k) y(i) -= l(k, i) * y(k);
    return y;
  }

  double pivot(int i) const { return diag_[i]; }

 private:
  static constexpr int kLower = N * (N - 1) / 2;
  // Strictly lower entries, row-major: row i holds l(i,0..i-1).
  static constexpr int lslot(int i, int j) { return i * (i - 1) / 2 + j; }
  double& l(int i, int j) { return lower_[lslot(i, j)]; }
  double l(int i, int j) const { return lower_[lslot(i, j)]; }

  std::array<double, N> diag_{};
  std::array<double, (kLower > 0 ? kLower : 1)> lower_{};
};

}  // namespace consensus

#endif  // CONSENSUS_SYM_MATRIX_HPP
