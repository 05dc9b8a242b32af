#ifndef CONSENSUS_LOCAL_MODEL_HPP
#define CONSENSUS_LOCAL_MODEL_HPP

#include "consensus/sym_matrix.hpp"

#include <concepts>
#include <span>
#include <stdexcept>

namespace consensus {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// A local model restricts scene values inside a region to Z(n) = U(n) θ
/// with a basis U(n) shared by every region. kOutputDim is d (channels of
/// the scene map), kParamDim is M (size of θ).
template <typename T>
concept LocalModel = requires(const T& m, int x, int y) {
  { T::kOutputDim } -> std::convertible_to<int>;
  { T::kParamDim } -> std::convertible_to<int>;
  { m.evaluate(x, y) } -> std::convertible_to<
      Eigen::Matrix<double, T::kOutputDim, T::kParamDim>>;
};

template <LocalModel Model>
using BasisMatrix = Eigen::Matrix<double, Model::kOutputDim, Model::kParamDim>;
template <LocalModel Model>
using ParamVec = Vec<Model::kParamDim>;
template <LocalModel Model>
using ValueVec = Vec<Model::kOutputDim>;
template <LocalModel Model>
using RegionMoment = SymMatrix<Model::kParamDim>;

/// Slanted-plane disparity: U(n) = [x/s  y/s  1].
///
/// `coord_scale` divides the absolute pixel coordinates. It must be the same
/// for every region of a problem; a fixed rescaling does not change the set
/// of representable planes, it only conditions the 3x3 systems.
struct PlanarDisparity {
  static constexpr int kOutputDim = 1;
  static constexpr int kParamDim = 3;
  double coord_scale = 1.0;

  Eigen::Matrix<double, 1, 3> evaluate(int x, int y) const {
    const double inv = 1.0 / coord_scale;
    return {x * inv, y * inv, 1.0};
  }
};

/// Surface gradients of a locally quadratic height field: the x and y
/// derivatives of [x² y² xy x y].
struct QuadraticNormals {
  static constexpr int kOutputDim = 2;
  static constexpr int kParamDim = 5;
  double coord_scale = 1.0;

  Eigen::Matrix<double, 2, 5> evaluate(int x, int y) const {
    const double xs = x / coord_scale;
    const double ys = y / coord_scale;
    Eigen::Matrix<double, 2, 5> u;
    u << 2.0 * xs, 0.0, ys, 1.0, 0.0,
         0.0, 2.0 * ys, xs, 0.0, 1.0;
    return u;
  }
};

/// Locally affine optical flow: block-diagonal [x y 1] per flow component.
struct AffineFlow {
  static constexpr int kOutputDim = 2;
  static constexpr int kParamDim = 6;
  double coord_scale = 1.0;

  Eigen::Matrix<double, 2, 6> evaluate(int x, int y) const {
    const double xs = x / coord_scale;
    const double ys = y / coord_scale;
    Eigen::Matrix<double, 2, 6> u;
    u << xs, ys, 1.0, 0.0, 0.0, 0.0,
         0.0, 0.0, 0.0, xs, ys, 1.0;
    return u;
  }
};

static_assert(LocalModel<PlanarDisparity>);
static_assert(LocalModel<QuadraticNormals>);
static_assert(LocalModel<AffineFlow>);

inline PlanarDisparity make_planar_disparity(double coord_scale = 1.0) {
  return PlanarDisparity{coord_scale};
}
inline QuadraticNormals make_quadratic_normals(double coord_scale = 1.0) {
  return QuadraticNormals{coord_scale};
}
inline AffineFlow make_affine_flow(double coord_scale = 1.0) {
  return AffineFlow{coord_scale};
}

/// Σ_{n ∈ pixels} U(n)ᵀU(n).
template <LocalModel Model>
RegionMoment<Model> moment_of_region(const Model& model,
                                     std::span<const Pixel> pixels) {
  if (pixels.empty()) {
    throw std::invalid_argument("moment_of_region: empty pixel set");
  }
  RegionMoment<Model> q;
  for (const Pixel& n : pixels) q.add_gram(model.evaluate(n.x, n.y));
  return q;
}

/// Moment of a region from the moments of a partition of it.
template <int N>
SymMatrix<N> moment_from_children(std::span<const SymMatrix<N>> children) {
  if (children.empty()) {
    throw std::invalid_argument("moment_from_children: no children");
  }
  SymMatrix<N> q;
  for (const auto& c : children) q += c;
  return q;
}

}  // namespace consensus

#endif  // CONSENSUS_LOCAL_MODEL_HPP
