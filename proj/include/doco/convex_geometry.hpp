#pragma once

// Box sets, Euclidean projection, the directional (tangent-cone) projection
// and the sign selection used by every controller.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "doco/errors.hpp"

namespace doco {

inline constexpr double kMembershipTolerance = 1e-12;

/// Axis-aligned box  prod_k [lower_k, upper_k].  Upper bounds may be +inf
/// (lower = 0, upper = +inf is the nonnegative orthant).
template <typename Scalar = double>
struct BoxSet {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lower;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> upper;

  BoxSet() = default;
  BoxSet(Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lo, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw StructuralError("BoxSet: bound sizes differ");
    for (Eigen::Index k = 0; k < lower.size(); ++k)
      if (!(lower(k) <= upper(k))) throw PreconditionError("BoxSet: lower > upper");
  }

  static BoxSet uniform(Eigen::Index dim, Scalar lo, Scalar hi) {
    using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    return BoxSet(V::Constant(dim, lo), V::Constant(dim, hi));
  }
  static BoxSet orthant(Eigen::Index dim) {
    return uniform(dim, Scalar(0), std::numeric_limits<Scalar>::infinity());
  }

  Eigen::Index dim() const { return lower.size(); }
  bool bounded() const { return upper.allFinite() && lower.allFinite(); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = Scalar(kMembershipTolerance)) const {
    if (x.size() != dim()) throw StructuralError("BoxSet: dimension mismatch");
    return ((x.array() >= lower.array() - tol) && (x.array() <= upper.array() + tol)).all();
  }

  bool operator==(const BoxSet& o) const {
    return lower.size() == o.lower.size() && lower == o.lower && upper == o.upper;
  }
};

using Box = BoxSet<double>;

/// Nearest point of the box: component-wise clamp.
template <typename Scalar, typename Derived>
auto euclidean_project(const BoxSet<Scalar>& set, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != set.dim()) throw StructuralError("euclidean_project: dimension mismatch");
  return x.derived().cwiseMax(set.lower).cwiseMin(set.upper).eval();
}

/// lim_{xi -> 0+} (P_S(x + xi v) - x) / xi  for x in the box.
template <typename Scalar, typename DerivedX, typename DerivedV>
auto tangent_projection(const BoxSet<Scalar>& set, const Eigen::MatrixBase<DerivedX>& x,
                        const Eigen::MatrixBase<DerivedV>& v,
                        Scalar tol = Scalar(kMembershipTolerance)) {
  if (x.size() != set.dim() || v.size() != set.dim())
    throw StructuralError("tangent_projection: dimension mismatch");
  if (!set.contains(x, tol)) throw PreconditionError("tangent_projection: point outside the set");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const bool at_lower = x(k) <= set.lower(k);
    const bool at_upper = x(k) >= set.upper(k);
    if (at_lower && at_upper)
      out(k) = Scalar(0);
    else if (at_lower)
      out(k) = std::max(v(k), Scalar(0));
    else if (at_upper)
      out(k) = std::min(v(k), Scalar(0));
    else
      out(k) = v(k);
  }
  return out;
}

/// Component-wise sign with sgn(0) = 0.
template <typename Derived>
auto sign_select(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
           return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
         })
      .eval();
}

}  // namespace doco
