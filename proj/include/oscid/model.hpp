#ifndef OSCID_MODEL_HPP
#define OSCID_MODEL_HPP

// Coefficient matrices of the two-mode oscillator
//
//   q'' + D q' + C q = b,   D = diag(2 pi d1, 2 pi d2),
//   C = [[(2 pi f1)^2, -(2 pi lambda)^2], [-(2 pi lambda)^2, (2 pi f2)^2]],
//
// and the orthogonal change of coordinates q~ = T q that diagonalizes C.
// Frequencies and dampings are stored in Hz; the 2 pi factors only enter
// when matrices are assembled.

#include <cmath>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "oscid/errors.hpp"

namespace oscid {

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

template <typename Scalar>
inline constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;

/// The two connected components of O(2).
enum class Branch { rotation, reflection };

inline const char* to_string(Branch b) {
  return b == Branch::rotation ? "rotation" : "reflection";
}

template <typename Scalar = double>
struct PhysicalParams {
  Scalar f1;
  Scalar f2;
  Scalar lambda;
  Scalar d1 = Scalar(0);
  Scalar d2 = Scalar(0);
};

/// Hybridized eigenfrequencies in Hz; eta_plus is the smaller one.
template <typename Scalar = double>
struct HybridStiffness {
  Scalar eta_plus;
  Scalar eta_minus;

  bool operator==(const HybridStiffness&) const = default;
};

/// Unknowns of the identification problem: (theta [rad], d1 [Hz], d2 [Hz]).
struct ParamVector {
  Eigen::Vector3d values = Eigen::Vector3d::Zero();
  Branch branch = Branch::rotation;

  ParamVector() = default;
  ParamVector(double theta, double d1, double d2, Branch b = Branch::rotation)
      : values(theta, d1, d2), branch(b) {}
  ParamVector(const Eigen::Vector3d& v, Branch b) : values(v), branch(b) {}

  double theta() const { return values[0]; }
  double d1() const { return values[1]; }
  double d2() const { return values[2]; }
};

/// Box [lower, upper] in ParamVector coordinates.
struct Bounds {
  Eigen::Vector3d lower;
  Eigen::Vector3d upper;

  bool valid() const { return (lower.array() <= upper.array()).all(); }
  bool contains(const Eigen::Vector3d& v) const {
    return (v.array() >= lower.array()).all() &&
           (v.array() <= upper.array()).all();
  }
  Eigen::Vector3d project(const Eigen::Vector3d& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }
};

template <typename Scalar>
struct ExtractedPhysical {
  Scalar f1;
  Scalar f2;
  Scalar lambda;
  /// +1 when C12 <= 0 (the -(2 pi lambda)^2 convention), -1 when C12 > 0.
  int coupling_sign;
};

template <typename Derived>
bool is_orthogonal(const Eigen::MatrixBase<Derived>& t,
                   typename Derived::Scalar tol) {
  using Scalar = typename Derived::Scalar;
  const Matrix2<Scalar> defect = t.transpose() * t - Matrix2<Scalar>::Identity();
  return defect.cwiseAbs().maxCoeff() <= tol;
}

namespace detail {

template <typename Derived>
void require_orthogonal(const Eigen::MatrixBase<Derived>& t) {
  using Scalar = typename Derived::Scalar;
  if (!is_orthogonal(t, Scalar(1e-9)))
    throw NotOrthogonal("transformation deviates from O(2) beyond 1e-9");
}

}  // namespace detail

template <typename Scalar>
Matrix2<Scalar> stiffness_from_physical(const PhysicalParams<Scalar>& p) {
  using std::pow;
  const Scalar k11 = pow(two_pi<Scalar> * p.f1, 2);
  const Scalar k22 = pow(two_pi<Scalar> * p.f2, 2);
  const Scalar k12 = -pow(two_pi<Scalar> * p.lambda, 2);
  Matrix2<Scalar> c;
  c << k11, k12, k12, k22;
  return c;
}

/// Closed-form eigenvalues of the stiffness matrix, returned as frequencies:
/// the roots are (2 pi eta_pm)^2 with the minus sign of the square root
/// giving eta_plus.
template <typename Scalar>
HybridStiffness<Scalar> hybrid_eigenvalues(Scalar f1, Scalar f2, Scalar lambda) {
  using std::pow;
  using std::sqrt;
  if (!(f1 > 0) || !(f2 > 0))
    throw NonPositiveFrequency("bare frequencies must be positive");
  const Scalar a = pow(two_pi<Scalar> * f1, 2);
  const Scalar b = pow(two_pi<Scalar> * f2, 2);
  const Scalar c = pow(two_pi<Scalar> * lambda, 2);
  const Scalar root = sqrt(Scalar(4) * c * c + (a - b) * (a - b));
  const Scalar upper = Scalar(0.5) * (a + b + root);
  const Scalar lower = Scalar(0.5) * (a + b - root);
  if (!(lower > 0))
    throw NonPositiveFrequency(
        "coupling too strong: smaller squared eigenvalue is not positive");
  return {sqrt(lower) / two_pi<Scalar>, sqrt(upper) / two_pi<Scalar>};
}

/// Element of O(2) parameterized by an angle; reflection has det -1.
template <typename Scalar>
Matrix2<Scalar> rotation_from_theta(Scalar theta, Branch branch) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(theta);
  const Scalar s = sin(theta);
  Matrix2<Scalar> t;
  if (branch == Branch::rotation)
    t << c, -s, s, c;
  else
    t << -c, s, s, c;
  return t;
}

template <typename Scalar>
Matrix2<Scalar> hybrid_stiffness_matrix(const HybridStiffness<Scalar>& h) {
  using std::pow;
  return Eigen::Matrix<Scalar, 2, 1>(pow(two_pi<Scalar> * h.eta_plus, 2),
                                     pow(two_pi<Scalar> * h.eta_minus, 2))
      .asDiagonal();
}

namespace detail {

template <typename Scalar>
Matrix2<Scalar> symmetrized(const Matrix2<Scalar>& m) {
  Matrix2<Scalar> out = m;
  out(0, 1) = out(1, 0) = Scalar(0.5) * (m(0, 1) + m(1, 0));
  return out;
}

}  // namespace detail

/// C = T^T C~ T, with the off-diagonal pair made exactly equal.
template <typename Derived>
Matrix2<typename Derived::Scalar> physical_stiffness_from_hybrid(
    const Eigen::MatrixBase<Derived>& t,
    const HybridStiffness<typename Derived::Scalar>& hybrid) {
  detail::require_orthogonal(t);
  return detail::symmetrized<typename Derived::Scalar>(
      t.transpose() * hybrid_stiffness_matrix(hybrid) * t);
}

template <typename Derived>
ExtractedPhysical<typename Derived::Scalar> extract_physical(
    const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  if (!(c(0, 0) > 0) || !(c(1, 1) > 0))
    throw NegativeDiagonal("stiffness diagonal must be positive");
  const Scalar off = Scalar(0.5) * (c(0, 1) + c(1, 0));
  return {sqrt(c(0, 0)) / two_pi<Scalar>, sqrt(c(1, 1)) / two_pi<Scalar>,
          sqrt(abs(off)) / two_pi<Scalar>, off > 0 ? -1 : 1};
}

/// D~ = T diag(2 pi d1, 2 pi d2) T^T. Not diagonal unless d1 == d2 or T is
/// a signed permutation.
template <typename Derived>
Matrix2<typename Derived::Scalar> hybrid_damping(
    const Eigen::MatrixBase<Derived>& t, typename Derived::Scalar d1,
    typename Derived::Scalar d2) {
  using Scalar = typename Derived::Scalar;
  detail::require_orthogonal(t);
  const Eigen::Matrix<Scalar, 2, 1> diag(two_pi<Scalar> * d1,
                                         two_pi<Scalar> * d2);
  return detail::symmetrized<Scalar>(t * diag.asDiagonal() * t.transpose());
}

/// Diagonal of D~ / 2 pi from measured quality factors: d = eta / Q.
template <typename Scalar>
std::pair<Scalar, Scalar> damping_reference(Scalar eta_plus, Scalar eta_minus,
                                            Scalar q_plus, Scalar q_minus) {
  if (!(q_plus > 0) || !(q_minus > 0))
    throw NonPositiveQ("quality factors must be positive");
  return {eta_plus / q_plus, eta_minus / q_minus};
}

}  // namespace oscid

#endif  // OSCID_MODEL_HPP
