#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace softchain {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Rigid transform: x_parent = rotation * x_child + position.
template <typename Scalar>
struct PoseT {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> position = Vector3<Scalar>::Zero();

  static PoseT Identity() { return PoseT{}; }

  PoseT operator*(const PoseT& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.position + position};
  }
  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const { return rotation * x + position; }

  PoseT inverse() const {
    const Matrix3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * position)};
  }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = position;
    return m;
  }
};

using Pose = PoseT<double>;
using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& w) {
  Matrix3<Scalar> s;
  s << Scalar(0), -w.z(), w.y(), w.z(), Scalar(0), -w.x(), -w.y(), w.x(), Scalar(0);
  return s;
}

template <typename Scalar>
Vector3<Scalar> vee(const Matrix3<Scalar>& s) {
  return {s(2, 1), s(0, 2), s(1, 0)};
}

/// Largest entry of |R^T R - I|.
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  return (r.transpose() * r - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, typename Derived::Scalar tol = 1e-9) {
  return orthonormality_error(r) <= tol && std::abs(r.determinant() - 1) <= tol;
}

/// Rodrigues formula.
template <typename Scalar>
Matrix3<Scalar> so3_exp(const Vector3<Scalar>& w) {
  using std::cos;
  using std::sin;
  const Scalar theta2 = w.squaredNorm();
  const Matrix3<Scalar> k = skew(w);
  Scalar a, b;
  if (theta2 < Scalar(1e-12)) {
    a = Scalar(1) - theta2 / Scalar(6);
    b = Scalar(0.5) - theta2 / Scalar(24);
  } else {
    const Scalar theta = std::sqrt(theta2);
    a = sin(theta) / theta;
    b = (Scalar(1) - cos(theta)) / theta2;
  }
  return Matrix3<Scalar>::Identity() + a * k + b * k * k;
}

/// Axis-angle vector of a rotation, norm in [0, pi]. Switches to axis extraction from the
/// symmetric part above 3 rad where the skew part loses precision.
template <typename Scalar>
Vector3<Scalar> so3_log(const Matrix3<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  if (!is_rotation(r)) throw std::invalid_argument("so3_log: matrix is not a rotation");

  const Vector3<Scalar> s = Scalar(0.5) * vee(Matrix3<Scalar>(r - r.transpose()));
  const Scalar c = std::clamp((r.trace() - Scalar(1)) / Scalar(2), Scalar(-1), Scalar(1));
  const Scalar sn = s.norm();
  const Scalar theta = atan2(sn, c);

  if (theta < Scalar(1e-6)) return (Scalar(1) + theta * theta / Scalar(6)) * s;
  if (theta <= Scalar(3.0)) return (theta / std::sin(theta)) * s;

  // (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T
  const Matrix3<Scalar> b =
      (Scalar(0.5) * (r + r.transpose()) - c * Matrix3<Scalar>::Identity()) / (Scalar(1) - c);
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Vector3<Scalar> axis = b.col(k) / sqrt(std::max(b(k, k), Scalar(0)));
  axis.normalize();
  if (axis.dot(s) < Scalar(0)) axis = -axis;
  return theta * axis;
}

/// Inverse of the left Jacobian of SO(3): log(exp(d) exp(w)) ~ w + J_l^{-1}(w) d.
template <typename Scalar>
Matrix3<Scalar> so3_left_jacobian_inverse(const Vector3<Scalar>& w) {
  const Scalar theta2 = w.squaredNorm();
  const Matrix3<Scalar> k = skew(w);
  Scalar coeff;
  if (theta2 < Scalar(1e-8)) {
    coeff = Scalar(1) / Scalar(12) + theta2 / Scalar(720);
  } else {
    const Scalar theta = std::sqrt(theta2);
    coeff = Scalar(1) / theta2 - (Scalar(1) + std::cos(theta)) / (Scalar(2) * theta * std::sin(theta));
  }
  return Matrix3<Scalar>::Identity() - Scalar(0.5) * k + coeff * k * k;
}

/// Single universal joint: translate l along z, rotate about x by phi1 then about the new y by
/// phi2, translate l along the new z. Total straight height 2l.
template <typename Scalar>
PoseT<Scalar> uj_fk_single(Scalar phi1, Scalar phi2, Scalar l) {
  using std::cos;
  using std::sin;
  const Scalar c1 = cos(phi1), s1 = sin(phi1), c2 = cos(phi2), s2 = sin(phi2);
  PoseT<Scalar> g;
  g.rotation << c2, Scalar(0), s2,  //
      s1 * s2, c1, -s1 * c2,        //
      -c1 * s2, s1, c1 * c2;
  g.position << l * s2, -l * s1 * c2, l * c1 * c2 + l;
  return g;
}

/// A chain of universal joints with 2n angles ordered (phi_0, phi_1, ..., phi_{2n-1}); pair i
/// drives segment i.
template <typename Scalar>
struct UJConfigT {
  VectorX<Scalar> angles;
  Scalar half_length{};

  Eigen::Index segments() const { return angles.size() / 2; }

  void validate() const {
    if (angles.size() < 2 || angles.size() % 2 != 0)
      throw std::invalid_argument("UJConfig: angle count must be even and >= 2");
    if (!(half_length > Scalar(0))) throw std::invalid_argument("UJConfig: half_length must be > 0");
    for (Eigen::Index i = 0; i < angles.size(); ++i)
      if (!(std::abs(angles[i]) < Scalar(M_PI)))
        throw std::invalid_argument("UJConfig: |phi| must be < pi");
  }
};

using UJConfig = UJConfigT<double>;

/// Tip pose plus every disk pose (frames.front() is the base, frames.back() the tip).
template <typename Scalar>
struct ChainPose {
  PoseT<Scalar> tip;
  std::vector<PoseT<Scalar>> frames;
};

template <typename Scalar>
ChainPose<Scalar> uj_fk_chain(const UJConfigT<Scalar>& cfg) {
  cfg.validate();
  ChainPose<Scalar> out;
  out.frames.reserve(static_cast<std::size_t>(cfg.segments()) + 1);
  out.frames.push_back(PoseT<Scalar>::Identity());
  for (Eigen::Index i = 0; i < cfg.segments(); ++i)
    out.frames.push_back(out.frames.back() *
                         uj_fk_single(cfg.angles[2 * i], cfg.angles[2 * i + 1], cfg.half_length));
  out.tip = out.frames.back();
  return out;
}

/// Constant-curvature configuration: two bending angles and the arc length.
template <typename Scalar>
struct CCConfigT {
  Eigen::Matrix<Scalar, 2, 1> q = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar length{};
};

using CCConfig = CCConfigT<double>;

/// Circular arc with exponential-coordinate orientation exp((q0, q1, 0)). The x-rotation
/// sign convention agrees with uj_fk_single: a positive q0 bends the tip toward -y.
template <typename Scalar>
PoseT<Scalar> cc_fk(const CCConfigT<Scalar>& cfg) {
  using std::cos;
  using std::sin;
  if (!(cfg.length > Scalar(0))) throw std::invalid_argument("cc_fk: length must be > 0");
  const Scalar q0 = cfg.q[0], q1 = cfg.q[1];
  const Scalar theta2 = q0 * q0 + q1 * q1;
  const Scalar length = cfg.length;
  PoseT<Scalar> out;
  out.rotation = so3_exp(Vector3<Scalar>(q0, q1, Scalar(0)));
  // (1 - cos t)/t^2 and sin(t)/t with series near zero
  Scalar a, b;
  if (theta2 < Scalar(1e-10)) {
    a = Scalar(0.5) - theta2 / Scalar(24);
    b = Scalar(1) - theta2 / Scalar(6);
  } else {
    const Scalar theta = std::sqrt(theta2);
    a = (Scalar(1) - cos(theta)) / theta2;
    b = sin(theta) / theta;
  }
  out.position << length * q1 * a, -length * q0 * a, length * b;
  return out;
}

/// Result of projecting a relative rotation onto the two-DoF constant-curvature model.
template <typename Scalar>
struct CCEstimateT {
  CCConfigT<Scalar> config;
  Scalar twist{};
  bool degraded = false;
};

using CCEstimate = CCEstimateT<double>;

inline constexpr double kTwistTolerance = 0.05;

template <typename Scalar>
CCEstimateT<Scalar> cc_estimate(const Matrix3<Scalar>& relative_rotation, Scalar length) {
  const Vector3<Scalar> w = so3_log(relative_rotation);
  CCEstimateT<Scalar> est;
  est.config.q << w.x(), w.y();
  est.config.length = length;
  est.twist = w.z();
  est.degraded = std::abs(w.z()) > Scalar(kTwistTolerance);
  return est;
}

/// Geodesic angle between two rotations.
template <typename Scalar>
Scalar rotation_distance(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  return so3_log(Matrix3<Scalar>(a.transpose() * b)).norm();
}

}  // namespace softchain
