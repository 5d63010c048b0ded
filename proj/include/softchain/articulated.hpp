#pragma once

#include <softchain/kinematics.hpp>

#include <Eigen/Dense>

#include <vector>

namespace softchain {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix3Xd = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Rigid body mass properties in its own frame.
struct MassProperties {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the center of mass

  /// Sum of two bodies expressed in the same frame (parallel-axis theorem).
  MassProperties operator+(const MassProperties& other) const;
  /// Solid cylinder along local z centered at `center`.
  static MassProperties cylinder(double mass, double radius, double height, const Vec3& center);
};

/// Revolute joint of a serial chain. The joint frame is the parent body frame composed with
/// `offset`; the child body frame is the joint frame rotated about local `axis` (0 = x, 1 = y,
/// 2 = z) by the joint angle.
struct RevoluteJoint {
  Pose offset;
  int axis = 0;
  MassProperties body;
};

/// Serial chain of revolute joints on a translating base. Quantities are computed in world
/// coordinates with spatial vectors referenced to the world origin, [angular; linear].
class RevoluteChain {
 public:
  RevoluteChain() = default;
  explicit RevoluteChain(std::vector<RevoluteJoint> joints);

  Eigen::Index dof() const { return static_cast<Eigen::Index>(joints_.size()); }
  const std::vector<RevoluteJoint>& joints() const { return joints_; }

  /// Positions and velocities for the configuration; must precede the queries below.
  void update(const Pose& base, const Vec3& base_velocity, const Eigen::VectorXd& q,
              const Eigen::VectorXd& qd);

  const Pose& frame(Eigen::Index body) const { return frames_[static_cast<std::size_t>(body)]; }
  const Pose& base() const { return base_; }
  Vec3 axis(Eigen::Index j) const { return motion_[static_cast<std::size_t>(j)].head<3>(); }
  Vec3 origin(Eigen::Index j) const { return frames_[static_cast<std::size_t>(j)].position; }

  /// Joint-space inertia by composite rigid bodies.
  void mass_matrix(Eigen::MatrixXd& out) const;

  /// Inverse dynamics with zero joint acceleration: Coriolis, centrifugal and the effect of
  /// `base_acceleration_minus_gravity` (base linear acceleration minus the gravity vector).
  void bias_forces(const Vec3& base_acceleration_minus_gravity, Eigen::VectorXd& out) const;

  /// Columns 0..body of the world point Jacobian for a point fixed to `body`; the remaining
  /// columns are zero.
  void point_jacobian(Eigen::Index body, const Vec3& point, Matrix3Xd& out) const;

  /// Velocity of a world point moving with `body`, including the base velocity.
  Vec3 point_velocity(Eigen::Index body, const Vec3& point) const;

  double kinetic_energy() const;
  /// Sum of m g z over bodies for gravity magnitude g along -z.
  double gravity_potential(double gravity) const;

 private:
  std::vector<RevoluteJoint> joints_;
  std::vector<Pose> frames_;
  std::vector<Vector6d> motion_;    // joint motion subspaces
  std::vector<Vector6d> velocity_;  // body spatial velocities
  std::vector<Matrix6d> inertia_;   // body spatial inertias at the world origin
  std::vector<char> massive_;
  Pose base_;
  Vec3 base_velocity_ = Vec3::Zero();
};

Matrix6d spatial_inertia(double mass, const Vec3& com, const Mat3& inertia_about_com);
Vector6d motion_cross(const Vector6d& v, const Vector6d& m);
Vector6d force_cross(const Vector6d& v, const Vector6d& f);

}  // namespace softchain
