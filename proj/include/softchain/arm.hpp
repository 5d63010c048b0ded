#pragma once

#include <softchain/actuation.hpp>
#include <softchain/articulated.hpp>
#include <softchain/model.hpp>

#include <array>
#include <vector>

namespace softchain {

/// Per universal joint constants. Dofs 2i (about x) and 2i + 1 (about y) belong to UJ i.
struct UJInfo {
  int joint = 0;
  double half_length = 0.0;
  double tendon_radius = 0.0;
  double disk_radius = 0.0;
  double clearance = 0.0;  // disk thickness
  double stiffness = 0.0;  // k_disk
  double damping = 0.0;    // c_disk
  double limit = 0.0;      // per-axis angular stop
  double limit_stiffness = 0.0;
  double rim_stiffness = 0.0;  // N/m on rim penetration
};

/// Collision sphere fixed to an arm body; body -1 is the arm base (moves with the torso).
/// `weight` scales the contact law so overlapping spheres along a joint add up to roughly one
/// sphere's stiffness whatever the disk count.
struct CollisionSphere {
  int body = -1;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double weight = 1.0;
};

/// A point rigidly attached to an arm body.
struct BodyPoint {
  int body = -1;
  Pose offset;
};

/// Revolute-chain realization of one arm. Every universal joint becomes an x revolute
/// (massless) followed by a y revolute carrying the next disk. The last disk of the first two
/// joints also carries the following link and the next joint's base disk.
struct ArmLayout {
  RevoluteChain chain;
  Pose mount;  // arm base in chest coordinates
  std::vector<UJInfo> ujs;
  std::vector<CollisionSphere> spheres;
  std::array<int, kJointsPerArm> first_uj{};
  std::array<BodyPoint, kJointsPerArm> joint_base{};
  std::array<BodyPoint, kJointsPerArm> joint_tip{};
  std::array<double, kJointsPerArm> joint_length{};
  double total_mass = 0.0;

  int dof() const { return static_cast<int>(chain.dof()); }
  int uj_count() const { return static_cast<int>(ujs.size()); }

  /// World pose of an attached point; requires chain.update().
  Pose point_pose(const BodyPoint& p) const;
};

ArmLayout build_arm(const ArmSpec& spec, const JointLimitSpec& limits);

}  // namespace softchain
