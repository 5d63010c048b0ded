#pragma once

#include <softchain/kinematics.hpp>

#include <optional>
#include <vector>

namespace softchain {

/// Identifies a body taking part in a contact.
struct BodyRef {
  enum class Kind { Floor, Torso, Box, LeftArm, RightArm };
  Kind kind = Kind::Floor;
  int index = -1;  // arm body index; -1 for bodies without one

  bool is_arm() const { return kind == Kind::LeftArm || kind == Kind::RightArm; }
  friend bool operator==(const BodyRef&, const BodyRef&) = default;
};

const char* body_name(BodyRef::Kind kind);

/// Penetration of body `a` into body `b`. `normal` points from b toward a; `force` is the force
/// applied to a (b receives the opposite).
struct ContactPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double depth = 0.0;
  BodyRef a;
  BodyRef b;
  Vec3 force = Vec3::Zero();
};

struct ContactGeometry {
  Vec3 point;
  Vec3 normal;
  double depth;
};

/// Floor is the z = 0 half-space.
std::optional<ContactGeometry> sphere_floor(const Vec3& center, double radius);

/// Sphere against an oriented box; the normal points from the box toward the sphere and the
/// point lies on the box surface.
std::optional<ContactGeometry> sphere_box(const Vec3& center, double radius, const Pose& box,
                                          const Vec3& half_extents);

/// Box corners below the floor.
void box_floor(const Pose& box, const Vec3& half_extents, std::vector<ContactGeometry>& out);

/// True when a sphere overlaps the box (no tolerance).
bool sphere_overlaps_box(const Vec3& center, double radius, const Pose& box,
                         const Vec3& half_extents);

struct PenaltyLaw {
  double stiffness = 2.0e4;
  double damping = 200.0;
  double friction = 0.5;
  double slip_velocity = 5e-3;
};

/// Normal magnitude k d + c d_dot clamped at zero.
double normal_force(const PenaltyLaw& law, double depth, double depth_rate);

/// Secant friction coefficient: the tangential force is -c v_t with c |v_t| equal to
/// mu f_n tanh(|v_t| / v_slip), so it saturates smoothly at mu f_n.
double friction_damping(const PenaltyLaw& law, double normal, double tangential_speed);

/// Force on body a for relative velocity v_a - v_b at the contact point.
Vec3 penalty_force(const PenaltyLaw& law, const ContactGeometry& geometry,
                   const Vec3& relative_velocity);

}  // namespace softchain
