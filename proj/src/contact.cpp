#include <softchain/contact.hpp>

#include <algorithm>
#include <cmath>

namespace softchain {

const char* body_name(BodyRef::Kind kind) {
  switch (kind) {
    case BodyRef::Kind::Floor: return "floor";
    case BodyRef::Kind::Torso: return "torso";
    case BodyRef::Kind::Box: return "box";
    case BodyRef::Kind::LeftArm: return "left_arm";
    case BodyRef::Kind::RightArm: return "right_arm";
  }
  return "unknown";
}

std::optional<ContactGeometry> sphere_floor(const Vec3& center, double radius) {
  const double depth = radius - center.z();
  if (depth <= 0.0) return std::nullopt;
  return ContactGeometry{Vec3(center.x(), center.y(), 0.0), Vec3::UnitZ(), depth};
}

std::optional<ContactGeometry> sphere_box(const Vec3& center, double radius, const Pose& box,
                                          const Vec3& half_extents) {
  const Vec3 local = box.rotation.transpose() * (center - box.position);
  const Vec3 clamped = local.cwiseMax(-half_extents).cwiseMin(half_extents);
  const Vec3 diff = local - clamped;
  const double dist2 = diff.squaredNorm();
  if (dist2 > 0.0) {
    if (dist2 >= radius * radius) return std::nullopt;
    const double dist = std::sqrt(dist2);
    return ContactGeometry{box * clamped, box.rotation * (diff / dist), radius - dist};
  }
  // Center inside: push out through the nearest face.
  const Vec3 gap = half_extents - local.cwiseAbs();
  int axis = 0;
  gap.minCoeff(&axis);
  Vec3 n = Vec3::Zero();
  n[axis] = local[axis] >= 0.0 ? 1.0 : -1.0;
  Vec3 surface = local;
  surface[axis] = n[axis] * half_extents[axis];
  return ContactGeometry{box * surface, box.rotation * n, radius + gap[axis]};
}

void box_floor(const Pose& box, const Vec3& half_extents, std::vector<ContactGeometry>& out) {
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1 ? 1 : -1) * half_extents.x(), (i & 2 ? 1 : -1) * half_extents.y(),
                      (i & 4 ? 1 : -1) * half_extents.z());
    const Vec3 w = box * corner;
    if (w.z() < 0.0) out.push_back({Vec3(w.x(), w.y(), w.z()), Vec3::UnitZ(), -w.z()});
  }
}

bool sphere_overlaps_box(const Vec3& center, double radius, const Pose& box,
                         const Vec3& half_extents) {
  return sphere_box(center, radius, box, half_extents).has_value();
}

double normal_force(const PenaltyLaw& law, double depth, double depth_rate) {
  return std::max(0.0, law.stiffness * depth + law.damping * depth_rate);
}

double friction_damping(const PenaltyLaw& law, double normal, double tangential_speed) {
  if (normal <= 0.0 || law.friction <= 0.0) return 0.0;
  const double x = tangential_speed / law.slip_velocity;
  // tanh(x)/x -> 1 near zero
  const double ratio = x < 1e-6 ? 1.0 - x * x / 3.0 : std::tanh(x) / x;
  return law.friction * normal * ratio / law.slip_velocity;
}

Vec3 penalty_force(const PenaltyLaw& law, const ContactGeometry& g, const Vec3& relative_velocity) {
  const double rate = -g.normal.dot(relative_velocity);
  const double fn = normal_force(law, g.depth, rate);
  const Vec3 vt = relative_velocity - g.normal.dot(relative_velocity) * g.normal;
  const double ct = friction_damping(law, fn, vt.norm());
  return fn * g.normal - ct * vt;
}

}  // namespace softchain
