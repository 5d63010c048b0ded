#include <softchain/arm.hpp>

#include <algorithm>
#include <cmath>

namespace softchain {

namespace {

Pose tz(double z) {
  Pose p;
  p.position.z() = z;
  return p;
}

MassProperties disk(const ContinuumJointSpec& j, double z) {
  return MassProperties::cylinder(j.mass / j.disk_count, j.disk_radius, j.disk_thickness,
                                  Vec3(0, 0, z));
}

void add_spheres_along(std::vector<CollisionSphere>& out, int body, double z0, double z1,
                       double radius) {
  const double span = z1 - z0;
  const int count = std::max(1, static_cast<int>(std::ceil(span / radius)));
  const double spacing = span / count;
  for (int k = 0; k < count; ++k)
    out.push_back({body, Vec3(0, 0, z0 + spacing * (k + 0.5)), radius,
                   std::min(1.0, spacing / radius)});
}

}  // namespace

Pose ArmLayout::point_pose(const BodyPoint& p) const {
  const Pose& frame = p.body < 0 ? chain.base() : chain.frame(p.body);
  return frame * p.offset;
}

ArmLayout build_arm(const ArmSpec& spec, const JointLimitSpec& limits) {
  ArmLayout out;
  out.mount = spec.mount();
  std::vector<RevoluteJoint> joints;
  double next_offset = 0.0;  // distance from the previous body frame to the next UJ center
  int last_body = -1;

  for (int j = 0; j < kJointsPerArm; ++j) {
    const ContinuumJointSpec& js = spec.joints[static_cast<std::size_t>(j)];
    const double l = js.half_segment();
    const auto [k_disk, c_disk] = distribute_stiffness(js.stiffness, js.damping, js.disk_count);
    const double limit = per_uj_limit(js.max_bend, js.disk_count);
    const double k_limit = limits.stiffness_gain * k_disk;
    const double w = std::min(1.0, 2.0 * l / js.disk_radius);

    if (j == 0) {
      out.spheres.push_back({-1, Vec3::Zero(), js.disk_radius, w});
      out.joint_base[0] = {-1, Pose::Identity()};
      next_offset = l;
    } else {
      next_offset += l;
    }
    out.first_uj[static_cast<std::size_t>(j)] = static_cast<int>(out.ujs.size());
    out.joint_length[static_cast<std::size_t>(j)] = js.length;

    for (int u = 0; u < js.uj_count(); ++u) {
      UJInfo info;
      info.joint = j;
      info.half_length = l;
      info.tendon_radius = js.tendon_radius;
      info.disk_radius = js.disk_radius;
      info.clearance = js.disk_thickness;
      info.stiffness = k_disk;
      info.damping = c_disk;
      info.limit = limit;
      info.limit_stiffness = k_limit;
      info.rim_stiffness = k_limit / (js.disk_radius * js.disk_radius);
      out.ujs.push_back(info);

      joints.push_back({tz(next_offset), 0, MassProperties{}});
      MassProperties body = disk(js, l);
      out.total_mass += body.mass;
      const bool joint_end = u + 1 == js.uj_count();
      if (joint_end && j + 1 < kJointsPerArm) {
        const LinkSpec& link = spec.links[static_cast<std::size_t>(j)];
        const ContinuumJointSpec& next = spec.joints[static_cast<std::size_t>(j + 1)];
        body = body + MassProperties::cylinder(link.mass, link.radius, link.length,
                                               Vec3(0, 0, l + 0.5 * link.length));
        body = body + disk(next, l + link.length);
        out.total_mass += link.mass + next.mass / next.disk_count;
      }
      joints.push_back({Pose::Identity(), 1, body});
      last_body = static_cast<int>(joints.size()) - 1;
      out.spheres.push_back({last_body, Vec3(0, 0, l), js.disk_radius, w});
      next_offset = 2.0 * l;
    }
    out.joint_tip[static_cast<std::size_t>(j)] = {last_body, tz(l)};

    if (j + 1 < kJointsPerArm) {
      const LinkSpec& link = spec.links[static_cast<std::size_t>(j)];
      const ContinuumJointSpec& next = spec.joints[static_cast<std::size_t>(j + 1)];
      add_spheres_along(out.spheres, last_body, l, l + link.length, link.radius);
      const double wn = std::min(1.0, 2.0 * next.half_segment() / next.disk_radius);
      out.spheres.push_back({last_body, Vec3(0, 0, l + link.length), next.disk_radius, wn});
      out.joint_base[static_cast<std::size_t>(j + 1)] = {last_body, tz(l + link.length)};
      next_offset = l + link.length;
    }
  }
  out.chain = RevoluteChain(std::move(joints));
  return out;
}

}  // namespace softchain
