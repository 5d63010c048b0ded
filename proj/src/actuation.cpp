#include <softchain/actuation.hpp>

#include <algorithm>

namespace softchain {

TendonSegment tendon_segment(double phi1, double phi2, double half_length, double radius,
                             double angle) {
  const double c1 = std::cos(phi1), s1 = std::sin(phi1);
  const double c2 = std::cos(phi2), s2 = std::sin(phi2);
  const Vec3 p(radius * std::cos(angle), radius * std::sin(angle), half_length);
  const Vec3 a(p.x(), p.y(), -half_length);

  Mat3 rx, ry, drx, dry;
  rx << 1, 0, 0, 0, c1, -s1, 0, s1, c1;
  ry << c2, 0, s2, 0, 1, 0, -s2, 0, c2;
  drx << 0, 0, 0, 0, -s1, -c1, 0, c1, -s1;
  dry << -s2, 0, c2, 0, 0, 0, -c2, 0, -s2;

  const Vec3 b = rx * (ry * p);
  const Vec3 d = b - a;
  TendonSegment seg;
  seg.length = d.norm();
  if (seg.length < 1e-12) return seg;
  const Vec3 u = d / seg.length;
  seg.d_phi1 = u.dot(drx * (ry * p));
  seg.d_phi2 = u.dot(rx * (dry * p));
  return seg;
}

double pressure_step(double pressure, double command, double dt, double time_constant,
                     double min_pressure, double max_pressure) {
  const double blend = 1.0 - std::exp(-dt / time_constant);
  return std::clamp(pressure + (command - pressure) * blend, min_pressure, max_pressure);
}

Eigen::Vector2d uj_tendon_forces(double phi1, double phi2, double half_length, double radius,
                                 const std::array<double, 4>& pressures_kpa,
                                 double effective_area) {
  Eigen::Vector2d tau = Eigen::Vector2d::Zero();
  for (int c = 0; c < kChambersPerJoint; ++c) {
    if (pressures_kpa[c] == 0.0) continue;
    const TendonSegment seg = tendon_segment(phi1, phi2, half_length, radius, kChamberAngles[c]);
    const double force = effective_area * pressures_kpa[c] * kPascalPerKilopascal;
    tau += force * Eigen::Vector2d(seg.d_phi1, seg.d_phi2);
  }
  return tau;
}

RimGap rim_penetration(double phi1, double phi2, double disk_radius, double clearance) {
  // Third row of Rx(phi1) Ry(phi2): (-c1 s2, s1, c1 c2). The deepest rim point of the upper
  // disk's lower face sits at depth R sqrt(r20^2 + r21^2) - (t/2)(1 + r22).
  const double c1 = std::cos(phi1), s1 = std::sin(phi1);
  const double c2 = std::cos(phi2), s2 = std::sin(phi2);
  const double lateral = std::sqrt(c1 * c1 * s2 * s2 + s1 * s1);
  const double half = 0.5 * clearance;
  RimGap gap;
  gap.depth = disk_radius * lateral - half * (1.0 + c1 * c2);
  if (lateral > 1e-12) {
    gap.gradient.x() = disk_radius * s1 * c1 * c2 * c2 / lateral + half * s1 * c2;
    gap.gradient.y() = disk_radius * c1 * c1 * s2 * c2 / lateral + half * c1 * s2;
  }
  return gap;
}

}  // namespace softchain
