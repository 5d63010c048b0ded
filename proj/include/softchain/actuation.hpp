#pragma once

#include <softchain/kinematics.hpp>

#include <array>
#include <cmath>

namespace softchain {

/// Chamber layout on every disk: +x, -x, +y, -y at the tendon radius. Pressure vectors are
/// ordered joint by joint with this chamber order, so antagonistic pairs are adjacent.
inline constexpr std::array<double, 4> kChamberAngles{0.0, M_PI, 0.5 * M_PI, 1.5 * M_PI};
inline constexpr int kChambersPerJoint = 4;
inline constexpr int kJointsPerArm = 3;
inline constexpr int kChambersPerArm = kChambersPerJoint * kJointsPerArm;

/// kPa to Pa.
inline constexpr double kPascalPerKilopascal = 1000.0;

/// Length of one tendon segment between adjacent disks and its gradient with respect to the
/// two angles of the universal joint between them.
struct TendonSegment {
  double length = 0.0;
  double d_phi1 = 0.0;
  double d_phi2 = 0.0;
};

/// Segment from the attachment point on the lower disk, (r cos a, r sin a, -l) in the UJ
/// center frame, to the matching point on the upper disk, R(phi1, phi2) (r cos a, r sin a, l).
TendonSegment tendon_segment(double phi1, double phi2, double half_length, double radius,
                             double angle);

/// First-order pressure lag toward the command, clamped to the actuator range.
double pressure_step(double pressure, double command, double dt, double time_constant,
                     double min_pressure = 0.0, double max_pressure = 300.0);

/// Generalized forces on one universal joint from the four chambers of its continuum joint.
/// Each chamber pushes its attachment points apart with effective_area * pressure.
Eigen::Vector2d uj_tendon_forces(double phi1, double phi2, double half_length, double radius,
                                 const std::array<double, 4>& pressures_kpa, double effective_area);

/// Signed rim interpenetration of adjacent disks; positive when the lower face of the upper
/// disk crosses the upper face of the lower disk. Gradient in the two UJ angles.
struct RimGap {
  double depth = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
};

RimGap rim_penetration(double phi1, double phi2, double disk_radius, double clearance);

}  // namespace softchain
