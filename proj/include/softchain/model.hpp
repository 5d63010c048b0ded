#pragma once

#include <softchain/kinematics.hpp>

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>

namespace softchain {

/// Raised when a model file or programmatic model violates its schema or invariants. The
/// message names the offending field.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One soft continuum joint approximated by `disk_count` disks and disk_count - 1 universal
/// joints. Stiffness and damping are the whole-joint values per bending axis.
struct ContinuumJointSpec {
  int disk_count = 5;
  double length = 0.2;          // m
  double mass = 0.4;            // kg
  double stiffness = 10.0;      // N m / rad
  double damping = 0.5;         // N m s / rad
  double disk_radius = 0.08;    // m
  double tendon_radius = 0.056; // m
  double max_bend = 2.1;        // rad
  double disk_thickness = 0.02; // m, face clearance that sets the rim-contact bend

  int uj_count() const { return disk_count - 1; }
  /// Half of the distance between adjacent disks.
  double half_segment() const { return length / (2.0 * uj_count()); }
};

struct LinkSpec {
  double length = 0.25;
  double mass = 0.5;
  double radius = 0.07;
};

enum class ArmSide { Left, Right };

/// [joint, link, joint, link, joint] hung from a shoulder on the chest.
struct ArmSpec {
  ArmSide side = ArmSide::Left;
  std::array<ContinuumJointSpec, 3> joints{};
  std::array<LinkSpec, 2> links{};
  Vec3 shoulder = Vec3::Zero();  // relative to the chest center
  double pin_angle = 0.5235987755982988;  // rad, forward tilt of the hanging arm

  /// Arm base frame in chest coordinates. Local z runs along the arm, local x points away
  /// from the body midline so that pressurizing the +x chambers curls the arm inward.
  Pose mount() const;
  int dof_count() const;
};

struct ElevatorSpec {
  double min_height = -1.5;
  double max_height = 0.0;
  double max_velocity = 0.25;
  double max_acceleration = 0.5;
  double max_jerk = 2.0;
};

struct ActuatorSpec {
  double min_pressure = 0.0;    // kPa
  double max_pressure = 300.0;  // kPa
  double effective_area = 3.6e-3;  // m^2
  double time_constant = 0.1;      // s
};

struct ContactSpec {
  double stiffness = 2.0e4;   // N/m
  double damping = 200.0;     // N s/m
  double mu_box_arm = 0.8;
  double mu_box_ground = 0.5;
  double mu_arm_ground = 0.5;
  double slip_velocity = 5e-3;  // m/s, friction regularization
};

struct JointLimitSpec {
  bool hard = true;        // per-UJ angular stop
  bool rim_contact = true; // adjacent disk rims
  double stiffness_gain = 20.0;  // limit stiffness as a multiple of k_disk
};

/// Waypoint-based motion primitive parameters. Waypoints are differential pressures in kPa,
/// ordered per arm as (joint0 x-pair, joint0 y-pair, joint1 x, joint1 y, joint2 x, joint2 y).
struct PrimitiveSpec {
  std::array<double, 6> approach_left{};
  std::array<double, 6> approach_right{};
  std::array<double, 6> grasp_left{};
  std::array<double, 6> grasp_right{};
  double approach_height = -0.9;
  double height_tolerance = 0.02;
  int ramp_steps = 50;
};

struct SceneSpec {
  double chest_height = 1.45;  // chest center z at elevator height 0
  Vec3 chest_half_extents{0.2, 0.4, 0.3};
  double box_standoff = 0.25;  // x of the box face nearest the robot, before the placement offset
  double gravity = 9.81;
};

struct RobotModel {
  ArmSpec left;
  ArmSpec right;
  SceneSpec scene;
  ElevatorSpec elevator;
  ActuatorSpec actuator;
  ContactSpec contact;
  JointLimitSpec limits;
  PrimitiveSpec primitive;
  double action_filter = 0.3;
  double timestep = 0.005;

  const ArmSpec& arm(ArmSide side) const { return side == ArmSide::Left ? left : right; }

  /// Throws ModelError naming the first violated field.
  void validate() const;

  /// Copy with every continuum joint rediscretized to `disk_count` disks. Disk thickness is
  /// rescaled so rim contact still engages at the same total bend.
  RobotModel with_disk_count(int disk_count) const;
};

/// Manipulated box: full edge lengths (width along x, depth along y, height along z).
struct BoxSpec {
  Vec3 size{0.4, 0.4, 0.875};
  double mass = 5.0;
  double friction = 0.8;

  Vec3 half_extents() const { return 0.5 * size; }
  /// Uniform-density principal inertia.
  Mat3 inertia() const;
  void validate() const;
};

/// Per-disk spring and damper for N - 1 equal elements in series.
std::pair<double, double> distribute_stiffness(double stiffness, double damping, int disk_count);

double per_uj_limit(double max_bend, int disk_count);

/// Bend at which adjacent disk rims touch in a planar bend: 2 atan(t / 2R).
double rim_contact_angle(double disk_thickness, double disk_radius);

/// Planar static bend of a joint (no gravity, no limits) under the maximum antagonistic
/// pressure differential.
double steady_state_bend(const ContinuumJointSpec& joint, const ActuatorSpec& actuator);

RobotModel default_model();

RobotModel parse_model(const std::string& text);
std::string serialize_model(const RobotModel& model);
RobotModel load_model(const std::filesystem::path& path);
void save_model(const RobotModel& model, const std::filesystem::path& path);

inline constexpr const char* kModelHeader = "softchain-model 1";

}  // namespace softchain
