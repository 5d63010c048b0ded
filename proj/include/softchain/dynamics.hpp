#pragma once

#include <softchain/arm.hpp>
#include <softchain/contact.hpp>
#include <softchain/elevator.hpp>
#include <softchain/model.hpp>

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace softchain {

using PressureVector = std::array<double, kChambersPerArm>;

struct ArmState {
  Eigen::VectorXd q;   // UJ angles, (x, y) per UJ from the shoulder outward
  Eigen::VectorXd qd;
  PressureVector pressure{};  // kPa, chamber order +x, -x, +y, -y per joint
};

/// Full generalized state of the scene. The elevator plan is part of the state so a copied
/// state continues identically.
struct SimState {
  ArmState left;
  ArmState right;
  double h = 0.0;
  double hd = 0.0;
  Pose box;
  Vec3 box_velocity = Vec3::Zero();          // world, m/s
  Vec3 box_angular_velocity = Vec3::Zero();  // world, rad/s
  double time = 0.0;

  ElevatorTrajectory plan = ElevatorTrajectory::hold(0.0);
  double plan_start = 0.0;
  double plan_target = 0.0;

  ArmState& arm(ArmSide side) { return side == ArmSide::Left ? left : right; }
  const ArmState& arm(ArmSide side) const { return side == ArmSide::Left ? left : right; }
  /// Throws std::invalid_argument on out-of-range pressures, non-finite values or a
  /// non-orthonormal box rotation.
  void validate() const;
  bool finite() const;
};

/// u = (h_des, p_left, p_right).
struct CommandVector {
  double h_des = 0.0;
  PressureVector left{};
  PressureVector right{};

  static constexpr int kSize = 1 + 2 * kChambersPerArm;
  static CommandVector uniform(double h_des, double pressure);
  void validate(const ElevatorSpec& elevator, const ActuatorSpec& actuator) const;
};

/// Raised when a step produces a non-finite state. Carries the state before the step.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, SimState last_valid)
      : std::runtime_error(what), last_valid_(std::move(last_valid)) {}
  const SimState& last_valid() const { return last_valid_; }

 private:
  SimState last_valid_;
};

struct EnergyBreakdown {
  double kinetic = 0.0;
  double spring = 0.0;
  double gravity = 0.0;
  double limits = 0.0;  // hard stop and rim penalty potentials
  double total() const { return kinetic + spring + gravity + limits; }
};

struct StepInput {
  Vec3 box_force = Vec3::Zero();  // external force at the box centroid, N
};

/// Scene simulator: two arms on an elevated torso, a free box, the floor. Holds scratch
/// buffers, so an instance must stay on one thread; copies are independent.
class Simulator {
 public:
  Simulator(RobotModel model, BoxSpec box);

  const RobotModel& model() const { return model_; }
  const BoxSpec& box() const { return box_; }
  const ArmLayout& layout(ArmSide side) const {
    return side == ArmSide::Left ? left_ : right_;
  }

  /// Home pose: straight arms, elevator at 0, all chambers at `pressure`, box resting on the
  /// floor at `box_pose` (z is ignored and set to half the box height).
  SimState home_state(const Pose& box_pose, double pressure = 150.0) const;

  /// Advances one step of length dt.
  SimState step(const SimState& state, const CommandVector& u, double dt,
                const StepInput& input = {});

  /// Contacts of the most recent step with the forces actually applied.
  const std::vector<ContactPoint>& contacts() const { return contacts_; }

  EnergyBreakdown energy(const SimState& state);

  Pose chest_pose(double h) const;
  /// Arm base (mount) in world coordinates.
  Pose arm_base(ArmSide side, double h) const;

  /// Recomputes the kinematics of one arm for the given state; the getters below refer to it.
  void update_arm(ArmSide side, const SimState& state);
  Pose joint_base(ArmSide side, int joint) const;
  Pose joint_tip(ArmSide side, int joint) const;
  /// Tip disk of every continuum joint relative to its base disk.
  std::array<Pose, kJointsPerArm> joint_relative_poses(ArmSide side, const SimState& state);

  void mass_matrix(ArmSide side, const Eigen::VectorXd& q, Eigen::MatrixXd& out);
  /// Generalized tendon forces on one arm at angles q.
  Eigen::VectorXd tendon_forces(ArmSide side, const Eigen::VectorXd& q,
                                const PressureVector& pressure) const;
  /// Generalized joint-limit forces (hard stops and rim contact, as enabled in the model).
  Eigen::VectorXd limit_forces(ArmSide side, const Eigen::VectorXd& q) const;
  double limit_potential(ArmSide side, const Eigen::VectorXd& q) const;

  /// True when any robot collision sphere overlaps the box at `box_pose` with elevator h and
  /// straight arms.
  bool robot_overlaps_box(const Pose& box_pose, double h = 0.0);
  /// True when the chest overlaps the box anywhere along the elevator travel.
  bool torso_sweep_overlaps_box(const Pose& box_pose);

  /// Number of distinct robot bodies (arm bodies, torso) touching the box in the last step.
  int robot_box_contacts() const;

 private:
  struct ChestSphere {
    Vec3 center;
    double radius;
    double weight;
  };

  RobotModel model_;
  BoxSpec box_;
  ArmLayout left_;
  ArmLayout right_;
  std::vector<ChestSphere> chest_spheres_;
  std::vector<ContactPoint> contacts_;
  // scratch
  Eigen::MatrixXd h_left_, h_right_;
  Eigen::VectorXd b_left_, b_right_;

  ArmLayout& layout_mut(ArmSide side) { return side == ArmSide::Left ? left_ : right_; }
};

/// Elevator update shared by the simulator and tests: replans when the target changes and
/// returns the prescribed (h, hd) at the end of the step.
void advance_elevator(SimState& state, double h_des, double dt, const ElevatorSpec& spec);

/// Trajectory log: one CSV row per call with time, elevator, box pose and twist, arm angles.
void write_state_header(std::ostream& out, const SimState& state);
void write_state_row(std::ostream& out, const SimState& state);

}  // namespace softchain
