#pragma once

#include <softchain/model.hpp>

#include <vector>

namespace softchain {

/// Kinematic sample of the elevator.
struct ElevatorSample {
  double position = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double jerk = 0.0;
};

/// Piecewise constant-jerk trajectory starting at t = 0. Past the last segment it holds the
/// final position at rest.
class ElevatorTrajectory {
 public:
  struct Segment {
    double duration;
    double jerk;
  };

  ElevatorTrajectory() = default;
  ElevatorTrajectory(double position, double velocity, std::vector<Segment> segments);

  /// Stationary trajectory.
  static ElevatorTrajectory hold(double position);

  ElevatorSample sample(double t) const;
  double duration() const { return duration_; }
  double final_position() const { return final_.position; }
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  ElevatorSample start_;
  ElevatorSample final_;
  std::vector<Segment> segments_;
  double duration_ = 0.0;
};

/// Jerk-limited (S-curve) move from (h0, v0) with zero initial acceleration to h_des at rest.
/// Same-direction moves are one accelerate/cruise/decelerate profile of at most seven
/// constant-jerk segments; a move that must reverse stops first and then runs a rest-to-rest
/// profile. The target is clamped to the elevator range.
ElevatorTrajectory elevator_plan(double h0, double v0, double h_des, const ElevatorSpec& spec);

}  // namespace softchain
