#include <softchain/elevator.hpp>

#include <algorithm>
#include <cmath>

namespace softchain {

namespace {

ElevatorSample advance(const ElevatorSample& s, double jerk, double t) {
  ElevatorSample out;
  out.position = s.position + s.velocity * t + 0.5 * s.acceleration * t * t + jerk * t * t * t / 6.0;
  out.velocity = s.velocity + s.acceleration * t + 0.5 * jerk * t * t;
  out.acceleration = s.acceleration + jerk * t;
  out.jerk = jerk;
  return out;
}

// Duration of a zero-to-zero acceleration profile changing velocity by |dv|.
double change_duration(double dv, double a_max, double j_max) {
  dv = std::abs(dv);
  if (dv >= a_max * a_max / j_max) return dv / a_max + a_max / j_max;
  return 2.0 * std::sqrt(dv / j_max);
}

void append_change(std::vector<ElevatorTrajectory::Segment>& out, double dv, double a_max,
                   double j_max) {
  const double mag = std::abs(dv);
  if (mag <= 0.0) return;
  const double sign = dv > 0 ? 1.0 : -1.0;
  if (mag >= a_max * a_max / j_max) {
    const double ramp = a_max / j_max;
    out.push_back({ramp, sign * j_max});
    const double hold = mag / a_max - ramp;
    if (hold > 0.0) out.push_back({hold, 0.0});
    out.push_back({ramp, -sign * j_max});
  } else {
    const double ramp = std::sqrt(mag / j_max);
    out.push_back({ramp, sign * j_max});
    out.push_back({ramp, -sign * j_max});
  }
}

// Distance covered changing velocity from va to vb (symmetric profile: mean velocity).
double change_distance(double va, double vb, double a_max, double j_max) {
  return 0.5 * (va + vb) * change_duration(vb - va, a_max, j_max);
}

// Move of signed distance `distance` starting at velocity v0 >= 0, ending at rest, without
// reversing (requires distance >= stopping distance). Jerks are multiplied by `sign`.
void plan_forward(std::vector<ElevatorTrajectory::Segment>& out, double v0, double distance,
                  const ElevatorSpec& spec, double sign) {
  const double a = spec.max_acceleration, j = spec.max_jerk, vmax = spec.max_velocity;
  auto covered = [&](double vp) {
    return change_distance(v0, vp, a, j) + change_distance(vp, 0.0, a, j);
  };
  double peak = vmax, cruise = 0.0;
  const double at_max = covered(std::max(vmax, v0));
  if (at_max <= distance) {
    peak = std::max(vmax, v0);
    cruise = (distance - at_max) / peak;
  } else {
    double lo = v0, hi = std::max(vmax, v0);
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      const double mid = 0.5 * (lo + hi);
      (covered(mid) < distance ? lo : hi) = mid;
    }
    peak = 0.5 * (lo + hi);
  }
  std::vector<ElevatorTrajectory::Segment> local;
  append_change(local, peak - v0, a, j);
  if (cruise > 0.0) local.push_back({cruise, 0.0});
  append_change(local, -peak, a, j);
  for (auto s : local) out.push_back({s.duration, sign * s.jerk});
}

}  // namespace

ElevatorTrajectory::ElevatorTrajectory(double position, double velocity,
                                       std::vector<Segment> segments)
    : segments_(std::move(segments)) {
  start_.position = position;
  start_.velocity = velocity;
  ElevatorSample s = start_;
  for (const auto& seg : segments_) {
    s = advance(s, seg.jerk, seg.duration);
    duration_ += seg.duration;
  }
  final_ = s;
  final_.acceleration = 0.0;
  final_.jerk = 0.0;
}

ElevatorTrajectory ElevatorTrajectory::hold(double position) { return {position, 0.0, {}}; }

ElevatorSample ElevatorTrajectory::sample(double t) const {
  if (t <= 0.0) return advance(start_, segments_.empty() ? 0.0 : segments_.front().jerk, 0.0);
  if (t >= duration_) {
    ElevatorSample s = final_;
    if (segments_.empty()) s.velocity = start_.velocity;
    s.position += s.velocity * (t - duration_);
    return s;
  }
  ElevatorSample s = start_;
  double elapsed = 0.0;
  for (const auto& seg : segments_) {
    if (t <= elapsed + seg.duration) return advance(s, seg.jerk, t - elapsed);
    s = advance(s, seg.jerk, seg.duration);
    elapsed += seg.duration;
  }
  return final_;
}

ElevatorTrajectory elevator_plan(double h0, double v0, double h_des, const ElevatorSpec& spec) {
  const double target = std::clamp(h_des, spec.min_height, spec.max_height);
  double distance = target - h0;
  double sign = 1.0;
  if (v0 < 0.0 || (v0 == 0.0 && distance < 0.0)) {
    sign = -1.0;
    distance = -distance;
    v0 = -v0;
  }
  if (v0 == 0.0 && distance == 0.0) return ElevatorTrajectory::hold(h0);

  std::vector<ElevatorTrajectory::Segment> segments;
  const double a = spec.max_acceleration, j = spec.max_jerk;
  const double stopping = change_distance(v0, 0.0, a, j);
  if (distance >= stopping) {
    plan_forward(segments, v0, distance, spec, sign);
  } else {
    // Stop, then come back from rest.
    append_change(segments, -v0, a, j);
    for (auto& s : segments) s.jerk *= sign;
    plan_forward(segments, 0.0, stopping - distance, spec, -sign);
  }
  return {h0, sign * v0, std::move(segments)};
}

}  // namespace softchain
