#pragma once

#include <softchain/env.hpp>
#include <softchain/model.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace softchain {

enum class BenchScenario { Contact, Free };
std::string scenario_name(BenchScenario s);
BenchScenario parse_scenario(const std::string& s);

struct BenchPoint {
  BenchScenario scenario = BenchScenario::Contact;
  double dt = 0.0;  // s
  int disk_count = 0;
  int steps = 0;
  double sim_time = 0.0;   // steps * dt
  double wall_time = 0.0;  // s
  double rtf = 0.0;
  int contacts = 0;        // robot-box contacts at the first timed step
  std::string error;       // integration failure, empty on success
};

struct BenchOptions {
  std::vector<double> timesteps{0.5e-3, 1e-3, 5e-3, 10e-3};
  std::vector<int> disk_counts{2, 5, 10, 32};
  int steps = 10000;
  int warmup = 100;
  std::vector<BenchScenario> scenarios{BenchScenario::Contact, BenchScenario::Free};
};

/// Scripted starting point for timing: the primitive run past its approach phase until the arms
/// touch the box (Contact), or the same arm command with the box out of reach (Free).
struct BenchStart {
  SimState state;
  CommandVector command;
  BoxSpec box;
};

BenchStart bench_start(const RobotModel& model, BenchScenario scenario);

/// Times one point on the calling thread. Failures are recorded in the result.
BenchPoint bench_point(const RobotModel& model, const BenchStart& start, double dt, int steps, int warmup);

/// Points ordered by scenario, then N, then dt. Runs strictly sequentially.
std::vector<BenchPoint> run_bench(const RobotModel& model, const BenchOptions& options);

void write_bench_csv(std::ostream& out, const std::vector<BenchPoint>& points);

}  // namespace softchain
