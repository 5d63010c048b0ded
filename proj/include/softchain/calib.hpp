#pragma once

#include <softchain/kinematics.hpp>
#include <softchain/model.hpp>

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace softchain {

/// Fit N - 1 universal joints to a constant-curvature tip pose.
struct IKProblem {
  CCConfig target;
  int disk_count = 5;
  double lambda = -1.0;  // orientation weight in m/rad; <= 0 selects the joint length
  double alpha = 1e-4;
  std::optional<Eigen::VectorXd> initial;  // extra start besides the two default seeds
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
};

struct IKResult {
  UJConfig solution;
  double position_error = 0.0;     // m
  double orientation_error = 0.0;  // rad
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
};

struct IKTerms {
  double position = 0.0;
  double orientation = 0.0;
  double regularizer = 0.0;
  double total() const { return position + orientation + regularizer; }
};

IKTerms ik_objective(const Eigen::VectorXd& angles, const CCConfig& target, int disk_count,
                     double lambda, double alpha);

/// Every UJ takes an equal share of the bend: (q0, q1) / (N - 1).
Eigen::VectorXd uniform_split_guess(const CCConfig& target, int disk_count);

/// Levenberg-Marquardt from the uniform split, from zero and from `initial` if given; the
/// best objective wins.
IKResult solve_uj_from_cc(const IKProblem& problem);

/// Single Levenberg-Marquardt run from `start`.
IKResult solve_uj_from_cc(const IKProblem& problem, const Eigen::VectorXd& start);

struct SweepRow {
  int disk_count = 0;
  double q0 = 0.0;
  double q1 = 0.0;
  double position_error = 0.0;
  double orientation_error = 0.0;
  bool converged = false;
};

struct SweepOptions {
  std::vector<int> disk_counts{2, 4, 8, 16, 32, 64};
  int grid = 21;
  double range = 2.1;
  double length = 0.22;
  double lambda = -1.0;
  double alpha = 1e-4;
  int threads = 0;
};

/// Rows ordered by disk count, then q0, then q1.
std::vector<SweepRow> sweep_cc_vs_uj(const SweepOptions& options);

/// Box-plot statistics.
struct BoxStats {
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);

struct SweepSummary {
  int disk_count = 0;
  BoxStats position;
  BoxStats orientation;
  std::size_t nonconverged = 0;
};

std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows);
void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summary);

/// Replays one primitive episode through coarse models and compares every continuum joint's
/// tip pose (relative to its base) against the reference discretization.
struct NonCCOptions {
  std::vector<int> disk_counts{2, 4, 8, 16, 32};
  int reference_disks = 64;
  BoxSpec box;  // defaults to the nominal 5 kg box
  int policy_steps = 1200;
  int threads = 0;
};

struct NonCCSample {
  std::string model;  // "uj-<N>" or "cc"
  int step = 0;
  int arm = 0;        // 0 left, 1 right
  int joint = 0;
  bool contact = false;  // robot touching the box at this step in the reference run
  double position_error = 0.0;
  double orientation_error = 0.0;
};

struct NonCCModelSummary {
  std::string model;
  BoxStats position;
  BoxStats orientation;
  BoxStats contact_position;
  BoxStats contact_orientation;
  std::string failure;  // non-empty when the run diverged
};

struct NonCCResult {
  std::vector<NonCCSample> samples;
  std::vector<NonCCModelSummary> summary;
};

NonCCResult nonconstant_curvature_experiment(const RobotModel& model, const NonCCOptions& options);

void write_noncc_csv(std::ostream& out, const std::vector<NonCCSample>& samples);
void write_noncc_summary_csv(std::ostream& out, const std::vector<NonCCModelSummary>& summary);

}  // namespace softchain
