#pragma once

#include <softchain/dynamics.hpp>
#include <softchain/model.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace softchain {

inline constexpr int kObsDim = 93;
inline constexpr int kActDim = 13;

using ObsVector = std::array<double, kObsDim>;
using ActionVector = std::array<double, kActDim>;

/// Raw measurement vector and its normalized copy.
struct Observation {
  ObsVector raw{};
  ObsVector normalized{};
};

/// Affine map of every observation entry onto [-1, 1].
struct ObservationBounds {
  ObsVector low{};
  ObsVector high{};
  static const ObservationBounds& standard();
};

ObsVector normalize_observation(const ObsVector& raw);
/// Inverse of the affine part (clamping is not undone).
ObsVector unnormalize_observation(const ObsVector& normalized);

/// Name of every observation entry, e.g. "box_size.x" or "p_left_cmd.7".
const std::array<std::string, kObsDim>& observation_names();

enum class Outcome { None, Lift, Tip, Slip, Error };
std::string outcome_name(Outcome o);
Outcome parse_outcome(const std::string& name);

enum class RewardScheme { Guided, Shaped };
std::string reward_scheme_name(RewardScheme s);
RewardScheme parse_reward_scheme(const std::string& name);

/// Square-wave push on the box centroid: on for `on` seconds, off for `off`, from `onset`.
struct PerturbationSchedule {
  bool enabled = false;
  double onset = 8.0;
  double on = 1.0;
  double off = 1.0;
  double magnitude = 100.0;  // N along -z

  bool active(double t) const;
  Vec3 force(double t) const;
};

struct EpisodeConfig {
  BoxSpec box;
  bool randomize_pose = true;
  double max_offset_x = 0.1;
  double max_yaw = 1.0471975511965976;  // rad
  /// Used instead of the random draw when randomize_pose is false.
  double offset_x = 0.0;
  double yaw = 0.0;
  int max_steps = 1200;
  double rate = 20.0;
  int substeps = 10;
  double settle_time = 0.5;
  int max_placement_tries = 50;
  PerturbationSchedule perturbation;

  /// Throws std::invalid_argument.
  void validate(double timestep) const;
};

/// Latin hypercube over mass [0.5, 10] kg, width and depth [0.2, 0.6] m, height [0.5, 1.25] m.
std::vector<BoxSpec> sample_boxes(int count, std::uint64_t seed);

/// First-order filter on the normalized action followed by the affine map to commands.
class ActionMapper {
 public:
  explicit ActionMapper(double alpha = 0.3, double h_min = -1.5, double h_max = 0.0);

  /// Filter state of the home command: elevator at 0, no differential pressure.
  void reset();
  CommandVector map(const ActionVector& normalized);
  const ActionVector& filtered() const { return filtered_; }

  /// Unfiltered affine map.
  CommandVector to_command(const ActionVector& normalized) const;
  ActionVector normalize(double h_des, const std::array<double, 6>& dp_left,
                         const std::array<double, 6>& dp_right) const;

  static constexpr double kCenterPressure = 150.0;
  static constexpr double kMaxDifferential = 150.0;

 private:
  double alpha_;
  double h_min_;
  double h_max_;
  ActionVector filtered_{};
};

enum class PrimitivePhase { Approach, Grasp, Lift };
std::string phase_name(PrimitivePhase p);

/// Waypoint motion primitive. Commands persist between calls.
struct PrimitiveState {
  PrimitivePhase phase = PrimitivePhase::Approach;
  int n = 0;
  double h_des = 0.0;
  std::array<double, 6> dp_left{};
  std::array<double, 6> dp_right{};
};

/// Advances the primitive with the measured elevator height and returns its physical command
/// (h_des, dp_left, dp_right) stored in the updated state.
PrimitiveState primitive_step(PrimitiveState ps, double h, const PrimitiveSpec& spec);

double guided_reward(const ActionVector& action, const ActionVector& reference, Outcome event);
/// Chest-to-box offset p_chest - p_box, contact count and box height gain since reset.
double shaped_reward(const Vec3& chest_to_box, int contacts, double height_gain, Outcome event);
double task_reward(Outcome event);

struct StepInfo {
  ActionVector reference{};  // normalized primitive action
  PrimitivePhase phase = PrimitivePhase::Approach;
  int contacts = 0;
  bool perturbed = false;
  Outcome outcome = Outcome::None;
  std::string error;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

/// Single grasping environment. One instance per thread.
class Environment {
 public:
  explicit Environment(RobotModel model, RewardScheme scheme = RewardScheme::Guided);

  Observation reset(const EpisodeConfig& cfg, std::uint64_t seed);
  StepResult step(const ActionVector& action);

  const RobotModel& model() const { return model_; }
  RewardScheme scheme() const { return scheme_; }
  const EpisodeConfig& config() const { return cfg_; }
  const SimState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  /// Reference action for the coming step.
  const ActionVector& reference() const { return reference_; }
  int step_count() const { return steps_; }
  bool done() const { return done_; }
  Outcome outcome() const { return outcome_; }
  double initial_box_height() const { return z0_; }
  double box_tilt() const;
  Vec3 chest_to_box() const;
  /// Placement actually used by the last reset.
  double offset_x() const { return offset_x_; }
  double yaw() const { return yaw_; }
  Simulator& simulator() { return *sim_; }

 private:
  Observation measure();
  void refresh_reference();

  RobotModel model_;
  RewardScheme scheme_;
  EpisodeConfig cfg_;
  std::optional<Simulator> sim_;
  SimState state_;
  SimState previous_;
  ActionMapper mapper_;
  CommandVector command_;
  PrimitiveState primitive_;
  ActionVector reference_{};
  Observation obs_;
  int steps_ = 0;
  bool reset_ = false;
  bool done_ = false;
  Outcome outcome_ = Outcome::None;
  double z0_ = 0.0;
  double offset_x_ = 0.0;
  double yaw_ = 0.0;
  double substep_dt_ = 0.005;
};

/// Everything the analytics need from one finished episode.
struct EpisodeRecord {
  int index = 0;
  BoxSpec box;
  double offset_x = 0.0;
  double yaw = 0.0;
  bool perturbed = false;
  Outcome outcome = Outcome::None;
  int length = 0;
  double total_reward = 0.0;
  std::vector<ActionVector> actions;
};

/// Maps the current normalized observation (and the primitive reference) to an action.
using Policy = std::function<ActionVector(const Observation&, const ActionVector& reference)>;

/// Replays the primitive reference: the open-loop baseline.
Policy primitive_policy();

struct EpisodeLog;

/// Runs one episode to termination. When `log` is given, every step is appended to it.
EpisodeRecord run_episode(Environment& env, const EpisodeConfig& cfg, std::uint64_t seed,
                          const Policy& policy, EpisodeLog* log = nullptr);

/// Per-step record: normalized observation, action, reference, reward, contacts, events.
struct EpisodeLog {
  struct Row {
    int step = 0;
    double time = 0.0;
    ObsVector observation{};
    ActionVector action{};
    ActionVector reference{};
    double reward = 0.0;
    int contacts = 0;
    bool perturbed = false;
    PrimitivePhase phase = PrimitivePhase::Approach;
    Outcome outcome = Outcome::None;
  };
  std::vector<Row> rows;

  void write_csv(std::ostream& out) const;
  static EpisodeLog read_csv(std::istream& in);
};

/// Batch evaluation over Latin-hypercube boxes. Episode i uses box i of
/// sample_boxes(boxes, seed) and placement seed `seed + i`, so runs that differ only in
/// perturbation or policy see identical boxes and placements.
struct EvaluationOptions {
  int boxes = 100;
  std::uint64_t seed = 1;
  bool perturb = false;
  PerturbationSchedule perturbation;  // used when perturb is set
  RewardScheme scheme = RewardScheme::Guided;
  int max_steps = 1200;
  int threads = 0;
};

/// `policy_for(i)` makes a fresh policy for episode i; empty selects the primitive. A failed
/// placement or reset yields a record with outcome Error and length 0.
std::vector<EpisodeRecord> evaluate(const RobotModel& model, const EvaluationOptions& options,
                                    const std::function<Policy(int)>& policy_for = {});

/// k environments stepped in parallel; results keep environment order.
class VecEnv {
 public:
  VecEnv(const RobotModel& model, int count, RewardScheme scheme = RewardScheme::Guided,
         int threads = 0);

  int size() const { return static_cast<int>(envs_.size()); }
  Environment& operator[](int i) { return envs_[static_cast<std::size_t>(i)]; }

  /// Resets environment i with configs[i] and seed base_seed + i.
  std::vector<Observation> reset(const std::vector<EpisodeConfig>& configs, std::uint64_t base_seed);
  std::vector<StepResult> step(const std::vector<ActionVector>& actions);

 private:
  std::vector<Environment> envs_;
  int threads_;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware concurrency).
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace softchain
