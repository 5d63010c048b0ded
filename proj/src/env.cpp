#include <softchain/env.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace softchain {

namespace {

constexpr double kTipAngle = 80.0 * M_PI / 180.0;
constexpr double kLiftHeight = 0.5;
constexpr double kGraspGate = 0.35;

struct Block {
  const char* name;
  int dim;
  double low;
  double high;
};

// Scalar bounds; the vector-valued box size and box position are patched below.
constexpr Block kBlocks[] = {
    {"box_size", 3, 0.0, 0.0},      {"box_pos", 3, 0.0, 0.0},     {"box_quat", 4, -1.0, 1.0},
    {"box_vel", 3, -2.0, 2.0},      {"box_omega", 3, -M_PI, M_PI}, {"chest_to_box", 3, -1.25, 1.25},
    {"h", 1, -1.5, 0.0},            {"hd", 1, -1.0, 1.0},         {"q_left", 6, -M_PI, M_PI},
    {"q_right", 6, -M_PI, M_PI},    {"qd_left", 6, -2 * M_PI, 2 * M_PI},
    {"qd_right", 6, -2 * M_PI, 2 * M_PI},                         {"p_left", 12, 0.0, 300.0},
    {"p_right", 12, 0.0, 300.0},    {"p_left_cmd", 12, 0.0, 300.0}, {"p_right_cmd", 12, 0.0, 300.0},
};

ObservationBounds make_bounds() {
  ObservationBounds b;
  std::size_t i = 0;
  for (const Block& blk : kBlocks)
    for (int k = 0; k < blk.dim; ++k, ++i) {
      b.low[i] = blk.low;
      b.high[i] = blk.high;
    }
  const double size_lo[3] = {0.2, 0.2, 0.5}, size_hi[3] = {0.6, 0.6, 1.25};
  const double pos_lo[3] = {-3.0, -3.0, 0.0}, pos_hi[3] = {3.0, 3.0, 2.0};
  for (int k = 0; k < 3; ++k) {
    b.low[k] = size_lo[k];
    b.high[k] = size_hi[k];
    b.low[3 + k] = pos_lo[k];
    b.high[3 + k] = pos_hi[k];
  }
  return b;
}

std::array<std::string, kObsDim> make_names() {
  std::array<std::string, kObsDim> names;
  const char* xyz[] = {"x", "y", "z"};
  const char* wxyz[] = {"w", "x", "y", "z"};
  std::size_t i = 0;
  for (const Block& blk : kBlocks)
    for (int k = 0; k < blk.dim; ++k, ++i) {
      std::string n = blk.name;
      if (blk.dim == 1) {
      } else if (blk.dim == 3) {
        n += std::string(".") + xyz[k];
      } else if (blk.dim == 4) {
        n += std::string(".") + wxyz[k];
      } else {
        n += "." + std::to_string(k);
      }
      names[i] = n;
    }
  return names;
}

double tilt_of(const Pose& box) { return std::acos(std::clamp(box.rotation(2, 2), -1.0, 1.0)); }

}  // namespace

// ---------------------------------------------------------------------------------------------

const ObservationBounds& ObservationBounds::standard() {
  static const ObservationBounds b = make_bounds();
  return b;
}

const std::array<std::string, kObsDim>& observation_names() {
  static const auto names = make_names();
  return names;
}

ObsVector normalize_observation(const ObsVector& raw) {
  const auto& b = ObservationBounds::standard();
  ObsVector out;
  for (int i = 0; i < kObsDim; ++i)
    out[i] = std::clamp(2.0 * (raw[i] - b.low[i]) / (b.high[i] - b.low[i]) - 1.0, -1.0, 1.0);
  return out;
}

ObsVector unnormalize_observation(const ObsVector& normalized) {
  const auto& b = ObservationBounds::standard();
  ObsVector out;
  for (int i = 0; i < kObsDim; ++i)
    out[i] = b.low[i] + 0.5 * (normalized[i] + 1.0) * (b.high[i] - b.low[i]);
  return out;
}

std::string outcome_name(Outcome o) {
  switch (o) {
    case Outcome::None: return "none";
    case Outcome::Lift: return "lift";
    case Outcome::Tip: return "tip";
    case Outcome::Slip: return "slip";
    case Outcome::Error: return "error";
  }
  return "none";
}

Outcome parse_outcome(const std::string& name) {
  for (Outcome o : {Outcome::None, Outcome::Lift, Outcome::Tip, Outcome::Slip, Outcome::Error})
    if (outcome_name(o) == name) return o;
  if (name == "success") return Outcome::Lift;
  throw std::invalid_argument("unknown outcome '" + name + "'");
}

std::string reward_scheme_name(RewardScheme s) { return s == RewardScheme::Guided ? "guided" : "shaped"; }

RewardScheme parse_reward_scheme(const std::string& name) {
  if (name == "guided") return RewardScheme::Guided;
  if (name == "shaped") return RewardScheme::Shaped;
  throw std::invalid_argument("unknown reward scheme '" + name + "' (guided | shaped)");
}

std::string phase_name(PrimitivePhase p) {
  switch (p) {
    case PrimitivePhase::Approach: return "approach";
    case PrimitivePhase::Grasp: return "grasp";
    case PrimitivePhase::Lift: return "lift";
  }
  return "approach";
}

// ---------------------------------------------------------------------------------------------

bool PerturbationSchedule::active(double t) const {
  if (!enabled || t < onset) return false;
  const double period = on + off;
  const double phase = std::fmod(t - onset, period);
  return phase < on;
}

Vec3 PerturbationSchedule::force(double t) const {
  return active(t) ? Vec3(0.0, 0.0, -magnitude) : Vec3::Zero();
}

void EpisodeConfig::validate(double timestep) const {
  box.validate();
  if (max_steps < 1) throw std::invalid_argument("episode: max_steps must be >= 1");
  if (!(rate > 0.0)) throw std::invalid_argument("episode: rate must be > 0");
  if (substeps < 1) throw std::invalid_argument("episode: substeps must be >= 1");
  if (std::abs(substeps * timestep * rate - 1.0) > 1e-9)
    throw std::invalid_argument("episode: substeps * timestep must equal 1 / rate");
  if (!(settle_time >= 0.0)) throw std::invalid_argument("episode: settle_time must be >= 0");
  if (!(max_offset_x >= 0.0) || !(max_yaw >= 0.0))
    throw std::invalid_argument("episode: placement ranges must be >= 0");
  if (max_placement_tries < 1) throw std::invalid_argument("episode: max_placement_tries must be >= 1");
  if (perturbation.enabled && (!(perturbation.on > 0.0) || !(perturbation.off >= 0.0)))
    throw std::invalid_argument("episode: perturbation on/off durations are invalid");
}

std::vector<BoxSpec> sample_boxes(int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_boxes: count must be >= 1");
  const double lo[4] = {0.5, 0.2, 0.2, 0.5};
  const double hi[4] = {10.0, 0.6, 0.6, 1.25};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::array<double, 4>> values(static_cast<std::size_t>(count));
  std::vector<int> strata(static_cast<std::size_t>(count));
  for (int d = 0; d < 4; ++d) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < count; ++i) {
      const double u = (strata[i] + unit(rng)) / count;
      values[i][d] = lo[d] + std::min(u, 1.0) * (hi[d] - lo[d]);
    }
  }
  std::vector<BoxSpec> boxes(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    boxes[i].mass = values[i][0];
    boxes[i].size = Vec3(values[i][1], values[i][2], values[i][3]);
  }
  return boxes;
}

// ---------------------------------------------------------------------------------------------

ActionMapper::ActionMapper(double alpha, double h_min, double h_max)
    : alpha_(alpha), h_min_(h_min), h_max_(h_max) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("ActionMapper: alpha must be in (0, 1]");
  if (!(h_max > h_min)) throw std::invalid_argument("ActionMapper: empty height range");
  reset();
}

void ActionMapper::reset() { filtered_ = normalize(0.0, {}, {}); }

CommandVector ActionMapper::map(const ActionVector& normalized) {
  for (int i = 0; i < kActDim; ++i) {
    const double a = std::isnan(normalized[i]) ? 0.0 : std::clamp(normalized[i], -1.0, 1.0);
    filtered_[i] = alpha_ * a + (1.0 - alpha_) * filtered_[i];
  }
  return to_command(filtered_);
}

CommandVector ActionMapper::to_command(const ActionVector& normalized) const {
  CommandVector u;
  const double a0 = std::clamp(normalized[0], -1.0, 1.0);
  u.h_des = h_min_ + 0.5 * (a0 + 1.0) * (h_max_ - h_min_);
  for (int arm = 0; arm < 2; ++arm) {
    PressureVector& p = arm == 0 ? u.left : u.right;
    for (int j = 0; j < 6; ++j) {
      const double dp = kMaxDifferential * std::clamp(normalized[1 + 6 * arm + j], -1.0, 1.0);
      p[2 * j] = kCenterPressure + dp;
      p[2 * j + 1] = kCenterPressure - dp;
    }
  }
  return u;
}

ActionVector ActionMapper::normalize(double h_des, const std::array<double, 6>& dp_left,
                                     const std::array<double, 6>& dp_right) const {
  ActionVector a;
  a[0] = 2.0 * (h_des - h_min_) / (h_max_ - h_min_) - 1.0;
  for (int j = 0; j < 6; ++j) {
    a[1 + j] = dp_left[j] / kMaxDifferential;
    a[7 + j] = dp_right[j] / kMaxDifferential;
  }
  return a;
}

// ---------------------------------------------------------------------------------------------

PrimitiveState primitive_step(PrimitiveState ps, double h, const PrimitiveSpec& spec) {
  const int big_n = spec.ramp_steps;
  const double f = static_cast<double>(ps.n) / big_n;
  switch (ps.phase) {
    case PrimitivePhase::Approach:
      if (ps.n < big_n) {
        ps.h_des = spec.approach_height;
        for (int j = 0; j < 6; ++j) {
          ps.dp_left[j] = f * spec.approach_left[j];
          ps.dp_right[j] = f * spec.approach_right[j];
        }
        ++ps.n;
      } else if (std::abs(h - spec.approach_height) < spec.height_tolerance) {
        ps.n = 0;
        ps.phase = PrimitivePhase::Grasp;
      }
      break;
    case PrimitivePhase::Grasp:
      for (int j = 0; j < 6; ++j) {
        ps.dp_left[j] = (1.0 - f) * spec.approach_left[j] + f * spec.grasp_left[j];
        ps.dp_right[j] = (1.0 - f) * spec.approach_right[j] + f * spec.grasp_right[j];
      }
      ++ps.n;
      if (ps.n == big_n) ps.phase = PrimitivePhase::Lift;
      break;
    case PrimitivePhase::Lift:
      ps.h_des = 0.0;
      break;
  }
  return ps;
}

double task_reward(Outcome event) {
  if (event == Outcome::Tip) return -2.0;
  if (event == Outcome::Lift) return 10.0;
  return 0.0;
}

double guided_reward(const ActionVector& action, const ActionVector& reference, Outcome event) {
  double d2 = 0.0;
  for (int i = 0; i < kActDim; ++i) d2 += (action[i] - reference[i]) * (action[i] - reference[i]);
  return task_reward(event) + 0.1 * std::exp(-0.5 * d2);
}

double shaped_reward(const Vec3& chest_to_box, int contacts, double height_gain, Outcome event) {
  const double approach = 0.1 * std::exp(-4.0 * chest_to_box.squaredNorm());
  const double grasp = std::abs(chest_to_box.z()) < kGraspGate ? 0.1 * contacts : 0.0;
  return task_reward(event) + approach + grasp + std::max(0.0, height_gain);
}

// ---------------------------------------------------------------------------------------------

Environment::Environment(RobotModel model, RewardScheme scheme)
    : model_(std::move(model)),
      scheme_(scheme),
      mapper_(model_.action_filter, model_.elevator.min_height, model_.elevator.max_height) {
  model_.validate();
}

double Environment::box_tilt() const { return tilt_of(state_.box); }

Vec3 Environment::chest_to_box() const {
  return sim_->chest_pose(state_.h).position - state_.box.position;
}

Observation Environment::reset(const EpisodeConfig& cfg, std::uint64_t seed) {
  cfg.validate(model_.timestep);
  cfg_ = cfg;
  substep_dt_ = model_.timestep;
  sim_.emplace(model_, cfg.box);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  bool placed = false;
  Pose box_pose;
  for (int attempt = 0; attempt < cfg.max_placement_tries && !placed; ++attempt) {
    if (cfg.randomize_pose) {
      offset_x_ = cfg.max_offset_x * unit(rng);
      yaw_ = cfg.max_yaw * unit(rng);
    } else {
      offset_x_ = cfg.offset_x;
      yaw_ = cfg.yaw;
    }
    box_pose.rotation = Eigen::AngleAxisd(yaw_, Vec3::UnitZ()).toRotationMatrix();
    box_pose.position = Vec3(model_.scene.box_standoff + 0.5 * cfg.box.size.x() + offset_x_, 0.0,
                             0.5 * cfg.box.size.z());
    placed = !sim_->robot_overlaps_box(box_pose, 0.0) && !sim_->torso_sweep_overlaps_box(box_pose);
    if (!cfg.randomize_pose) break;
  }
  if (!placed) throw std::runtime_error("reset: could not place the box clear of the robot");

  state_ = sim_->home_state(box_pose, ActionMapper::kCenterPressure);
  const CommandVector home = CommandVector::uniform(0.0, ActionMapper::kCenterPressure);
  const int settle_steps = static_cast<int>(std::lround(cfg.settle_time / substep_dt_));
  for (int i = 0; i < settle_steps; ++i) state_ = sim_->step(state_, home, substep_dt_);
  state_.time = 0.0;
  state_.plan = ElevatorTrajectory::hold(state_.h);
  state_.plan_start = 0.0;
  state_.plan_target = state_.h;
  previous_ = state_;

  mapper_.reset();
  command_ = home;
  primitive_ = PrimitiveState{};
  steps_ = 0;
  reset_ = true;
  done_ = false;
  outcome_ = Outcome::None;
  z0_ = state_.box.position.z();
  obs_ = measure();
  refresh_reference();
  return obs_;
}

void Environment::refresh_reference() {
  primitive_ = primitive_step(primitive_, state_.h, model_.primitive);
  reference_ = mapper_.normalize(primitive_.h_des, primitive_.dp_left, primitive_.dp_right);
}

Observation Environment::measure() {
  ObsVector o{};
  std::size_t i = 0;
  auto put = [&](double v) { o[i++] = v; };
  auto put3 = [&](const Vec3& v) {
    put(v.x());
    put(v.y());
    put(v.z());
  };
  put3(cfg_.box.size);
  put3(state_.box.position);
  Eigen::Quaterniond quat(state_.box.rotation);
  quat.normalize();
  if (quat.w() < 0.0) quat.coeffs() = -quat.coeffs();
  put(quat.w());
  put(quat.x());
  put(quat.y());
  put(quat.z());
  put3(state_.box_velocity);
  put3(state_.box_angular_velocity);
  put3(chest_to_box());
  put(state_.h);
  put(state_.hd);

  std::array<std::array<double, 6>, 2> q{}, q_prev{};
  for (int s = 0; s < 2; ++s) {
    const ArmSide side = s == 0 ? ArmSide::Left : ArmSide::Right;
    const auto now = sim_->joint_relative_poses(side, state_);
    const auto before = sim_->joint_relative_poses(side, previous_);
    for (int j = 0; j < kJointsPerArm; ++j) {
      const double len = model_.arm(side).joints[j].length;
      const auto e1 = cc_estimate(Mat3(now[j].rotation), len);
      const auto e0 = cc_estimate(Mat3(before[j].rotation), len);
      q[s][2 * j] = e1.config.q[0];
      q[s][2 * j + 1] = e1.config.q[1];
      q_prev[s][2 * j] = e0.config.q[0];
      q_prev[s][2 * j + 1] = e0.config.q[1];
    }
  }
  const double elapsed = state_.time - previous_.time;
  for (int s = 0; s < 2; ++s)
    for (double v : q[s]) put(v);
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < 6; ++k) put(elapsed > 0.0 ? (q[s][k] - q_prev[s][k]) / elapsed : 0.0);
  for (double p : state_.left.pressure) put(p);
  for (double p : state_.right.pressure) put(p);
  for (double p : command_.left) put(p);
  for (double p : command_.right) put(p);

  Observation out;
  out.raw = o;
  out.normalized = normalize_observation(o);
  return out;
}

StepResult Environment::step(const ActionVector& action) {
  if (!reset_) throw std::logic_error("step called before reset");
  if (done_) throw std::logic_error("episode is over; call reset");
  ActionVector a;
  for (int i = 0; i < kActDim; ++i) {
    if (!std::isfinite(action[i])) throw std::invalid_argument("action contains a non-finite value");
    a[i] = std::clamp(action[i], -1.0, 1.0);
  }

  StepResult r;
  r.info.reference = reference_;
  r.info.phase = primitive_.phase;
  command_ = mapper_.map(a);
  try {
    for (int k = 0; k < cfg_.substeps; ++k) {
      StepInput in;
      if (cfg_.perturbation.active(state_.time)) {
        in.box_force = cfg_.perturbation.force(state_.time);
        r.info.perturbed = true;
      }
      previous_ = state_;
      state_ = sim_->step(state_, command_, substep_dt_, in);
    }
  } catch (const IntegrationError& e) {
    state_ = e.last_valid();
    previous_ = state_;
    ++steps_;
    done_ = true;
    outcome_ = Outcome::Error;
    r.terminated = true;
    r.info.outcome = Outcome::Error;
    r.info.error = e.what();
    obs_ = measure();
    r.observation = obs_;
    return r;
  }
  ++steps_;

  Outcome event = Outcome::None;
  if (box_tilt() > kTipAngle)
    event = Outcome::Tip;
  else if (state_.box.position.z() - z0_ >= kLiftHeight)
    event = Outcome::Lift;
  r.info.contacts = sim_->robot_box_contacts();

  if (scheme_ == RewardScheme::Guided)
    r.reward = guided_reward(a, reference_, event);
  else
    r.reward = shaped_reward(chest_to_box(), r.info.contacts, state_.box.position.z() - z0_, event);

  if (event != Outcome::None) {
    r.terminated = true;
    outcome_ = event;
  } else if (steps_ >= cfg_.max_steps) {
    r.truncated = true;
    outcome_ = Outcome::Slip;
  }
  done_ = r.terminated || r.truncated;
  r.info.outcome = outcome_;
  obs_ = measure();
  r.observation = obs_;
  refresh_reference();
  return r;
}

// ---------------------------------------------------------------------------------------------

Policy primitive_policy() {
  return [](const Observation&, const ActionVector& reference) { return reference; };
}

EpisodeRecord run_episode(Environment& env, const EpisodeConfig& cfg, std::uint64_t seed,
                          const Policy& policy, EpisodeLog* log) {
  EpisodeRecord rec;
  rec.box = cfg.box;
  rec.perturbed = cfg.perturbation.enabled;
  Observation obs = env.reset(cfg, seed);
  rec.offset_x = env.offset_x();
  rec.yaw = env.yaw();
  while (!env.done()) {
    const ActionVector ref = env.reference();
    const ActionVector a = policy(obs, ref);
    const StepResult r = env.step(a);
    rec.actions.push_back(a);
    rec.total_reward += r.reward;
    if (log) {
      EpisodeLog::Row row;
      row.step = env.step_count();
      row.time = env.state().time;
      row.observation = r.observation.normalized;
      row.action = a;
      row.reference = ref;
      row.reward = r.reward;
      row.contacts = r.info.contacts;
      row.perturbed = r.info.perturbed;
      row.phase = r.info.phase;
      row.outcome = r.info.outcome;
      log->rows.push_back(row);
    }
    obs = r.observation;
  }
  rec.outcome = env.outcome();
  rec.length = env.step_count();
  return rec;
}

std::vector<EpisodeRecord> evaluate(const RobotModel& model, const EvaluationOptions& o,
                                    const std::function<Policy(int)>& policy_for) {
  if (o.boxes < 1) throw std::invalid_argument("evaluate: boxes must be >= 1");
  const std::vector<BoxSpec> boxes = sample_boxes(o.boxes, o.seed);
  std::vector<EpisodeRecord> out(static_cast<std::size_t>(o.boxes));
  parallel_for(o.boxes, o.threads, [&](int i) {
    EpisodeConfig cfg;
    cfg.box = boxes[static_cast<std::size_t>(i)];
    cfg.max_steps = o.max_steps;
    cfg.perturbation = o.perturbation;
    cfg.perturbation.enabled = o.perturb;
    Environment env(model, o.scheme);
    EpisodeRecord rec;
    try {
      rec = run_episode(env, cfg, o.seed + static_cast<std::uint64_t>(i),
                        policy_for ? policy_for(i) : primitive_policy());
    } catch (const std::runtime_error&) {
      rec = EpisodeRecord{};
      rec.box = cfg.box;
      rec.perturbed = o.perturb;
      rec.outcome = Outcome::Error;
    }
    rec.index = i;
    out[static_cast<std::size_t>(i)] = std::move(rec);
  });
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double get_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("episode log: bad number '" + s + "'");
  return v;
}

PrimitivePhase parse_phase(const std::string& s) {
  for (PrimitivePhase p : {PrimitivePhase::Approach, PrimitivePhase::Grasp, PrimitivePhase::Lift})
    if (phase_name(p) == s) return p;
  throw std::runtime_error("episode log: unknown phase '" + s + "'");
}

}  // namespace

void EpisodeLog::write_csv(std::ostream& out) const {
  out << "step,time,reward,contacts,perturbed,phase,outcome";
  for (const auto& n : observation_names()) out << ",o." << n;
  for (int i = 0; i < kActDim; ++i) out << ",a" << i;
  for (int i = 0; i < kActDim; ++i) out << ",ref" << i;
  out << '\n';
  for (const Row& r : rows) {
    out << r.step << ',';
    put_double(out, r.time);
    out << ',';
    put_double(out, r.reward);
    out << ',' << r.contacts << ',' << (r.perturbed ? 1 : 0) << ',' << phase_name(r.phase) << ','
        << outcome_name(r.outcome);
    for (double v : r.observation) {
      out << ',';
      put_double(out, v);
    }
    for (double v : r.action) {
      out << ',';
      put_double(out, v);
    }
    for (double v : r.reference) {
      out << ',';
      put_double(out, v);
    }
    out << '\n';
  }
}

EpisodeLog EpisodeLog::read_csv(std::istream& in) {
  EpisodeLog log;
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,time,reward", 0) != 0)
    throw std::runtime_error("episode log: missing header");
  const std::size_t expected = 7 + kObsDim + 2 * kActDim;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != expected)
      throw std::runtime_error("episode log: line " + std::to_string(lineno) + " has " +
                               std::to_string(f.size()) + " fields, expected " + std::to_string(expected));
    Row r;
    r.step = static_cast<int>(get_double(f[0]));
    r.time = get_double(f[1]);
    r.reward = get_double(f[2]);
    r.contacts = static_cast<int>(get_double(f[3]));
    r.perturbed = f[4] == "1";
    r.phase = parse_phase(f[5]);
    r.outcome = parse_outcome(f[6]);
    std::size_t k = 7;
    for (double& v : r.observation) v = get_double(f[k++]);
    for (double& v : r.action) v = get_double(f[k++]);
    for (double& v : r.reference) v = get_double(f[k++]);
    log.rows.push_back(r);
  }
  return log;
}

// ---------------------------------------------------------------------------------------------

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  int first_index = count;
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (i < first_index) {
          first_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

VecEnv::VecEnv(const RobotModel& model, int count, RewardScheme scheme, int threads)
    : threads_(threads) {
  if (count < 1) throw std::invalid_argument("VecEnv: count must be >= 1");
  envs_.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) envs_.emplace_back(model, scheme);
}

std::vector<Observation> VecEnv::reset(const std::vector<EpisodeConfig>& configs,
                                       std::uint64_t base_seed) {
  if (configs.size() != envs_.size())
    throw std::invalid_argument("VecEnv::reset: expected one config per environment");
  std::vector<Observation> out(envs_.size());
  parallel_for(size(), threads_, [&](int i) { out[i] = envs_[i].reset(configs[i], base_seed + i); });
  return out;
}

std::vector<StepResult> VecEnv::step(const std::vector<ActionVector>& actions) {
  if (actions.size() != envs_.size())
    throw std::invalid_argument("VecEnv::step: expected one action per environment");
  std::vector<StepResult> out(envs_.size());
  parallel_for(size(), threads_, [&](int i) { out[i] = envs_[i].step(actions[i]); });
  return out;
}

}  // namespace softchain
