#include <softchain/calib.hpp>
#include <softchain/dynamics.hpp>
#include <softchain/env.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace softchain {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

double get_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("sweep csv: bad number '" + s + "'");
  return v;
}

struct Evaluation {
  Vec6 residual;  // position (m), lambda * orientation (m)
  Mat6X jacobian;
  Vec3 position_error;
  Vec3 orientation_error;
};

// Tip residual and its Jacobian. Joint i of UJ k rotates about a world axis through the
// point l above the UJ's base disk.
Evaluation evaluate(const Eigen::VectorXd& phi, double l, const Pose& target, double lambda) {
  const Eigen::Index n = phi.size();
  const Eigen::Index uj = n / 2;
  std::vector<Vec3> axes(static_cast<std::size_t>(n)), origins(static_cast<std::size_t>(n));
  Pose frame;
  for (Eigen::Index k = 0; k < uj; ++k) {
    const Vec3 origin = frame * Vec3(0, 0, l);
    const Mat3 rx = Eigen::AngleAxisd(phi[2 * k], Vec3::UnitX()).toRotationMatrix();
    axes[2 * k] = frame.rotation.col(0);
    origins[2 * k] = origin;
    axes[2 * k + 1] = frame.rotation * rx.col(1);
    origins[2 * k + 1] = origin;
    frame = frame * uj_fk_single(phi[2 * k], phi[2 * k + 1], l);
  }
  Evaluation e;
  e.position_error = frame.position - target.position;
  e.orientation_error = so3_log(Mat3(frame.rotation.transpose() * target.rotation));
  e.residual << e.position_error, lambda * e.orientation_error;
  const Mat3 jinv = so3_left_jacobian_inverse(e.orientation_error);
  e.jacobian.resize(6, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& w = axes[static_cast<std::size_t>(i)];
    e.jacobian.col(i).head<3>() = w.cross(frame.position - origins[static_cast<std::size_t>(i)]);
    e.jacobian.col(i).tail<3>() = -lambda * (jinv * (frame.rotation.transpose() * w));
  }
  return e;
}

double cost_of(const Evaluation& e, const Eigen::VectorXd& phi, double alpha) {
  return e.residual.squaredNorm() + alpha * phi.squaredNorm();
}

// Half gradient of the objective.
Eigen::VectorXd half_gradient(const Eigen::VectorXd& phi, double l, const Pose& target, double lambda,
                              double alpha) {
  const Evaluation e = evaluate(phi, l, target, lambda);
  return e.jacobian.transpose() * e.residual + alpha * phi;
}

// Central differences of the analytic gradient, symmetrized.
Eigen::MatrixXd half_hessian(const Eigen::VectorXd& phi, double l, const Pose& target, double lambda,
                             double alpha) {
  const Eigen::Index n = phi.size();
  const double h = 1e-5;
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd x = phi;
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = phi[i] + h;
    const Eigen::VectorXd gp = half_gradient(x, l, target, lambda, alpha);
    x[i] = phi[i] - h;
    const Eigen::VectorXd gm = half_gradient(x, l, target, lambda, alpha);
    x[i] = phi[i];
    hess.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

bool inside(const Eigen::VectorXd& phi) {
  return phi.allFinite() && phi.cwiseAbs().maxCoeff() < M_PI - 1e-9;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------------------------

IKTerms ik_objective(const Eigen::VectorXd& angles, const CCConfig& target, int disk_count,
                     double lambda, double alpha) {
  if (disk_count < 2) throw std::invalid_argument("ik_objective: disk_count must be >= 2");
  if (angles.size() != 2 * (disk_count - 1)) throw std::invalid_argument("ik_objective: wrong angle count");
  UJConfig cfg;
  cfg.angles = angles;
  cfg.half_length = target.length / (2.0 * (disk_count - 1));
  const Pose tip = uj_fk_chain(cfg).tip;
  const Pose cc = cc_fk(target);
  const double lam = lambda > 0.0 ? lambda : target.length;
  IKTerms t;
  t.position = (tip.position - cc.position).squaredNorm();
  t.orientation = lam * lam * so3_log(Mat3(tip.rotation.transpose() * cc.rotation)).squaredNorm();
  t.regularizer = alpha * angles.squaredNorm();
  return t;
}

Eigen::VectorXd uniform_split_guess(const CCConfig& target, int disk_count) {
  if (disk_count < 2) throw std::invalid_argument("uniform_split_guess: disk_count must be >= 2");
  Eigen::VectorXd phi(2 * (disk_count - 1));
  for (int k = 0; k < disk_count - 1; ++k) {
    phi[2 * k] = target.q[0] / (disk_count - 1);
    phi[2 * k + 1] = target.q[1] / (disk_count - 1);
  }
  return phi;
}

IKResult solve_uj_from_cc(const IKProblem& p, const Eigen::VectorXd& start) {
  if (p.disk_count < 2) throw std::invalid_argument("solve_uj_from_cc: disk_count must be >= 2");
  if (!(p.target.length > 0.0)) throw std::invalid_argument("solve_uj_from_cc: length must be > 0");
  if (!(p.alpha >= 0.0)) throw std::invalid_argument("solve_uj_from_cc: alpha must be >= 0");
  const Eigen::Index n = 2 * (p.disk_count - 1);
  if (start.size() != n) throw std::invalid_argument("solve_uj_from_cc: start has the wrong size");
  if (!inside(start)) throw std::invalid_argument("solve_uj_from_cc: start angles must satisfy |phi| < pi");

  const double l = p.target.length / (2.0 * (p.disk_count - 1));
  const double lambda = p.lambda > 0.0 ? p.lambda : p.target.length;
  const Pose target = cc_fk(p.target);

  Eigen::VectorXd phi = start;
  Evaluation ev = evaluate(phi, l, target, lambda);
  double cost = cost_of(ev, phi, p.alpha);
  double mu = 1e-6;
  IKResult r;
  int it = 0;
  for (; it < p.max_iterations; ++it) {
    const Eigen::VectorXd g = ev.jacobian.transpose() * ev.residual + p.alpha * phi;
    r.gradient_norm = 2.0 * g.norm();
    if (r.gradient_norm < p.gradient_tolerance) {
      r.converged = true;
      break;
    }
    // Newton-Levenberg-Marquardt: the Gauss-Newton matrix alone converges linearly along
    // directions only the regularizer constrains.
    const Eigen::MatrixXd hessian = half_hessian(phi, l, target, lambda, p.alpha);
    bool accepted = false;
    while (mu < 1e12) {
      Eigen::MatrixXd a = hessian;
      a.diagonal().array() += mu;
      const Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() == Eigen::Success) {
        const Eigen::VectorXd trial = phi - llt.solve(g);
        if (inside(trial)) {
          const Evaluation et = evaluate(trial, l, target, lambda);
          const double ct = cost_of(et, trial, p.alpha);
          if (ct < cost) {
            phi = trial;
            ev = et;
            cost = ct;
            mu = std::max(mu * 0.2, 1e-15);
            accepted = true;
            break;
          }
        }
      }
      mu = std::max(mu * 8.0, 1e-12);
    }
    if (!accepted) break;  // no descent direction at machine precision
  }
  if (!r.converged) {
    const Eigen::VectorXd g = ev.jacobian.transpose() * ev.residual + p.alpha * phi;
    r.gradient_norm = 2.0 * g.norm();
    r.converged = r.gradient_norm < p.gradient_tolerance;
  }
  r.iterations = it;
  r.solution.angles = phi;
  r.solution.half_length = l;
  r.position_error = ev.position_error.norm();
  r.orientation_error = ev.orientation_error.norm();
  r.objective = cost;
  return r;
}

IKResult solve_uj_from_cc(const IKProblem& p) {
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(uniform_split_guess(p.target, p.disk_count));
  starts.push_back(Eigen::VectorXd::Zero(2 * (p.disk_count - 1)));
  if (p.initial) starts.push_back(*p.initial);
  IKResult best;
  bool have = false;
  for (const auto& s : starts) {
    if (!inside(s)) continue;
    IKResult r = solve_uj_from_cc(p, s);
    if (!have || r.objective < best.objective) {
      best = std::move(r);
      have = true;
    }
  }
  if (!have) throw std::invalid_argument("solve_uj_from_cc: no admissible start");
  return best;
}

// ---------------------------------------------------------------------------------------------

std::vector<SweepRow> sweep_cc_vs_uj(const SweepOptions& o) {
  if (o.grid < 1) throw std::invalid_argument("sweep: grid must be >= 1");
  if (!(o.range >= 0.0)) throw std::invalid_argument("sweep: range must be >= 0");
  for (int n : o.disk_counts)
    if (n < 2) throw std::invalid_argument("sweep: disk counts must be >= 2");
  std::vector<double> axis(static_cast<std::size_t>(o.grid));
  for (int i = 0; i < o.grid; ++i)
    axis[i] = o.grid == 1 ? 0.0 : -o.range + 2.0 * o.range * i / (o.grid - 1);
  std::vector<SweepRow> rows;
  for (int n : o.disk_counts)
    for (double a : axis)
      for (double b : axis) {
        SweepRow r;
        r.disk_count = n;
        r.q0 = a;
        r.q1 = b;
        rows.push_back(r);
      }
  parallel_for(static_cast<int>(rows.size()), o.threads, [&](int i) {
    SweepRow& r = rows[static_cast<std::size_t>(i)];
    IKProblem p;
    p.target.q << r.q0, r.q1;
    p.target.length = o.length;
    p.disk_count = r.disk_count;
    p.lambda = o.lambda;
    p.alpha = o.alpha;
    const IKResult res = solve_uj_from_cc(p);
    r.position_error = res.position_error;
    r.orientation_error = res.orientation_error;
    r.converged = res.converged;
  });
  return rows;
}

BoxStats box_stats(std::vector<double> v) {
  BoxStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  return s;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "N,q0,q1,pos_err_m,ori_err_rad,converged\n";
  for (const auto& r : rows) {
    out << r.disk_count << ',';
    put_double(out, r.q0);
    out << ',';
    put_double(out, r.q1);
    out << ',';
    put_double(out, r.position_error);
    out << ',';
    put_double(out, r.orientation_error);
    out << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "N,q0,q1,pos_err_m,ori_err_rad,converged")
    throw std::runtime_error("sweep csv: unexpected header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) f.push_back(c);
    if (f.size() != 6) throw std::runtime_error("sweep csv: expected 6 fields in '" + line + "'");
    SweepRow r;
    r.disk_count = static_cast<int>(get_double(f[0]));
    r.q0 = get_double(f[1]);
    r.q1 = get_double(f[2]);
    r.position_error = get_double(f[3]);
    r.orientation_error = get_double(f[4]);
    r.converged = f[5] == "1";
    rows.push_back(r);
  }
  return rows;
}

std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_n;
  std::map<int, std::size_t> bad;
  for (const auto& r : rows) {
    by_n[r.disk_count].first.push_back(r.position_error);
    by_n[r.disk_count].second.push_back(r.orientation_error);
    if (!r.converged) ++bad[r.disk_count];
  }
  std::vector<SweepSummary> out;
  for (auto& [n, v] : by_n) {
    SweepSummary s;
    s.disk_count = n;
    s.position = box_stats(v.first);
    s.orientation = box_stats(v.second);
    s.nonconverged = bad[n];
    out.push_back(s);
  }
  return out;
}

namespace {

void put_stats(std::ostream& out, const BoxStats& s) {
  for (double v : {s.mean, s.min, s.q1, s.median, s.q3, s.max}) {
    out << ',';
    put_double(out, v);
  }
}

const char* kStatsHeader = "mean,min,q1,median,q3,max";

}  // namespace

void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummary>& summary) {
  out << "N,count,nonconverged";
  for (const char* p : {"pos_", "ori_"}) {
    std::stringstream h(kStatsHeader);
    std::string c;
    while (std::getline(h, c, ',')) out << ',' << p << c;
  }
  out << '\n';
  for (const auto& s : summary) {
    out << s.disk_count << ',' << s.position.count << ',' << s.nonconverged;
    put_stats(out, s.position);
    put_stats(out, s.orientation);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------------------------

namespace {

using JointPoses = std::array<std::array<Pose, kJointsPerArm>, 2>;

struct Replay {
  std::vector<JointPoses> poses;
  std::vector<bool> contact;
  std::string failure;
};

Replay replay(const RobotModel& model, const BoxSpec& box, int policy_steps) {
  Simulator sim(model, box);
  Pose box_pose;
  box_pose.position = Vec3(model.scene.box_standoff + 0.5 * box.size.x(), 0.0, 0.5 * box.size.z());
  const double dt = model.timestep;
  const int substeps = std::max(1, static_cast<int>(std::lround(0.05 / dt)));
  SimState s = sim.home_state(box_pose, ActionMapper::kCenterPressure);
  const CommandVector home = CommandVector::uniform(0.0, ActionMapper::kCenterPressure);
  for (int i = 0; i < static_cast<int>(std::lround(0.5 / dt)); ++i) s = sim.step(s, home, dt);
  s.time = 0.0;
  s.plan = ElevatorTrajectory::hold(s.h);
  s.plan_start = 0.0;
  s.plan_target = s.h;

  ActionMapper mapper(model.action_filter, model.elevator.min_height, model.elevator.max_height);
  PrimitiveState ps;
  Replay out;
  try {
    for (int k = 0; k < policy_steps; ++k) {
      ps = primitive_step(ps, s.h, model.primitive);
      const CommandVector u = mapper.map(mapper.normalize(ps.h_des, ps.dp_left, ps.dp_right));
      for (int j = 0; j < substeps; ++j) s = sim.step(s, u, dt);
      JointPoses jp;
      jp[0] = sim.joint_relative_poses(ArmSide::Left, s);
      jp[1] = sim.joint_relative_poses(ArmSide::Right, s);
      out.poses.push_back(jp);
      out.contact.push_back(sim.robot_box_contacts() > 0);
    }
  } catch (const IntegrationError& e) {
    out.failure = e.what();
  }
  return out;
}

}  // namespace

NonCCResult nonconstant_curvature_experiment(const RobotModel& model, const NonCCOptions& o) {
  for (int n : o.disk_counts)
    if (n < 2 || n > o.reference_disks)
      throw std::invalid_argument("noncc: disk counts must lie in [2, reference]");
  if (o.policy_steps < 1) throw std::invalid_argument("noncc: policy_steps must be >= 1");

  std::vector<int> counts = o.disk_counts;
  counts.push_back(o.reference_disks);
  std::vector<Replay> runs(counts.size());
  parallel_for(static_cast<int>(counts.size()), o.threads, [&](int i) {
    runs[static_cast<std::size_t>(i)] = replay(model.with_disk_count(counts[i]), o.box, o.policy_steps);
  });
  const Replay& ref = runs.back();
  if (!ref.failure.empty()) throw std::runtime_error("noncc: reference model diverged: " + ref.failure);

  NonCCResult result;
  auto add_summary = [&](const std::string& name, const std::string& failure) {
    std::vector<double> pos, ori, cpos, cori;
    for (const auto& s : result.samples)
      if (s.model == name) {
        pos.push_back(s.position_error);
        ori.push_back(s.orientation_error);
        if (s.contact) {
          cpos.push_back(s.position_error);
          cori.push_back(s.orientation_error);
        }
      }
    NonCCModelSummary m;
    m.model = name;
    m.position = box_stats(pos);
    m.orientation = box_stats(ori);
    m.contact_position = box_stats(cpos);
    m.contact_orientation = box_stats(cori);
    m.failure = failure;
    result.summary.push_back(m);
  };

  for (std::size_t m = 0; m + 1 < runs.size(); ++m) {
    const std::string name = "uj-" + std::to_string(counts[m]);
    const Replay& run = runs[m];
    for (std::size_t k = 0; k < run.poses.size(); ++k)
      for (int a = 0; a < 2; ++a)
        for (int j = 0; j < kJointsPerArm; ++j) {
          const Pose& est = run.poses[k][a][j];
          const Pose& truth = ref.poses[k][a][j];
          NonCCSample s;
          s.model = name;
          s.step = static_cast<int>(k) + 1;
          s.arm = a;
          s.joint = j;
          s.contact = ref.contact[k];
          s.position_error = (est.position - truth.position).norm();
          s.orientation_error = rotation_distance(est.rotation, truth.rotation);
          result.samples.push_back(s);
        }
    add_summary(name, run.failure);
  }

  // Constant-curvature estimate of the reference shape.
  for (std::size_t k = 0; k < ref.poses.size(); ++k)
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < kJointsPerArm; ++j) {
        const Pose& truth = ref.poses[k][a][j];
        const double len = model.arm(a == 0 ? ArmSide::Left : ArmSide::Right).joints[j].length;
        const CCEstimate est = cc_estimate(Mat3(truth.rotation), len);
        const Pose pred = cc_fk(est.config);
        NonCCSample s;
        s.model = "cc";
        s.step = static_cast<int>(k) + 1;
        s.arm = a;
        s.joint = j;
        s.contact = ref.contact[k];
        s.position_error = (pred.position - truth.position).norm();
        s.orientation_error = rotation_distance(pred.rotation, truth.rotation);
        result.samples.push_back(s);
      }
  add_summary("cc", "");
  return result;
}

void write_noncc_csv(std::ostream& out, const std::vector<NonCCSample>& samples) {
  out << "model,step,arm,joint,contact,pos_err_m,ori_err_rad\n";
  for (const auto& s : samples) {
    out << s.model << ',' << s.step << ',' << (s.arm == 0 ? "left" : "right") << ',' << s.joint << ','
        << (s.contact ? 1 : 0) << ',';
    put_double(out, s.position_error);
    out << ',';
    put_double(out, s.orientation_error);
    out << '\n';
  }
}

void write_noncc_summary_csv(std::ostream& out, const std::vector<NonCCModelSummary>& summary) {
  out << "model,count";
  for (const char* p : {"pos_", "ori_", "contact_pos_", "contact_ori_"}) {
    std::stringstream h(kStatsHeader);
    std::string c;
    while (std::getline(h, c, ',')) out << ',' << p << c;
  }
  out << ",failure\n";
  for (const auto& s : summary) {
    out << s.model << ',' << s.position.count;
    put_stats(out, s.position);
    put_stats(out, s.orientation);
    put_stats(out, s.contact_position);
    put_stats(out, s.contact_orientation);
    std::string f = s.failure;
    std::replace(f.begin(), f.end(), ',', ';');
    out << ',' << f << '\n';
  }
}

}  // namespace softchain
