// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <softchain/analytics.hpp>
#include <softchain/bench.hpp>
#include <softchain/calib.hpp>
#include <softchain/dynamics.hpp>
#include <softchain/env.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

using namespace softchain;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Verdict()> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

TransitionMatrix table(std::array<std::array<long, 3>, 3> c) {
  TransitionMatrix t;
  t.counts = c;
  return t;
}

const TransitionMatrix kUnperturbedCounts = table({{{922, 6, 3}, {13, 27, 10}, {6, 1, 12}}});
const TransitionMatrix kPerturbedCounts = table({{{815, 2, 5}, {20, 44, 48}, {15, 4, 47}}});

Verdict stuart_maxwell_reproduction() {
  const double p5 = stuart_maxwell(kUnperturbedCounts).p;
  const double p6 = stuart_maxwell(kPerturbedCounts).p;
  const bool ok5 = std::abs(p5 - 1.4e-2) <= 0.3 * 1.4e-2;
  const bool ok6 = std::abs(std::log10(p6 / 1.4e-12)) <= 1.0;
  return {ok5 && ok6, "p(unperturbed)=" + fmt(p5) + " p(perturbed)=" + fmt(p6)};
}

Verdict marginals() {
  using A = std::array<long, 3>;
  const bool ok = kUnperturbedCounts.row_totals() == A{931, 50, 19} && kUnperturbedCounts.col_totals() == A{941, 34, 25} &&
                  kPerturbedCounts.row_totals() == A{822, 112, 66} && kPerturbedCounts.col_totals() == A{850, 50, 100};
  return {ok, "unperturbed 931/50/19 vs 941/34/25, perturbed 822/112/66 vs 850/50/100"};
}

Verdict kinematic_sweep() {
  SweepOptions o;
  o.grid = 11;
  const auto rows = sweep_cc_vs_uj(o);
  const auto summary = summarize_sweep(rows);
  bool decreasing = true, skew = true, origin = true, converged = true;
  std::string skew_failures;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    converged = converged && s.nonconverged == 0;
    if (i > 0)
      decreasing = decreasing && s.position.mean < summary[i - 1].position.mean &&
                   s.orientation.mean < summary[i - 1].orientation.mean;
    if (s.disk_count <= 8) {
      for (const auto& [label, b] : {std::pair{"pos", s.position}, std::pair{"ori", s.orientation}})
        if (b.mean < b.median) {
          skew = false;
          skew_failures += " N=" + std::to_string(s.disk_count) + " " + label + " mean " + fmt(b.mean) +
                           " < median " + fmt(b.median) + ";";
        }
    }
  }
  int origin_rows = 0;
  for (const auto& r : rows)
    if (std::abs(r.q0) < 1e-12 && std::abs(r.q1) < 1e-12) {
      ++origin_rows;
      origin = origin && r.position_error < 1e-12 && r.orientation_error < 1e-12;
    }
  origin = origin && origin_rows == static_cast<int>(summary.size());
  std::string detail = std::string("means decreasing: ") + (decreasing ? "yes" : "no") +
                       ", error at q=0 zero: " + (origin ? "yes" : "no") +
                       ", all converged: " + (converged ? "yes" : "no") + ", mean>=median for N<=8: " +
                       (skew ? "yes" : "no" + skew_failures);
  return {decreasing && skew && origin && converged, detail};
}

Verdict noncc() {
  const RobotModel model = default_model();
  const NonCCResult r = nonconstant_curvature_experiment(model, NonCCOptions{});
  bool ok = true;
  double previous = 1e300;
  std::string detail = "mean pos err:";
  const NonCCModelSummary* cc = nullptr;
  for (const auto& s : r.summary) {
    if (!s.failure.empty()) {
      ok = false;
      detail += " " + s.model + " failed (" + s.failure + ")";
      continue;
    }
    if (s.model == "cc") {
      cc = &s;
      continue;
    }
    detail += " " + s.model + "=" + fmt(s.position.mean, 3);
    ok = ok && s.position.mean < previous;
    previous = s.position.mean;
  }
  if (!cc || cc->contact_position.count == 0) return {false, detail + "; no CC contact samples"};
  const double bound = cc->contact_position.mean / model.left.joints[0].length;
  ok = ok && cc->contact_orientation.mean < bound;
  return {ok, detail + "; CC contact ori " + fmt(cc->contact_orientation.mean, 3) + " rad < pos/L " +
                  fmt(bound, 3)};
}

int bench_steps = 10000;

Verdict rtf_benchmark() {
  BenchOptions o;
  o.steps = bench_steps;
  const auto points = run_bench(default_model(), o);
  bool ok = true;
  std::string detail;
  auto at = [&](BenchScenario sc, int n, double dt) -> const BenchPoint& {
    for (const auto& p : points)
      if (p.scenario == sc && p.disk_count == n && p.dt == dt) return p;
    throw std::logic_error("missing bench point");
  };
  for (const auto& p : points)
    if (!p.error.empty()) {
      ok = false;
      detail += " failure " + scenario_name(p.scenario) + " N=" + std::to_string(p.disk_count) + ";";
    }
  for (BenchScenario sc : o.scenarios) {
    for (int n : o.disk_counts)
      for (std::size_t k = 1; k < o.timesteps.size(); ++k)
        ok = ok && at(sc, n, o.timesteps[k]).rtf > at(sc, n, o.timesteps[k - 1]).rtf;
    for (double dt : o.timesteps)
      for (std::size_t k = 1; k < o.disk_counts.size(); ++k)
        ok = ok && at(sc, o.disk_counts[k], dt).rtf < at(sc, o.disk_counts[k - 1], dt).rtf;
    detail += " " + scenario_name(sc) + " rtf(5ms,N=5)=" + fmt(at(sc, 5, 5e-3).rtf, 3) +
              " rtf(10ms,N=2)=" + fmt(at(sc, 2, 10e-3).rtf, 3) + " rtf(0.5ms,N=32)=" +
              fmt(at(sc, 32, 0.5e-3).rtf, 3) + ";";
  }
  return {ok, std::to_string(bench_steps) + " steps/point," + detail};
}

EpisodeConfig fixed(Vec3 size, double mass, double offset_x = 0.0, double yaw = 0.0) {
  EpisodeConfig cfg;
  cfg.box.size = size;
  cfg.box.mass = mass;
  cfg.randomize_pose = false;
  cfg.offset_x = offset_x;
  cfg.yaw = yaw;
  return cfg;
}

Verdict environment_contracts() {
  const RobotModel model = default_model();
  bool ok = kObsDim == 93 && kActDim == 13;
  Environment env(model);
  ok = ok && env.reset(EpisodeConfig{}, 0).normalized.size() == 93u;

  ActionMapper mapper;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst_sum = 0.0, reward_min = 1.0, reward_max = 0.0;
  for (int i = 0; i < 10000; ++i) {
    ActionVector a, ref;
    for (int k = 0; k < kActDim; ++k) {
      a[k] = u(rng);
      ref[k] = u(rng) / 2.0;
    }
    const CommandVector c = mapper.map(a);
    for (int k = 0; k < kChambersPerArm; k += 2)
      worst_sum = std::max({worst_sum, std::abs(c.left[k] + c.left[k + 1] - 300.0),
                            std::abs(c.right[k] + c.right[k + 1] - 300.0)});
    const double r = guided_reward(a, ref, Outcome::None);
    reward_min = std::min(reward_min, r);
    reward_max = std::max(reward_max, r);
  }
  const double r_star = guided_reward(ActionVector{}, ActionVector{}, Outcome::None);
  reward_max = std::max(reward_max, r_star);
  ok = ok && worst_sum < 1e-9 && reward_min > 0.0 && reward_max <= 0.1 && r_star == 0.1;

  const Outcome lift =
      run_episode(env, fixed(Vec3(0.4, 0.4, 0.7), 5.0), 7, primitive_policy()).outcome;
  const double gain = env.state().box.position.z() - env.initial_box_height();
  const Outcome tip = run_episode(env,
                                  fixed(Vec3(0.5268209701350146, 0.30021838620447766, 0.9325053932699063),
                                        5.69923964537097, 0.05710965798577461, -0.09669875695414783),
                                  0, primitive_policy())
                          .outcome;
  const double tilt = env.box_tilt();
  const EpisodeRecord slip = run_episode(
      env,
      fixed(Vec3(0.5898634312997882, 0.20973439209716926, 0.5030755648070971), 9.330648978084993,
            0.03706710624774336, 0.044267396894418665),
      0, primitive_policy());
  ok = ok && lift == Outcome::Lift && gain >= 0.5 && tip == Outcome::Tip && tilt >= 80.0 * M_PI / 180.0 &&
       slip.outcome == Outcome::Slip && slip.length == 1200;
  return {ok, "dims 93/13, pair-sum dev " + fmt(worst_sum, 2) + ", r_guide in [" + fmt(reward_min, 3) + ", " +
                  fmt(reward_max, 3) + "], scripted " + outcome_name(lift) + " (+" + fmt(gain, 3) + " m)/" +
                  outcome_name(tip) + " (" + fmt(tilt * 180 / M_PI, 3) + " deg)/" + outcome_name(slip.outcome) +
                  " (" + std::to_string(slip.length) + " steps)"};
}

Pose far_box(double x) {
  Pose p;
  p.position = Vec3(x, 0.0, 0.0);
  return p;
}

double tendon_potential(const ArmLayout& layout, const Eigen::VectorXd& q, const PressureVector& p, double area) {
  double v = 0.0;
  for (int j = 0; j < kJointsPerArm; ++j) {
    const int first = layout.first_uj[static_cast<std::size_t>(j)];
    const int count = j + 1 < kJointsPerArm ? layout.first_uj[static_cast<std::size_t>(j + 1)] - first
                                            : layout.uj_count() - first;
    const UJInfo& info = layout.ujs[static_cast<std::size_t>(first)];
    UJConfig cfg{q.segment(2 * first, 2 * count), info.half_length};
    const ChainPose<double> chain = uj_fk_chain(cfg);
    for (int c = 0; c < kChambersPerJoint; ++c) {
      const double force = area * p[static_cast<std::size_t>(4 * j + c)] * 1000.0;
      const double a = kChamberAngles[static_cast<std::size_t>(c)];
      const Vec3 local(info.tendon_radius * std::cos(a), info.tendon_radius * std::sin(a), 0.0);
      for (std::size_t k = 0; k + 1 < chain.frames.size(); ++k)
        v -= force * ((chain.frames[k + 1] * local) - (chain.frames[k] * local)).norm();
    }
  }
  return v;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

Verdict dynamics_properties() {
  const RobotModel model = default_model();
  Simulator sim(model, BoxSpec{});

  // ballistic drop over 0.5 s
  SimState s = sim.home_state(far_box(5.0));
  s.box.position.z() = 10.0;
  for (int i = 0; i < 100; ++i) s = sim.step(s, CommandVector::uniform(0.0, 150.0), 0.005);
  const double expected = 0.5 * model.scene.gravity * 0.25;
  const double drop_rel = std::abs((10.0 - s.box.position.z()) - expected) / expected;

  // passive energy
  s = sim.home_state(far_box(3.0), 0.0);
  for (ArmState* a : {&s.left, &s.right})
    for (Eigen::Index i = 0; i < a->q.size(); ++i) a->q[i] = (i % 2 ? 0.3 : -0.15);
  double e = sim.energy(s).total(), worst_gain = -1e300;
  for (int i = 0; i < 6000; ++i) {
    s = sim.step(s, CommandVector::uniform(0.0, 0.0), 0.005);
    const double e1 = sim.energy(s).total();
    worst_gain = std::max(worst_gain, e1 - e);
    e = e1;
  }

  // mass matrix
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int spd_failures = 0;
  Eigen::MatrixXd h;
  const ArmLayout& layout = sim.layout(ArmSide::Left);
  for (int t = 0; t < 1000; ++t) {
    Eigen::VectorXd q(layout.dof());
    for (auto& x : q) x = u(rng);
    sim.mass_matrix(ArmSide::Left, q, h);
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * h.cwiseAbs().maxCoeff() ||
        Eigen::LLT<Eigen::MatrixXd>(h).info() != Eigen::Success)
      ++spd_failures;
  }

  // tendon forces vs finite differences of the chamber potential
  std::uniform_real_distribution<double> qu(-0.45, 0.45), pu(0.0, 300.0);
  double tendon_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(layout.dof());
    for (auto& x : q) x = qu(rng);
    PressureVector p;
    for (auto& x : p) x = pu(rng);
    const Eigen::VectorXd tau = sim.tendon_forces(ArmSide::Left, q, p);
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      Eigen::VectorXd qp = q, qm = q;
      qp[k] += 1e-6;
      qm[k] -= 1e-6;
      const double area = model.actuator.effective_area;
      const double fd = -(tendon_potential(layout, qp, p, area) - tendon_potential(layout, qm, p, area)) / 2e-6;
      tendon_rel = std::max(tendon_rel, std::abs(fd - tau[k]) / std::max(1.0, std::abs(fd)));
    }
  }

  // deterministic replay
  auto replay = [&] {
    Simulator local(model, BoxSpec{});
    SimState st = local.home_state(far_box(0.6));
    std::mt19937_64 r(99);
    std::uniform_real_distribution<double> pr(0.0, 300.0), hr(-1.5, 0.0);
    CommandVector c = CommandVector::uniform(0.0, 150.0);
    for (int i = 0; i < 600; ++i) {
      if (i % 50 == 0) {
        c.h_des = hr(r);
        for (auto& x : c.left) x = pr(r);
        for (auto& x : c.right) x = pr(r);
      }
      st = local.step(st, c, 0.005);
    }
    return st;
  };
  const SimState a = replay(), b = replay();
  const bool identical = same_bits(a.left.q, b.left.q) && same_bits(a.right.qd, b.right.qd) &&
                         std::memcmp(&a.box.position, &b.box.position, sizeof(a.box.position)) == 0 &&
                         std::memcmp(&a.box_velocity, &b.box_velocity, sizeof(a.box_velocity)) == 0;

  const bool ok = drop_rel < 0.01 && worst_gain <= 1e-6 && spd_failures == 0 && tendon_rel < 1e-5 && identical;
  return {ok, "ballistic rel err " + fmt(drop_rel, 2) + ", max energy gain " + fmt(worst_gain, 2) +
                  " J/step, SPD failures " + std::to_string(spd_failures) + "/1000, tendon FD rel err " +
                  fmt(tendon_rel, 2) + ", replay " + (identical ? "bit-identical" : "DIFFERS")};
}

Verdict end_to_end() {
  const RobotModel model = default_model();
  Environment env(model);
  const EpisodeRecord nominal = run_episode(env, fixed(Vec3(0.4, 0.4, 0.7), 5.0), 7, primitive_policy());
  const auto records = evaluate(model, EvaluationOptions{});
  const OutcomeSummary s = summarize(records);
  bool classified = records.size() == 100;
  for (const auto& r : records)
    classified = classified && (r.outcome == Outcome::Lift || r.outcome == Outcome::Tip || r.outcome == Outcome::Slip);
  return {nominal.outcome == Outcome::Lift && classified,
          "nominal box " + outcome_name(nominal.outcome) + " at step " + std::to_string(nominal.length) +
              "; 100 boxes: lift " + std::to_string(s.success) + ", slip " + std::to_string(s.slip) + ", tip " +
              std::to_string(s.tip) + ", error " + std::to_string(s.error)};
}

Verdict corrective_metric() {
  ActionVector unit{}, ones;
  unit[0] = 1.0;
  ones.fill(1.0);
  const double one = corrective_action(ActionVector{}, unit);
  const double all = corrective_action(ActionVector{}, ones);

  // synthetic paired logs: constant offsets after onset 160
  std::vector<CorrectiveTrial> trials;
  for (int i = 0; i < 6; ++i) {
    std::vector<ActionVector> a(300, ActionVector{}), b = a;
    for (int t = 160; t < 300; ++t) b[static_cast<std::size_t>(t)][0] = 0.1 * (i + 1);
    trials.push_back({i < 4 ? Outcome::Lift : Outcome::Slip, i < 5 ? Outcome::Lift : Outcome::Tip,
                      corrective_series(a, b)});
  }
  const auto groups = corrective_table(trials, 160, 100);
  std::ostringstream csv;
  write_corrective_csv(csv, groups);
  const double k = 100.0 / std::sqrt(13.0);
  const bool schema = csv.str().rfind("transition,trials,mean_pct,median_pct,max_pct\n", 0) == 0 &&
                      groups.size() == 3 && groups[0].transition == "Success -> Success" &&
                      groups[0].trials == 4 && std::abs(groups[0].mean - 0.25 * k) < 1e-9 &&
                      std::abs(groups[0].max - 0.4 * k) < 1e-9 && groups[1].transition == "Slip -> Success" &&
                      groups[2].transition == "Slip -> Tip" && std::abs(groups[2].median - 0.6 * k) < 1e-9;
  const bool ok = std::abs(one - 27.74) < 0.005 && std::abs(all - 100.0) < 1e-12 && schema;
  return {ok, "unit " + fmt(one, 4) + "%, all-ones " + fmt(all, 4) + "%, corrective table schema " +
                  (schema ? "reproduced" : "MISMATCH") + " (" + std::to_string(groups.size()) + " transitions)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"softchain acceptance run"};
  std::string only;
  app.add_option("--only", only, "run criteria whose name contains this text");
  app.add_option("--bench-steps", bench_steps, "timed steps per benchmark point")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"stuart-maxwell reproduction", 1, stuart_maxwell_reproduction},
      {"transition marginals", 1, marginals},
      {"cc-vs-uj sweep", 600, kinematic_sweep},
      {"non-constant-curvature experiment", 900, noncc},
      {"rtf benchmark", 600, rtf_benchmark},
      {"environment contracts", 60, environment_contracts},
      {"dynamics property suite", 300, dynamics_properties},
      {"end-to-end smoke", 1200, end_to_end},
      {"corrective-action metric", 1, corrective_metric},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed > c.limit_s) {
      v.pass = false;
      v.detail += "; over the " + fmt(c.limit_s) + " s budget";
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << ": " << v.detail << " [" << fmt(elapsed, 3) << " s]"
              << std::endl;
  }
  return failures ? 1 : 0;
}
