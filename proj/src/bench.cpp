#include <softchain/bench.hpp>
#include <softchain/dynamics.hpp>

#include <charconv>
#include <chrono>
#include <ostream>
#include <stdexcept>

namespace softchain {

std::string scenario_name(BenchScenario s) { return s == BenchScenario::Contact ? "contact" : "free"; }

BenchScenario parse_scenario(const std::string& s) {
  if (s == "contact") return BenchScenario::Contact;
  if (s == "free") return BenchScenario::Free;
  throw std::invalid_argument("unknown bench scenario '" + s + "' (expected contact or free)");
}

BenchStart bench_start(const RobotModel& model, BenchScenario scenario) {
  Environment env(model);
  EpisodeConfig cfg;
  cfg.randomize_pose = false;
  env.reset(cfg, 0);
  bool found = false;
  while (!env.done()) {
    const StepResult r = env.step(env.reference());
    if (r.info.phase != PrimitivePhase::Approach && r.info.contacts > 0) {
      found = true;
      break;
    }
  }
  if (!found) throw std::runtime_error("bench: primitive never touched the box after its approach phase");
  BenchStart start;
  start.state = env.state();
  start.box = cfg.box;
  ActionMapper mapper(model.action_filter, model.elevator.min_height, model.elevator.max_height);
  start.command = mapper.to_command(env.reference());
  if (scenario == BenchScenario::Free) {
    start.state.box.position.x() += 20.0;
    start.state.box.position.z() = 0.5 * cfg.box.size.z();
    start.state.box.rotation.setIdentity();
    start.state.box_velocity.setZero();
    start.state.box_angular_velocity.setZero();
  }
  return start;
}

BenchPoint bench_point(const RobotModel& model, const BenchStart& start, double dt, int steps, int warmup) {
  if (!(dt > 0.0)) throw std::invalid_argument("bench: dt must be > 0");
  if (steps < 1 || warmup < 0) throw std::invalid_argument("bench: steps must be >= 1 and warmup >= 0");
  BenchPoint p;
  p.dt = dt;
  p.disk_count = model.left.joints[0].disk_count;
  p.steps = steps;
  p.sim_time = steps * dt;
  Simulator sim(model, start.box);
  SimState s = start.state;
  try {
    for (int i = 0; i < warmup; ++i) s = sim.step(s, start.command, dt);
    p.contacts = sim.robot_box_contacts();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < steps; ++i) s = sim.step(s, start.command, dt);
    const auto t1 = std::chrono::steady_clock::now();
    p.wall_time = std::chrono::duration<double>(t1 - t0).count();
    p.rtf = p.sim_time / p.wall_time;
  } catch (const IntegrationError& e) {
    p.error = e.what();
  }
  return p;
}

std::vector<BenchPoint> run_bench(const RobotModel& model, const BenchOptions& o) {
  for (double dt : o.timesteps)
    if (!(dt > 0.0)) throw std::invalid_argument("bench: timesteps must be > 0");
  for (int n : o.disk_counts)
    if (n < 2) throw std::invalid_argument("bench: disk counts must be >= 2");
  std::vector<BenchPoint> out;
  for (BenchScenario sc : o.scenarios)
    for (int n : o.disk_counts) {
      const RobotModel m = model.with_disk_count(n);
      const BenchStart start = bench_start(m, sc);
      for (double dt : o.timesteps) {
        BenchPoint p = bench_point(m, start, dt, o.steps, o.warmup);
        p.scenario = sc;
        out.push_back(p);
      }
    }
  return out;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchPoint>& points) {
  auto num = [&](double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, r.ptr - buf);
  };
  out << "scenario,dt,N,steps,sim_time_s,wall_time_s,rtf,contacts,error\n";
  for (const auto& p : points) {
    out << scenario_name(p.scenario) << ',';
    num(p.dt);
    out << ',' << p.disk_count << ',' << p.steps << ',';
    num(p.sim_time);
    out << ',';
    num(p.wall_time);
    out << ',';
    num(p.rtf);
    out << ',' << p.contacts << ',';
    std::string e = p.error;
    for (char& c : e)
      if (c == ',' || c == '\n') c = ';';
    out << e << '\n';
  }
}

}  // namespace softchain
