#include <softchain/env.hpp>

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace softchain;

namespace {

EpisodeConfig fixed(Vec3 size, double mass, double offset_x = 0.0, double yaw = 0.0) {
  EpisodeConfig cfg;
  cfg.box.size = size;
  cfg.box.mass = mass;
  cfg.randomize_pose = false;
  cfg.offset_x = offset_x;
  cfg.yaw = yaw;
  return cfg;
}

Policy zero_policy() {
  return [](const Observation&, const ActionVector&) { return ActionVector{}; };
}

}  // namespace

TEST_CASE("observation and action dimensions") {
  CHECK(kObsDim == 93);
  CHECK(kActDim == 13);
  const auto& names = observation_names();
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 93);
  const auto& b = ObservationBounds::standard();
  for (int i = 0; i < kObsDim; ++i) CHECK(b.low[i] < b.high[i]);

  ObsVector raw;
  for (int i = 0; i < kObsDim; ++i) raw[i] = b.low[i] + (b.high[i] - b.low[i]) * (i % 7) / 6.0;
  const ObsVector n = normalize_observation(raw);
  const ObsVector back = unnormalize_observation(n);
  for (int i = 0; i < kObsDim; ++i) {
    CHECK(n[i] >= -1.0);
    CHECK(n[i] <= 1.0);
    CHECK(back[i] == doctest::Approx(raw[i]).epsilon(1e-12));
  }
}

TEST_CASE("action map keeps chamber pairs at 300 kPa") {
  ActionMapper m(0.3, -1.5, 0.0);
  for (double v : {-1.0, -0.4, 0.0, 0.7, 1.0}) {
    ActionVector a;
    a.fill(v);
    const CommandVector c = m.to_command(a);
    for (int k = 0; k < kChambersPerArm; k += 2) {
      CHECK(c.left[k] + c.left[k + 1] == doctest::Approx(300.0));
      CHECK(c.right[k] + c.right[k + 1] == doctest::Approx(300.0));
      CHECK(c.left[k] >= 0.0);
      CHECK(c.left[k] <= 300.0);
    }
    CHECK(c.h_des >= -1.5);
    CHECK(c.h_des <= 0.0);
  }
  // normalize inverts to_command
  std::array<double, 6> dl{10, -20, 30, -40, 50, -60}, dr{-5, 5, 0, 150, -150, 75};
  const ActionVector a = m.normalize(-0.6, dl, dr);
  const ActionVector b = m.normalize(-0.6, dl, dr);
  CHECK(a == b);
  const CommandVector c = m.to_command(a);
  CHECK(c.h_des == doctest::Approx(-0.6));
  CHECK(c.left[0] == doctest::Approx(160.0));
  CHECK(c.left[1] == doctest::Approx(140.0));
  CHECK(c.right[6] == doctest::Approx(300.0));

  // the filter starts at home and moves a fraction alpha toward the input
  m.reset();
  ActionVector ones;
  ones.fill(1.0);
  const ActionVector home = m.filtered();
  m.map(ones);
  for (int i = 0; i < kActDim; ++i)
    CHECK(m.filtered()[i] == doctest::Approx(home[i] + 0.3 * (1.0 - home[i])));
}

TEST_CASE("guided reward shaping term") {
  ActionVector ref;
  for (int i = 0; i < kActDim; ++i) ref[i] = std::sin(i + 1.0);
  CHECK(guided_reward(ref, ref, Outcome::None) == doctest::Approx(0.1));
  double previous = 0.1;
  for (double d : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    ActionVector a = ref;
    a[3] += d;
    const double r = guided_reward(a, ref, Outcome::None);
    CHECK(r > 0.0);
    CHECK(r < previous);
    CHECK(r == doctest::Approx(0.1 * std::exp(-0.5 * d * d)));
    previous = r;
  }
  CHECK(guided_reward(ref, ref, Outcome::Lift) == doctest::Approx(10.1));
  CHECK(guided_reward(ref, ref, Outcome::Tip) == doctest::Approx(-1.9));
  CHECK(task_reward(Outcome::Slip) == 0.0);
}

TEST_CASE("latin hypercube boxes") {
  const int n = 50;
  const auto boxes = sample_boxes(n, 11);
  REQUIRE(boxes.size() == 50);
  std::array<std::set<int>, 4> strata;
  for (const auto& b : boxes) {
    CHECK_NOTHROW(b.validate());
    strata[0].insert(static_cast<int>((b.mass - 0.5) / 9.5 * n));
    strata[1].insert(static_cast<int>((b.size.x() - 0.2) / 0.4 * n));
    strata[2].insert(static_cast<int>((b.size.y() - 0.2) / 0.4 * n));
    strata[3].insert(static_cast<int>((b.size.z() - 0.5) / 0.75 * n));
  }
  for (const auto& s : strata) CHECK(s.size() == 50u);  // one sample per stratum
  CHECK(sample_boxes(5, 3)[2].mass == sample_boxes(5, 3)[2].mass);
  CHECK(sample_boxes(5, 3)[2].mass != sample_boxes(5, 4)[2].mass);
}

TEST_CASE("perturbation schedule") {
  PerturbationSchedule p;
  CHECK_FALSE(p.active(9.0));
  p.enabled = true;
  CHECK_FALSE(p.active(7.99));
  CHECK(p.active(8.0));
  CHECK(p.active(8.99));
  CHECK_FALSE(p.active(9.5));
  CHECK(p.active(10.2));
  CHECK(p.force(8.5) == Vec3(0, 0, -100));
  CHECK(p.force(9.5) == Vec3::Zero());
}

TEST_CASE("reset places the box within the configured range") {
  Environment env(default_model());
  EpisodeConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Observation obs = env.reset(cfg, seed);
    CHECK(std::abs(env.offset_x()) <= 0.1);
    CHECK(std::abs(env.yaw()) <= M_PI / 3 + 1e-12);
    CHECK(env.step_count() == 0);
    CHECK_FALSE(env.done());
    for (double v : obs.normalized) CHECK(std::abs(v) <= 1.0);
  }
  CHECK_THROWS(Environment(default_model()).step(ActionVector{}));
  EpisodeConfig bad;
  bad.max_steps = 0;
  CHECK_THROWS(env.reset(bad, 0));
}

TEST_CASE("episodes are deterministic") {
  Environment a(default_model()), b(default_model());
  EpisodeConfig cfg;
  a.reset(cfg, 42);
  b.reset(cfg, 42);
  for (int i = 0; i < 60; ++i) {
    const StepResult ra = a.step(a.reference());
    const StepResult rb = b.step(b.reference());
    REQUIRE(ra.observation.raw == rb.observation.raw);
    REQUIRE(ra.reward == rb.reward);
  }
  CHECK(a.state().time == doctest::Approx(3.0));
}

TEST_CASE("nominal box is lifted by the primitive") {
  Environment env(default_model());
  EpisodeLog log;
  const EpisodeRecord r = run_episode(env, fixed(Vec3(0.4, 0.4, 0.7), 5.0), 7, primitive_policy(), &log);
  CHECK(r.outcome == Outcome::Lift);
  CHECK(r.length > 100);
  CHECK(r.length < 400);
  CHECK(env.box_tilt() < 80.0 * M_PI / 180.0);
  CHECK(env.state().box.position.z() - env.initial_box_height() >= 0.5);
  REQUIRE(log.rows.size() == static_cast<std::size_t>(r.length));
  CHECK(log.rows.back().outcome == Outcome::Lift);
  CHECK(log.rows.front().phase == PrimitivePhase::Approach);
  CHECK(log.rows.back().phase == PrimitivePhase::Lift);

  std::stringstream ss;
  log.write_csv(ss);
  const EpisodeLog back = EpisodeLog::read_csv(ss);
  REQUIRE(back.rows.size() == log.rows.size());
  CHECK(back.rows[50].action == log.rows[50].action);
  CHECK(back.rows[50].observation == log.rows[50].observation);
  CHECK(back.rows.back().outcome == Outcome::Lift);
}

TEST_CASE("tall heavy box tips") {
  Environment env(default_model());
  const auto cfg = fixed(Vec3(0.5268209701350146, 0.30021838620447766, 0.9325053932699063), 5.69923964537097,
                         0.05710965798577461, -0.09669875695414783);
  const EpisodeRecord r = run_episode(env, cfg, 0, primitive_policy());
  CHECK(r.outcome == Outcome::Tip);
  CHECK(env.box_tilt() >= 80.0 * M_PI / 180.0);
}

TEST_CASE("heavy flat box slips out") {
  Environment env(default_model());
  const auto cfg = fixed(Vec3(0.5898634312997882, 0.20973439209716926, 0.5030755648070971), 9.330648978084993,
                         0.03706710624774336, 0.044267396894418665);
  const EpisodeRecord r = run_episode(env, cfg, 0, primitive_policy());
  CHECK(r.outcome == Outcome::Slip);
  CHECK(r.length == 1200);
}

TEST_CASE("idle arms end in truncation") {
  Environment env(default_model());
  auto cfg = fixed(Vec3(0.4, 0.4, 0.7), 5.0);
  cfg.max_steps = 30;
  const EpisodeRecord r = run_episode(env, cfg, 0, zero_policy());
  CHECK(r.outcome == Outcome::Slip);
  CHECK(r.length == 30);
  CHECK_THROWS(env.step(ActionVector{}));
}

TEST_CASE("shaped reward") {
  CHECK(shaped_reward(Vec3::Zero(), 0, 0.0, Outcome::None) == doctest::Approx(0.1));
  CHECK(shaped_reward(Vec3(0, 0, 0.1), 3, 0.2, Outcome::None) ==
        doctest::Approx(0.1 * std::exp(-0.04) + 0.3 + 0.2));
  CHECK(shaped_reward(Vec3(0, 0, 1.0), 3, -0.2, Outcome::None) == doctest::Approx(0.1 * std::exp(-4.0)));
  Environment env(default_model(), RewardScheme::Shaped);
  env.reset(fixed(Vec3(0.4, 0.4, 0.7), 5.0), 0);
  const StepResult r = env.step(env.reference());
  CHECK(r.reward > 0.0);
  CHECK(parse_reward_scheme("shaped") == RewardScheme::Shaped);
  CHECK_THROWS(parse_reward_scheme("dense"));
}

TEST_CASE("batch evaluation pairs boxes and seeds") {
  EvaluationOptions o;
  o.boxes = 3;
  o.seed = 1;
  o.max_steps = 40;
  o.threads = 2;
  const auto a = evaluate(default_model(), o);
  o.threads = 1;
  const auto b = evaluate(default_model(), o);
  REQUIRE(a.size() == 3);
  const auto boxes = sample_boxes(3, 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].index == i);
    CHECK(a[i].box.mass == boxes[i].mass);
    CHECK(a[i].offset_x == b[i].offset_x);
    CHECK(a[i].total_reward == b[i].total_reward);
    CHECK(a[i].actions.size() == static_cast<std::size_t>(a[i].length));
  }
}
