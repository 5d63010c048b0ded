#include <softchain/actuation.hpp>
#include <softchain/model.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace softchain;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("softchain_test_" + name);
}

std::string error_of(const std::string& text) {
  try {
    parse_model(text);
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("stiffness and damping distribution") {
  auto [k, c] = distribute_stiffness(10.0, 1.0, 5);
  CHECK(k == 40.0);
  CHECK(distribute_stiffness(10.0, 1.0, 2).first == 10.0);
  CHECK(distribute_stiffness(1.0, 2.0, 11).second == 20.0);
  CHECK_THROWS_AS(distribute_stiffness(10.0, 1.0, 1), ModelError);
  (void)c;
  // N - 1 equal springs in series recover the joint stiffness.
  for (int n = 2; n <= 64; ++n) {
    const double kd = distribute_stiffness(7.3, 0.9, n).first;
    double compliance = 0.0;
    for (int i = 0; i < n - 1; ++i) compliance += 1.0 / kd;
    CHECK(compliance == doctest::Approx(1.0 / 7.3).epsilon(1e-14));
  }
}

TEST_CASE("per-UJ limit") {
  CHECK(per_uj_limit(M_PI / 2, 10) * 180.0 / M_PI == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(per_uj_limit(1.3, 2) == 1.3);
  CHECK(per_uj_limit(2.1, 5) == doctest::Approx(0.525).epsilon(1e-15));
}

TEST_CASE("rim contact angle matches the disk geometry") {
  // Bisection on the rim gap of a planar bend: the lower face of the upper disk meets the
  // upper face of the lower disk.
  for (double t : {0.005, 0.02, 0.05}) {
    const double radius = 0.08;
    double lo = 0.0, hi = 1.5;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (rim_penetration(mid, 0.0, radius, t).depth < 0.0 ? lo : hi) = mid;
    }
    CHECK(rim_contact_angle(t, radius) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
    CHECK(rim_penetration(0.0, 0.5 * (lo + hi), radius, t).depth == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("default model is valid and tuned") {
  const RobotModel m = default_model();
  CHECK_NOTHROW(m.validate());
  CHECK(m.left.joints.size() == 3);
  CHECK(m.left.dof_count() == 24);
  CHECK(rim_contact_angle(m.left.joints[0].disk_thickness, m.left.joints[0].disk_radius) * 4 ==
        doctest::Approx(2.1).epsilon(1e-12));
  const double bend = steady_state_bend(m.left.joints[0], m.actuator);
  CHECK(std::abs(bend - 2.1) < 0.21);
}

TEST_CASE("rediscretization keeps the total rim angle") {
  const RobotModel m = default_model();
  for (int n : {2, 8, 64}) {
    const RobotModel r = m.with_disk_count(n);
    const auto& j = r.right.joints[1];
    CHECK(j.disk_count == n);
    CHECK(rim_contact_angle(j.disk_thickness, j.disk_radius) * (n - 1) == doctest::Approx(2.1).epsilon(1e-12));
  }
  CHECK_THROWS_AS(m.with_disk_count(1), ModelError);
}

TEST_CASE("arm mount frames") {
  const RobotModel m = default_model();
  for (const ArmSpec* arm : {&m.left, &m.right}) {
    const Pose mount = arm->mount();
    CHECK(is_rotation(mount.rotation));
    // hangs down and forward
    CHECK(mount.rotation.col(2).z() < -0.8);
    CHECK(mount.rotation.col(2).x() > 0.4);
    // local x points away from the midline
    CHECK(mount.rotation.col(0).y() * arm->shoulder.y() > 0.0);
  }
}

TEST_CASE("save and load round trip") {
  RobotModel m = default_model();
  m.left.joints[2].stiffness = 9.123456789012345;
  m.contact.damping = 1.0 / 3.0;
  m.primitive.grasp_right[3] = -12.5;
  const std::string text = serialize_model(m);
  const RobotModel back = parse_model(text);
  CHECK(serialize_model(back) == text);
  CHECK(back.left.joints[2].stiffness == m.left.joints[2].stiffness);
  CHECK(back.contact.damping == m.contact.damping);
  CHECK(back.primitive.grasp_right[3] == -12.5);

  const auto path = temp_file("roundtrip.model");
  save_model(default_model(), path);
  const RobotModel loaded = load_model(path);
  CHECK(serialize_model(loaded) == serialize_model(default_model()));
  std::filesystem::remove(path);
}

TEST_CASE("shipped model file") {
  const RobotModel m = load_model(std::filesystem::path(SOFTCHAIN_SOURCE_DIR) / "models" / "default.model");
  for (const ArmSpec* arm : {&m.left, &m.right})
    for (const auto& j : arm->joints) CHECK(j.disk_count == 5);
  CHECK(m.timestep == 0.005);
}

TEST_CASE("model errors name the field") {
  const std::string text = serialize_model(default_model());
  const std::string one_disk = replace(text, "\"disk_count\": 5", "\"disk_count\": 1");
  CHECK(error_of(one_disk).find("left.joints[0].disk_count") != std::string::npos);

  CHECK(error_of(replace(text, "\"max_jerk\"", "\"jerk\"")).find("elevator.max_jerk is missing") != std::string::npos);
  CHECK(error_of(replace(text, "\"mass\": 0.4", "\"mass\": -0.4")).find("mass") != std::string::npos);
  CHECK(error_of(replace(text, "\"action_filter\": 0.3", "\"action_filter\": 1.5")).find("action_filter") != std::string::npos);
  CHECK(error_of(replace(text, "\"gravity\": 9.81", "\"gravity\": \"down\"")).find("scene.gravity has the wrong type") != std::string::npos);
  CHECK(error_of("softchain-model 2\n{}").find("header") != std::string::npos);
  CHECK(error_of(std::string(kModelHeader) + "\n{").find("JSON") != std::string::npos);
  CHECK_THROWS_AS(load_model(temp_file("does_not_exist.model")), ModelError);
}

TEST_CASE("soft limit tuning is checked on load") {
  RobotModel m = default_model();
  m.right.joints[1].stiffness = 30.0;
  const auto path = temp_file("stiff.model");
  save_model(m, path);
  try {
    load_model(path);
    FAIL("expected a tuning error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("right.joints[1].stiffness") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("box inertia") {
  BoxSpec b;
  b.size = Vec3(0.2, 0.4, 0.6);
  b.mass = 3.0;
  const Mat3 i = b.inertia();
  CHECK(i(0, 0) == doctest::Approx(3.0 / 12 * (0.16 + 0.36)));
  CHECK(i(1, 1) == doctest::Approx(3.0 / 12 * (0.04 + 0.36)));
  CHECK(i(2, 2) == doctest::Approx(3.0 / 12 * (0.04 + 0.16)));
  b.mass = 0.0;
  CHECK_THROWS_AS(b.validate(), ModelError);
}
