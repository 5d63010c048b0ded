#include <softchain/actuation.hpp>
#include <softchain/model.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace softchain {

using nlohmann::json;

Pose ArmSpec::mount() const {
  const double sp = std::sin(pin_angle), cp = std::cos(pin_angle);
  const Vec3 z(sp, 0.0, -cp);
  const Vec3 x = side == ArmSide::Left ? Vec3(0, 1, 0) : Vec3(0, -1, 0);
  Pose pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = z.cross(x);
  pose.rotation.col(2) = z;
  pose.position = shoulder;
  return pose;
}

int ArmSpec::dof_count() const {
  int n = 0;
  for (const auto& j : joints) n += 2 * j.uj_count();
  return n;
}

std::pair<double, double> distribute_stiffness(double stiffness, double damping, int disk_count) {
  if (disk_count < 2) throw ModelError("disk_count must be >= 2, got " + std::to_string(disk_count));
  const double springs = static_cast<double>(disk_count - 1);
  return {stiffness * springs, damping * springs};
}

double per_uj_limit(double max_bend, int disk_count) {
  if (disk_count < 2) throw ModelError("disk_count must be >= 2, got " + std::to_string(disk_count));
  return max_bend / static_cast<double>(disk_count - 1);
}

double rim_contact_angle(double disk_thickness, double disk_radius) {
  return 2.0 * std::atan(disk_thickness / (2.0 * disk_radius));
}

double steady_state_bend(const ContinuumJointSpec& joint, const ActuatorSpec& actuator) {
  const auto [k_disk, c_disk] =
      distribute_stiffness(joint.stiffness, joint.damping, joint.disk_count);
  (void)c_disk;
  const double mid = 0.5 * (actuator.min_pressure + actuator.max_pressure);
  // +x chamber at max, -x at min, y pair at the mean: the joint bends about -y.
  const std::array<double, 4> pressures{actuator.max_pressure, actuator.min_pressure, mid, mid};
  const double l = joint.half_segment();
  auto residual = [&](double beta) {
    const Eigen::Vector2d tau = uj_tendon_forces(0.0, -beta, l, joint.tendon_radius, pressures,
                                                 actuator.effective_area);
    return -tau.y() - k_disk * beta;
  };
  double lo = 0.0, hi = 0.5 * M_PI;
  if (residual(hi) > 0.0) return hi * joint.uj_count();
  for (int i = 0; i < 200; ++i) {
    const double mid_beta = 0.5 * (lo + hi);
    (residual(mid_beta) > 0.0 ? lo : hi) = mid_beta;
  }
  return 0.5 * (lo + hi) * joint.uj_count();
}

Mat3 BoxSpec::inertia() const {
  const double w = size.x(), d = size.y(), h = size.z();
  return (mass / 12.0 * Vec3(d * d + h * h, w * w + h * h, w * w + d * d)).asDiagonal();
}

void BoxSpec::validate() const {
  for (int i = 0; i < 3; ++i)
    if (!(size[i] > 0.0)) throw ModelError("box.size must be positive");
  if (!(mass > 0.0)) throw ModelError("box.mass must be > 0");
  if (!(friction >= 0.0)) throw ModelError("box.friction must be >= 0");
}

namespace {

void require(bool ok, const std::string& field, const std::string& constraint, double value) {
  if (!ok) {
    std::ostringstream os;
    os << field << " violates " << constraint << " (got " << value << ")";
    throw ModelError(os.str());
  }
}

void validate_joint(const ContinuumJointSpec& j, const std::string& prefix) {
  require(j.disk_count >= 2, prefix + ".disk_count", ">= 2", j.disk_count);
  require(j.length > 0, prefix + ".length", "> 0", j.length);
  require(j.mass > 0, prefix + ".mass", "> 0", j.mass);
  require(j.stiffness > 0, prefix + ".stiffness", "> 0", j.stiffness);
  require(j.damping > 0, prefix + ".damping", "> 0", j.damping);
  require(j.disk_radius > 0, prefix + ".disk_radius", "> 0", j.disk_radius);
  require(j.tendon_radius > 0, prefix + ".tendon_radius", "> 0", j.tendon_radius);
  require(j.max_bend > 0 && j.max_bend < M_PI, prefix + ".max_bend", "in (0, pi)", j.max_bend);
  require(j.disk_thickness > 0, prefix + ".disk_thickness", "> 0", j.disk_thickness);
}

void validate_arm(const ArmSpec& arm, const std::string& prefix) {
  for (std::size_t i = 0; i < arm.joints.size(); ++i)
    validate_joint(arm.joints[i], prefix + ".joints[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < arm.links.size(); ++i) {
    const std::string p = prefix + ".links[" + std::to_string(i) + "]";
    require(arm.links[i].length > 0, p + ".length", "> 0", arm.links[i].length);
    require(arm.links[i].mass > 0, p + ".mass", "> 0", arm.links[i].mass);
    require(arm.links[i].radius > 0, p + ".radius", "> 0", arm.links[i].radius);
  }
  require(std::isfinite(arm.pin_angle), prefix + ".pin_angle", "finite", arm.pin_angle);
}

}  // namespace

void RobotModel::validate() const {
  validate_arm(left, "left");
  validate_arm(right, "right");
  require(left.side == ArmSide::Left, "left.side", "== left", 0);
  require(right.side == ArmSide::Right, "right.side", "== right", 1);
  require(elevator.min_height < elevator.max_height, "elevator.min_height", "< max_height",
          elevator.min_height);
  require(elevator.max_velocity > 0, "elevator.max_velocity", "> 0", elevator.max_velocity);
  require(elevator.max_acceleration > 0, "elevator.max_acceleration", "> 0",
          elevator.max_acceleration);
  require(elevator.max_jerk > 0, "elevator.max_jerk", "> 0", elevator.max_jerk);
  require(actuator.min_pressure == 0.0, "actuator.min_pressure", "== 0 kPa", actuator.min_pressure);
  require(actuator.max_pressure == 300.0, "actuator.max_pressure", "== 300 kPa",
          actuator.max_pressure);
  require(actuator.effective_area > 0, "actuator.effective_area", "> 0", actuator.effective_area);
  require(actuator.time_constant > 0, "actuator.time_constant", "> 0", actuator.time_constant);
  require(contact.stiffness > 0, "contact.stiffness", "> 0", contact.stiffness);
  require(contact.damping >= 0, "contact.damping", ">= 0", contact.damping);
  require(contact.slip_velocity > 0, "contact.slip_velocity", "> 0", contact.slip_velocity);
  require(contact.mu_box_arm >= 0, "contact.mu_box_arm", ">= 0", contact.mu_box_arm);
  require(contact.mu_box_ground >= 0, "contact.mu_box_ground", ">= 0", contact.mu_box_ground);
  require(contact.mu_arm_ground >= 0, "contact.mu_arm_ground", ">= 0", contact.mu_arm_ground);
  require(limits.stiffness_gain >= 0, "limits.stiffness_gain", ">= 0", limits.stiffness_gain);
  require(action_filter > 0 && action_filter <= 1, "action_filter", "in (0, 1]", action_filter);
  require(timestep > 0, "timestep", "> 0", timestep);
  require(primitive.ramp_steps >= 1, "primitive.ramp_steps", ">= 1", primitive.ramp_steps);
  require(primitive.height_tolerance > 0, "primitive.height_tolerance", "> 0",
          primitive.height_tolerance);
  for (int i = 0; i < 6; ++i) {
    for (double v : {primitive.approach_left[i], primitive.approach_right[i],
                     primitive.grasp_left[i], primitive.grasp_right[i]})
      require(std::abs(v) <= 150.0, "primitive waypoint", "|dp| <= 150 kPa", v);
  }
  for (int i = 0; i < 3; ++i)
    require(scene.chest_half_extents[i] > 0, "scene.chest_half_extents", "> 0",
            scene.chest_half_extents[i]);
  require(scene.box_standoff > 0, "scene.box_standoff", "> 0", scene.box_standoff);
  require(scene.gravity >= 0, "scene.gravity", ">= 0", scene.gravity);
}

RobotModel RobotModel::with_disk_count(int disk_count) const {
  if (disk_count < 2) throw ModelError("disk_count must be >= 2, got " + std::to_string(disk_count));
  RobotModel out = *this;
  for (ArmSpec* arm : {&out.left, &out.right}) {
    for (auto& j : arm->joints) {
      const double total_rim = rim_contact_angle(j.disk_thickness, j.disk_radius) * j.uj_count();
      j.disk_count = disk_count;
      j.disk_thickness = 2.0 * j.disk_radius * std::tan(0.5 * total_rim / j.uj_count());
    }
  }
  return out;
}

RobotModel default_model() {
  RobotModel m;
  ContinuumJointSpec joint;
  joint.disk_count = 5;
  joint.length = 0.22;
  joint.mass = 0.4;
  joint.stiffness = 21.0;
  joint.damping = 1.0;
  joint.disk_radius = 0.08;
  joint.tendon_radius = 0.056;
  joint.max_bend = 2.1;
  joint.disk_thickness = 2.0 * joint.disk_radius * std::tan(0.5 * joint.max_bend / 4.0);
  for (ArmSpec* arm : {&m.left, &m.right}) {
    arm->joints = {joint, joint, joint};
    arm->links = {LinkSpec{0.25, 0.5, 0.07}, LinkSpec{0.25, 0.5, 0.07}};
  }
  m.left.side = ArmSide::Left;
  m.right.side = ArmSide::Right;
  m.left.shoulder = Vec3(0.1, 0.5, 0.2);
  m.right.shoulder = Vec3(0.1, -0.5, 0.2);
  m.primitive.approach_left = {-60, 0, -60, 0, -40, 0};
  m.primitive.approach_right = {-60, 0, -60, 0, -40, 0};
  m.primitive.grasp_left = {80, 0, 80, 0, 60, 0};
  m.primitive.grasp_right = {80, 0, 80, 0, 60, 0};
  return m;
}

// ---------------------------------------------------------------------------------------------
// File format: a header line followed by a JSON document.

namespace {

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ModelError(field + " must be an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json joint_to_json(const ContinuumJointSpec& j) {
  return {{"disk_count", j.disk_count},       {"length", j.length},
          {"mass", j.mass},                   {"stiffness", j.stiffness},
          {"damping", j.damping},             {"disk_radius", j.disk_radius},
          {"tendon_radius", j.tendon_radius}, {"max_bend", j.max_bend},
          {"disk_thickness", j.disk_thickness}};
}

json arm_to_json(const ArmSpec& a) {
  json joints = json::array(), links = json::array();
  for (const auto& j : a.joints) joints.push_back(joint_to_json(j));
  for (const auto& l : a.links)
    links.push_back({{"length", l.length}, {"mass", l.mass}, {"radius", l.radius}});
  return {{"side", a.side == ArmSide::Left ? "left" : "right"},
          {"shoulder", to_json(a.shoulder)},
          {"pin_angle", a.pin_angle},
          {"joints", joints},
          {"links", links}};
}

template <typename T>
T field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ModelError(path + "." + key + " is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ModelError(path + "." + key + " has the wrong type");
  }
}

const json& section(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ModelError(path + key + " is missing");
  return j.at(key);
}

ContinuumJointSpec joint_from(const json& j, const std::string& path) {
  ContinuumJointSpec s;
  s.disk_count = field<int>(j, "disk_count", path);
  s.length = field<double>(j, "length", path);
  s.mass = field<double>(j, "mass", path);
  s.stiffness = field<double>(j, "stiffness", path);
  s.damping = field<double>(j, "damping", path);
  s.disk_radius = field<double>(j, "disk_radius", path);
  s.tendon_radius = field<double>(j, "tendon_radius", path);
  s.max_bend = field<double>(j, "max_bend", path);
  s.disk_thickness = field<double>(j, "disk_thickness", path);
  return s;
}

ArmSpec arm_from(const json& j, const std::string& path) {
  ArmSpec a;
  const auto side = field<std::string>(j, "side", path);
  if (side != "left" && side != "right") throw ModelError(path + ".side must be left or right");
  a.side = side == "left" ? ArmSide::Left : ArmSide::Right;
  a.shoulder = vec3_from(section(j, "shoulder", path + "."), path + ".shoulder");
  a.pin_angle = field<double>(j, "pin_angle", path);
  const json& joints = section(j, "joints", path + ".");
  const json& links = section(j, "links", path + ".");
  if (!joints.is_array() || joints.size() != 3)
    throw ModelError(path + ".joints must hold exactly 3 continuum joints");
  if (!links.is_array() || links.size() != 2)
    throw ModelError(path + ".links must hold exactly 2 links");
  for (std::size_t i = 0; i < 3; ++i)
    a.joints[i] = joint_from(joints[i], path + ".joints[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string p = path + ".links[" + std::to_string(i) + "]";
    a.links[i] = LinkSpec{field<double>(links[i], "length", p), field<double>(links[i], "mass", p),
                          field<double>(links[i], "radius", p)};
  }
  return a;
}

json waypoint(const std::array<double, 6>& w) { return json(w); }

std::array<double, 6> waypoint_from(const json& j, const std::string& key, const std::string& path) {
  const json& w = section(j, key, path + ".");
  if (!w.is_array() || w.size() != 6) throw ModelError(path + "." + key + " must hold 6 numbers");
  std::array<double, 6> out{};
  for (std::size_t i = 0; i < 6; ++i) out[i] = w[i].get<double>();
  return out;
}

}  // namespace

std::string serialize_model(const RobotModel& m) {
  json j;
  j["arms"] = {{"left", arm_to_json(m.left)}, {"right", arm_to_json(m.right)}};
  j["scene"] = {{"chest_height", m.scene.chest_height},
                {"chest_half_extents", to_json(m.scene.chest_half_extents)},
                {"box_standoff", m.scene.box_standoff},
                {"gravity", m.scene.gravity}};
  j["elevator"] = {{"min_height", m.elevator.min_height},
                   {"max_height", m.elevator.max_height},
                   {"max_velocity", m.elevator.max_velocity},
                   {"max_acceleration", m.elevator.max_acceleration},
                   {"max_jerk", m.elevator.max_jerk}};
  j["actuator"] = {{"min_pressure", m.actuator.min_pressure},
                   {"max_pressure", m.actuator.max_pressure},
                   {"effective_area", m.actuator.effective_area},
                   {"time_constant", m.actuator.time_constant}};
  j["contact"] = {{"stiffness", m.contact.stiffness},         {"damping", m.contact.damping},
                  {"mu_box_arm", m.contact.mu_box_arm},       {"mu_box_ground", m.contact.mu_box_ground},
                  {"mu_arm_ground", m.contact.mu_arm_ground}, {"slip_velocity", m.contact.slip_velocity}};
  j["limits"] = {{"hard", m.limits.hard},
                 {"rim_contact", m.limits.rim_contact},
                 {"stiffness_gain", m.limits.stiffness_gain}};
  j["primitive"] = {{"approach_left", waypoint(m.primitive.approach_left)},
                    {"approach_right", waypoint(m.primitive.approach_right)},
                    {"grasp_left", waypoint(m.primitive.grasp_left)},
                    {"grasp_right", waypoint(m.primitive.grasp_right)},
                    {"approach_height", m.primitive.approach_height},
                    {"height_tolerance", m.primitive.height_tolerance},
                    {"ramp_steps", m.primitive.ramp_steps}};
  j["action_filter"] = m.action_filter;
  j["timestep"] = m.timestep;
  return std::string(kModelHeader) + "\n" + j.dump(2) + "\n";
}

RobotModel parse_model(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != kModelHeader)
    throw ModelError("header line must be '" + std::string(kModelHeader) + "', got '" + header + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("model body is not valid JSON: ") + e.what());
  }

  RobotModel m;
  const json& arms = section(j, "arms", "");
  m.left = arm_from(section(arms, "left", "arms."), "left");
  m.right = arm_from(section(arms, "right", "arms."), "right");

  const json& scene = section(j, "scene", "");
  m.scene.chest_height = field<double>(scene, "chest_height", "scene");
  m.scene.chest_half_extents =
      vec3_from(section(scene, "chest_half_extents", "scene."), "scene.chest_half_extents");
  m.scene.box_standoff = field<double>(scene, "box_standoff", "scene");
  m.scene.gravity = field<double>(scene, "gravity", "scene");

  const json& el = section(j, "elevator", "");
  m.elevator.min_height = field<double>(el, "min_height", "elevator");
  m.elevator.max_height = field<double>(el, "max_height", "elevator");
  m.elevator.max_velocity = field<double>(el, "max_velocity", "elevator");
  m.elevator.max_acceleration = field<double>(el, "max_acceleration", "elevator");
  m.elevator.max_jerk = field<double>(el, "max_jerk", "elevator");

  const json& act = section(j, "actuator", "");
  m.actuator.min_pressure = field<double>(act, "min_pressure", "actuator");
  m.actuator.max_pressure = field<double>(act, "max_pressure", "actuator");
  m.actuator.effective_area = field<double>(act, "effective_area", "actuator");
  m.actuator.time_constant = field<double>(act, "time_constant", "actuator");

  const json& con = section(j, "contact", "");
  m.contact.stiffness = field<double>(con, "stiffness", "contact");
  m.contact.damping = field<double>(con, "damping", "contact");
  m.contact.mu_box_arm = field<double>(con, "mu_box_arm", "contact");
  m.contact.mu_box_ground = field<double>(con, "mu_box_ground", "contact");
  m.contact.mu_arm_ground = field<double>(con, "mu_arm_ground", "contact");
  m.contact.slip_velocity = field<double>(con, "slip_velocity", "contact");

  const json& lim = section(j, "limits", "");
  m.limits.hard = field<bool>(lim, "hard", "limits");
  m.limits.rim_contact = field<bool>(lim, "rim_contact", "limits");
  m.limits.stiffness_gain = field<double>(lim, "stiffness_gain", "limits");

  const json& prim = section(j, "primitive", "");
  m.primitive.approach_left = waypoint_from(prim, "approach_left", "primitive");
  m.primitive.approach_right = waypoint_from(prim, "approach_right", "primitive");
  m.primitive.grasp_left = waypoint_from(prim, "grasp_left", "primitive");
  m.primitive.grasp_right = waypoint_from(prim, "grasp_right", "primitive");
  m.primitive.approach_height = field<double>(prim, "approach_height", "primitive");
  m.primitive.height_tolerance = field<double>(prim, "height_tolerance", "primitive");
  m.primitive.ramp_steps = field<int>(prim, "ramp_steps", "primitive");

  m.action_filter = field<double>(j, "action_filter", "");
  m.timestep = field<double>(j, "timestep", "");
  m.validate();
  return m;
}

namespace {

void check_soft_limit_tuning(const RobotModel& m) {
  for (const ArmSpec* arm : {&m.left, &m.right}) {
    for (std::size_t i = 0; i < arm->joints.size(); ++i) {
      const auto& j = arm->joints[i];
      const double bend = steady_state_bend(j, m.actuator);
      if (std::abs(bend - j.max_bend) > 0.1 * j.max_bend) {
        std::ostringstream os;
        os << (arm->side == ArmSide::Left ? "left" : "right") << ".joints[" << i
           << "].stiffness: steady-state bend at max pressure " << bend
           << " rad is not within 10% of max_bend " << j.max_bend;
        throw ModelError(os.str());
      }
    }
  }
}

}  // namespace

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RobotModel m = parse_model(buf.str());
  check_soft_limit_tuning(m);
  return m;
}

void save_model(const RobotModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write model file " + path.string());
  out << serialize_model(model);
}

}  // namespace softchain
