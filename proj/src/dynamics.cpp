#include <softchain/dynamics.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace softchain {

namespace {

constexpr double kChestSphereRadius = 0.05;

bool finite_vec(const Eigen::VectorXd& v) { return v.allFinite(); }

Mat3 box_jacobian_angular(const Vec3& point, const Vec3& center) { return -skew(Vec3(point - center)); }

// One side of a contact: an arm body, the box, or a body with prescribed velocity.
struct Side {
  enum class Kind { Fixed, Left, Right, Box } kind = Kind::Fixed;
  int body = -1;
  Vec3 velocity = Vec3::Zero();  // prescribed part of the point velocity
};

struct PendingContact {
  ContactPoint point;
  Side a, b;
  Vec3 f0;  // force on a at zero unknown velocity
  Mat3 d;   // linearized damping
  double weight;
};

Side::Kind arm_kind(ArmSide side) { return side == ArmSide::Left ? Side::Kind::Left : Side::Kind::Right; }

}  // namespace

// ---------------------------------------------------------------------------------------------

bool SimState::finite() const {
  auto arm_ok = [](const ArmState& a) {
    if (!finite_vec(a.q) || !finite_vec(a.qd)) return false;
    return std::all_of(a.pressure.begin(), a.pressure.end(), [](double p) { return std::isfinite(p); });
  };
  return arm_ok(left) && arm_ok(right) && std::isfinite(h) && std::isfinite(hd) &&
         box.rotation.allFinite() && box.position.allFinite() && box_velocity.allFinite() &&
         box_angular_velocity.allFinite() && std::isfinite(time);
}

void SimState::validate() const {
  if (!finite()) throw std::invalid_argument("SimState: non-finite value");
  for (const ArmState* a : {&left, &right}) {
    if (a->q.size() != a->qd.size()) throw std::invalid_argument("SimState: q/qd size mismatch");
    for (double p : a->pressure)
      if (p < 0.0 || p > 300.0) throw std::invalid_argument("SimState: pressure outside [0, 300] kPa");
  }
  if (!is_rotation(box.rotation)) throw std::invalid_argument("SimState: box rotation not orthonormal");
}

CommandVector CommandVector::uniform(double h_des, double pressure) {
  CommandVector u;
  u.h_des = h_des;
  u.left.fill(pressure);
  u.right.fill(pressure);
  return u;
}

void CommandVector::validate(const ElevatorSpec& elevator, const ActuatorSpec& actuator) const {
  if (!(h_des >= elevator.min_height && h_des <= elevator.max_height))
    throw std::invalid_argument("CommandVector: h_des outside the elevator range");
  for (const auto* arm : {&left, &right})
    for (double p : *arm)
      if (!(p >= actuator.min_pressure && p <= actuator.max_pressure))
        throw std::invalid_argument("CommandVector: pressure outside the actuator range");
}

void advance_elevator(SimState& state, double h_des, double dt, const ElevatorSpec& spec) {
  const double target = std::clamp(h_des, spec.min_height, spec.max_height);
  if (target != state.plan_target) {
    state.plan = elevator_plan(state.h, state.hd, target, spec);
    state.plan_start = state.time;
    state.plan_target = target;
  }
  const ElevatorSample s = state.plan.sample(state.time + dt - state.plan_start);
  state.h = s.position;
  state.hd = s.velocity;
}

// ---------------------------------------------------------------------------------------------

Simulator::Simulator(RobotModel model, BoxSpec box)
    : model_(std::move(model)), box_(box) {
  model_.validate();
  box_.validate();
  left_ = build_arm(model_.left, model_.limits);
  right_ = build_arm(model_.right, model_.limits);

  // Sphere grid flush with the chest front (+x) and bottom (-z) faces.
  const Vec3 he = model_.scene.chest_half_extents;
  const double r = kChestSphereRadius;
  auto grid = [&](double extent) {
    const int count = std::max(2, static_cast<int>(std::ceil(2.0 * extent / r)) + 1);
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(-extent + 2.0 * extent * i / (count - 1));
    return v;
  };
  const auto ys = grid(he.y() - r), zs = grid(he.z() - r), xs = grid(he.x() - r);
  const double spacing_yz = std::min(2.0 * (he.y() - r) / (ys.size() - 1), 2.0 * (he.z() - r) / (zs.size() - 1));
  for (double y : ys)
    for (double z : zs) chest_spheres_.push_back({Vec3(he.x() - r, y, z), r, std::min(1.0, spacing_yz / r)});
  for (double x : xs)
    for (double y : ys)
      if (x < he.x() - r - 1e-9)
        chest_spheres_.push_back({Vec3(x, y, -he.z() + r), r, std::min(1.0, spacing_yz / r)});
}

Pose Simulator::chest_pose(double h) const {
  Pose p;
  p.position = Vec3(0.0, 0.0, model_.scene.chest_height + h);
  return p;
}

Pose Simulator::arm_base(ArmSide side, double h) const { return chest_pose(h) * layout(side).mount; }

SimState Simulator::home_state(const Pose& box_pose, double pressure) const {
  SimState s;
  for (ArmSide side : {ArmSide::Left, ArmSide::Right}) {
    ArmState& a = s.arm(side);
    a.q = Eigen::VectorXd::Zero(layout(side).dof());
    a.qd = Eigen::VectorXd::Zero(layout(side).dof());
    a.pressure.fill(pressure);
  }
  s.box = box_pose;
  s.box.position.z() = box_.half_extents().z();
  return s;
}

void Simulator::update_arm(ArmSide side, const SimState& state) {
  const ArmState& a = state.arm(side);
  layout_mut(side).chain.update(arm_base(side, state.h), Vec3(0, 0, state.hd), a.q, a.qd);
}

Pose Simulator::joint_base(ArmSide side, int joint) const {
  const ArmLayout& l = layout(side);
  return l.point_pose(l.joint_base[static_cast<std::size_t>(joint)]);
}

Pose Simulator::joint_tip(ArmSide side, int joint) const {
  const ArmLayout& l = layout(side);
  return l.point_pose(l.joint_tip[static_cast<std::size_t>(joint)]);
}

std::array<Pose, kJointsPerArm> Simulator::joint_relative_poses(ArmSide side, const SimState& state) {
  update_arm(side, state);
  std::array<Pose, kJointsPerArm> out;
  for (int j = 0; j < kJointsPerArm; ++j)
    out[static_cast<std::size_t>(j)] = joint_base(side, j).inverse() * joint_tip(side, j);
  return out;
}

void Simulator::mass_matrix(ArmSide side, const Eigen::VectorXd& q, Eigen::MatrixXd& out) {
  ArmLayout& l = layout_mut(side);
  l.chain.update(l.mount, Vec3::Zero(), q, Eigen::VectorXd::Zero(q.size()));
  l.chain.mass_matrix(out);
}

Eigen::VectorXd Simulator::tendon_forces(ArmSide side, const Eigen::VectorXd& q,
                                         const PressureVector& pressure) const {
  const ArmLayout& l = layout(side);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(q.size());
  for (int i = 0; i < l.uj_count(); ++i) {
    const UJInfo& u = l.ujs[static_cast<std::size_t>(i)];
    std::array<double, 4> p{};
    for (int c = 0; c < kChambersPerJoint; ++c)
      p[static_cast<std::size_t>(c)] = pressure[static_cast<std::size_t>(kChambersPerJoint * u.joint + c)];
    tau.segment<2>(2 * i) = uj_tendon_forces(q[2 * i], q[2 * i + 1], u.half_length, u.tendon_radius,
                                             p, model_.actuator.effective_area);
  }
  return tau;
}

namespace {

// Potential, gradient and Gauss-Newton Hessian of the limit penalties of one UJ.
struct LimitTerm {
  double potential = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

LimitTerm uj_limit(const UJInfo& u, double phi1, double phi2, const JointLimitSpec& spec) {
  LimitTerm t;
  if (spec.hard) {
    const double phis[2] = {phi1, phi2};
    for (int a = 0; a < 2; ++a) {
      const double excess = std::abs(phis[a]) - u.limit;
      if (excess > 0.0) {
        t.potential += 0.5 * u.limit_stiffness * excess * excess;
        t.gradient[a] += u.limit_stiffness * excess * (phis[a] > 0 ? 1.0 : -1.0);
        t.hessian(a, a) += u.limit_stiffness;
      }
    }
  }
  if (spec.rim_contact) {
    const RimGap gap = rim_penetration(phi1, phi2, u.disk_radius, u.clearance);
    if (gap.depth > 0.0) {
      t.potential += 0.5 * u.rim_stiffness * gap.depth * gap.depth;
      t.gradient += u.rim_stiffness * gap.depth * gap.gradient;
      t.hessian += u.rim_stiffness * gap.gradient * gap.gradient.transpose();
    }
  }
  return t;
}

}  // namespace

Eigen::VectorXd Simulator::limit_forces(ArmSide side, const Eigen::VectorXd& q) const {
  const ArmLayout& l = layout(side);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(q.size());
  for (int i = 0; i < l.uj_count(); ++i)
    f.segment<2>(2 * i) = -uj_limit(l.ujs[static_cast<std::size_t>(i)], q[2 * i], q[2 * i + 1], model_.limits).gradient;
  return f;
}

double Simulator::limit_potential(ArmSide side, const Eigen::VectorXd& q) const {
  const ArmLayout& l = layout(side);
  double v = 0.0;
  for (int i = 0; i < l.uj_count(); ++i)
    v += uj_limit(l.ujs[static_cast<std::size_t>(i)], q[2 * i], q[2 * i + 1], model_.limits).potential;
  return v;
}

EnergyBreakdown Simulator::energy(const SimState& state) {
  EnergyBreakdown e;
  const double g = model_.scene.gravity;
  for (ArmSide side : {ArmSide::Left, ArmSide::Right}) {
    update_arm(side, state);
    const ArmLayout& l = layout(side);
    const ArmState& a = state.arm(side);
    e.kinetic += l.chain.kinetic_energy();
    e.gravity += l.chain.gravity_potential(g);
    for (int i = 0; i < l.uj_count(); ++i) {
      const double k = l.ujs[static_cast<std::size_t>(i)].stiffness;
      e.spring += 0.5 * k * (a.q[2 * i] * a.q[2 * i] + a.q[2 * i + 1] * a.q[2 * i + 1]);
    }
    e.limits += limit_potential(side, a.q);
  }
  const Mat3 iw = state.box.rotation * box_.inertia() * state.box.rotation.transpose();
  e.kinetic += 0.5 * box_.mass * state.box_velocity.squaredNorm() +
               0.5 * state.box_angular_velocity.dot(iw * state.box_angular_velocity);
  e.gravity += box_.mass * g * state.box.position.z();
  return e;
}

bool Simulator::robot_overlaps_box(const Pose& box_pose, double h) {
  SimState s = home_state(box_pose);
  s.box = box_pose;
  s.h = h;
  const Vec3 he = box_.half_extents();
  for (ArmSide side : {ArmSide::Left, ArmSide::Right}) {
    update_arm(side, s);
    const ArmLayout& l = layout(side);
    for (const auto& sp : l.spheres) {
      const Pose& f = sp.body < 0 ? l.chain.base() : l.chain.frame(sp.body);
      if (sphere_overlaps_box(f * sp.center, sp.radius, box_pose, he)) return true;
    }
  }
  const Pose chest = chest_pose(h);
  for (const auto& cs : chest_spheres_)
    if (sphere_overlaps_box(chest * cs.center, cs.radius, box_pose, he)) return true;
  return false;
}

bool Simulator::torso_sweep_overlaps_box(const Pose& box_pose) {
  const ElevatorSpec& e = model_.elevator;
  const Vec3 he = box_.half_extents();
  const int samples = std::max(2, static_cast<int>(std::ceil((e.max_height - e.min_height) / 0.05)) + 1);
  for (int i = 0; i < samples; ++i) {
    const double h = e.min_height + (e.max_height - e.min_height) * i / (samples - 1);
    const Pose chest = chest_pose(h);
    for (const auto& cs : chest_spheres_)
      if (sphere_overlaps_box(chest * cs.center, cs.radius, box_pose, he)) return true;
  }
  return false;
}

int Simulator::robot_box_contacts() const {
  int n = 0;
  for (const auto& c : contacts_)
    if (c.b.kind == BodyRef::Kind::Box && (c.a.is_arm() || c.a.kind == BodyRef::Kind::Torso)) ++n;
  return n;
}

// ---------------------------------------------------------------------------------------------

SimState Simulator::step(const SimState& state, const CommandVector& u, double dt,
                         const StepInput& input) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  SimState next = state;
  const ActuatorSpec& act = model_.actuator;
  for (ArmSide side : {ArmSide::Left, ArmSide::Right}) {
    const PressureVector& cmd = side == ArmSide::Left ? u.left : u.right;
    PressureVector& p = next.arm(side).pressure;
    for (std::size_t c = 0; c < p.size(); ++c)
      p[c] = pressure_step(p[c], std::clamp(cmd[c], act.min_pressure, act.max_pressure), dt,
                           act.time_constant, act.min_pressure, act.max_pressure);
  }
  advance_elevator(next, u.h_des, dt, model_.elevator);
  const double base_acc = (next.hd - state.hd) / dt;
  const double g = model_.scene.gravity;
  const Vec3 torso_velocity(0, 0, next.hd);

  // Per-arm implicit system.
  Eigen::MatrixXd a_mat[2];
  Eigen::VectorXd rhs[2];
  Eigen::Matrix<double, Eigen::Dynamic, 6> coupling[2];
  const ArmSide sides[2] = {ArmSide::Left, ArmSide::Right};
  for (int s = 0; s < 2; ++s) {
    const ArmSide side = sides[s];
    const ArmState& a = state.arm(side);
    update_arm(side, state);
    const ArmLayout& l = layout(side);
    Eigen::MatrixXd& h = s == 0 ? h_left_ : h_right_;
    Eigen::VectorXd& b = s == 0 ? b_left_ : b_right_;
    l.chain.mass_matrix(h);
    l.chain.bias_forces(Vec3(0, 0, base_acc + g), b);
    const Eigen::VectorXd tau = tendon_forces(side, a.q, next.arm(side).pressure);

    a_mat[s] = h;
    rhs[s] = h * a.qd + dt * (tau - b);
    for (int i = 0; i < l.uj_count(); ++i) {
      const UJInfo& info = l.ujs[static_cast<std::size_t>(i)];
      for (int k = 2 * i; k < 2 * i + 2; ++k) {
        a_mat[s](k, k) += dt * info.damping + dt * dt * info.stiffness;
        rhs[s][k] -= dt * info.stiffness * a.q[k];
      }
      const LimitTerm lim = uj_limit(info, a.q[2 * i], a.q[2 * i + 1], model_.limits);
      if (lim.potential > 0.0) {
        a_mat[s].block<2, 2>(2 * i, 2 * i) += dt * dt * lim.hessian;
        rhs[s].segment<2>(2 * i) -= dt * lim.gradient;
      }
    }
    coupling[s].setZero(l.dof(), 6);
  }

  // Box block.
  const Vec3 box_x = state.box.position;
  const Mat3 iw = state.box.rotation * box_.inertia() * state.box.rotation.transpose();
  Eigen::Matrix<double, 6, 6> a_box = Eigen::Matrix<double, 6, 6>::Zero();
  a_box.topLeftCorner<3, 3>() = box_.mass * Mat3::Identity();
  a_box.bottomRightCorner<3, 3>() = iw;
  Eigen::Matrix<double, 6, 1> rhs_box;
  const Vec3& v0 = state.box_velocity;
  const Vec3& w0 = state.box_angular_velocity;
  rhs_box.head<3>() = box_.mass * v0 + dt * (Vec3(0, 0, -box_.mass * g) + input.box_force);
  rhs_box.tail<3>() = iw * w0 - dt * w0.cross(iw * w0);

  // Contact detection and linearization.
  const ContactSpec& cs = model_.contact;
  std::vector<PendingContact> pending;
  const Vec3 box_he = box_.half_extents();
  const double box_reach = box_he.norm();

  auto side_velocity = [&](const Side& side, const Vec3& point) -> Vec3 {
    switch (side.kind) {
      case Side::Kind::Fixed: return side.velocity;
      case Side::Kind::Box: return v0 + w0.cross(point - box_x);
      default: {
        const ArmLayout& l = layout(side.kind == Side::Kind::Left ? ArmSide::Left : ArmSide::Right);
        return l.chain.point_velocity(side.body, point);
      }
    }
  };

  auto add = [&](const ContactGeometry& geo, const Side& sa, const Side& sb, BodyRef ra, BodyRef rb,
                 double mu, double weight) {
    const Vec3 rel = side_velocity(sa, geo.point) - side_velocity(sb, geo.point);
    const double k = cs.stiffness * weight, c = cs.damping * weight;
    const double rate = -geo.normal.dot(rel);
    const double fn = k * geo.depth + c * rate;
    if (fn <= 0.0) return;
    PenaltyLaw law{k, c, mu, cs.slip_velocity};
    const Vec3 vt = rel - geo.normal.dot(rel) * geo.normal;
    const double ct = friction_damping(law, fn, vt.norm());
    const Mat3 nn = geo.normal * geo.normal.transpose();
    PendingContact pc;
    pc.d = (c + dt * k) * nn + ct * (Mat3::Identity() - nn);
    pc.a = sa;
    pc.b = sb;
    pc.weight = weight;
    // Prescribed parts of the point velocities enter the constant term.
    Vec3 known = Vec3::Zero();
    if (sa.kind == Side::Kind::Fixed || sa.kind == Side::Kind::Left || sa.kind == Side::Kind::Right)
      known += sa.velocity;
    if (sb.kind == Side::Kind::Fixed || sb.kind == Side::Kind::Left || sb.kind == Side::Kind::Right)
      known -= sb.velocity;
    pc.f0 = k * geo.depth * geo.normal - pc.d * known;
    pc.point.position = geo.point;
    pc.point.normal = geo.normal;
    pc.point.depth = geo.depth;
    pc.point.a = ra;
    pc.point.b = rb;
    pending.push_back(pc);
  };

  const Side floor_side{};
  const Side box_side{Side::Kind::Box, -1, Vec3::Zero()};
  for (int s = 0; s < 2; ++s) {
    const ArmSide side = sides[s];
    const ArmLayout& l = layout(side);
    const BodyRef::Kind kind = side == ArmSide::Left ? BodyRef::Kind::LeftArm : BodyRef::Kind::RightArm;
    for (const auto& sp : l.spheres) {
      const Pose& f = sp.body < 0 ? l.chain.base() : l.chain.frame(sp.body);
      const Vec3 center = f * sp.center;
      Side arm_side = sp.body < 0 ? Side{Side::Kind::Fixed, -1, torso_velocity}
                                  : Side{arm_kind(side), sp.body, torso_velocity};
      const BodyRef ref = sp.body < 0 ? BodyRef{BodyRef::Kind::Torso, -1} : BodyRef{kind, sp.body};
      if (auto geo = sphere_floor(center, sp.radius))
        add(*geo, arm_side, floor_side, ref, {BodyRef::Kind::Floor, -1}, cs.mu_arm_ground, sp.weight);
      if ((center - box_x).norm() < box_reach + sp.radius)
        if (auto geo = sphere_box(center, sp.radius, state.box, box_he))
          add(*geo, arm_side, box_side, ref, {BodyRef::Kind::Box, -1}, cs.mu_box_arm, sp.weight);
    }
  }
  const Pose chest = chest_pose(state.h);
  const Side torso_side{Side::Kind::Fixed, -1, torso_velocity};
  for (const auto& sp : chest_spheres_) {
    const Vec3 center = chest * sp.center;
    if ((center - box_x).norm() >= box_reach + sp.radius) continue;
    if (auto geo = sphere_box(center, sp.radius, state.box, box_he))
      add(*geo, torso_side, box_side, {BodyRef::Kind::Torso, -1}, {BodyRef::Kind::Box, -1},
          cs.mu_box_arm, sp.weight);
  }
  {
    std::vector<ContactGeometry> corners;
    box_floor(state.box, box_he, corners);
    for (const auto& geo : corners)
      add(geo, box_side, floor_side, {BodyRef::Kind::Box, -1}, {BodyRef::Kind::Floor, -1},
          cs.mu_box_ground, 1.0);
  }

  // Assemble contact terms. Jacobians map unknown velocities to point velocities.
  std::vector<Matrix3Xd> jac_a(pending.size()), jac_b(pending.size());
  auto jacobian = [&](const Side& side, const Vec3& point, Matrix3Xd& out) {
    switch (side.kind) {
      case Side::Kind::Fixed: out.resize(3, 0); break;
      case Side::Kind::Box:
        out.resize(3, 6);
        out.leftCols<3>() = Mat3::Identity();
        out.rightCols<3>() = box_jacobian_angular(point, box_x);
        break;
      default: {
        const ArmLayout& l = layout(side.kind == Side::Kind::Left ? ArmSide::Left : ArmSide::Right);
        l.chain.point_jacobian(side.body, point, out);
        out.conservativeResize(3, side.body + 1);
      }
    }
  };
  auto index = [](Side::Kind k) { return k == Side::Kind::Left ? 0 : 1; };
  for (std::size_t i = 0; i < pending.size(); ++i) {
    PendingContact& pc = pending[i];
    const Vec3& p = pc.point.position;
    jacobian(pc.a, p, jac_a[i]);
    jacobian(pc.b, p, jac_b[i]);
    const Matrix3Xd& ja = jac_a[i];
    const Matrix3Xd& jb = jac_b[i];
    // Diagonal blocks and right-hand sides.
    for (int which = 0; which < 2; ++which) {
      const Side& sd = which == 0 ? pc.a : pc.b;
      const Matrix3Xd& j = which == 0 ? ja : jb;
      const double sign = which == 0 ? 1.0 : -1.0;
      if (sd.kind == Side::Kind::Fixed) continue;
      const Eigen::MatrixXd dj = pc.d * j;
      if (sd.kind == Side::Kind::Box) {
        a_box += dt * j.transpose() * dj;
        rhs_box += sign * dt * j.transpose() * pc.f0;
      } else {
        const int s = index(sd.kind);
        const Eigen::Index k = j.cols();
        a_mat[s].topLeftCorner(k, k).noalias() += dt * j.transpose() * dj;
        rhs[s].head(k).noalias() += sign * dt * j.transpose() * pc.f0;
      }
    }
    // Off-diagonal arm/box coupling (no arm/arm contacts exist).
    const Side* arm = nullptr;
    const Matrix3Xd* ja_arm = nullptr;
    const Matrix3Xd* jb_box = nullptr;
    if ((pc.a.kind == Side::Kind::Left || pc.a.kind == Side::Kind::Right) && pc.b.kind == Side::Kind::Box) {
      arm = &pc.a;
      ja_arm = &ja;
      jb_box = &jb;
    }
    if (arm) {
      const int s = index(arm->kind);
      const Eigen::Index k = ja_arm->cols();
      coupling[s].topRows(k).noalias() -= dt * ja_arm->transpose() * (pc.d * *jb_box);
    }
  }

  // Block elimination on the box.
  Eigen::VectorXd x_arm[2];
  Eigen::Matrix<double, 6, 6> schur = a_box;
  Eigen::Matrix<double, 6, 1> rhs_schur = rhs_box;
  Eigen::MatrixXd solved[2];
  for (int s = 0; s < 2; ++s) {
    Eigen::LLT<Eigen::MatrixXd> llt(a_mat[s]);
    if (llt.info() != Eigen::Success) throw IntegrationError("step: arm system not positive definite", state);
    Eigen::MatrixXd rhs_all(a_mat[s].rows(), 7);
    rhs_all.col(0) = rhs[s];
    rhs_all.rightCols<6>() = coupling[s];
    solved[s] = llt.solve(rhs_all);
    schur.noalias() -= coupling[s].transpose() * solved[s].rightCols<6>();
    rhs_schur.noalias() -= coupling[s].transpose() * solved[s].col(0);
  }
  const Eigen::Matrix<double, 6, 1> x_box = schur.ldlt().solve(rhs_schur);
  for (int s = 0; s < 2; ++s) x_arm[s] = solved[s].col(0) - solved[s].rightCols<6>() * x_box;

  // Integrate.
  for (int s = 0; s < 2; ++s) {
    ArmState& a = next.arm(sides[s]);
    a.qd = x_arm[s];
    a.q = state.arm(sides[s]).q + dt * a.qd;
  }
  const Vec3 v1 = x_box.head<3>();
  const Vec3 w1 = x_box.tail<3>();
  next.box_velocity = v1;
  next.box_angular_velocity = w1;
  next.box.position = box_x + 0.5 * dt * (v0 + v1);
  const double angle = dt * w1.norm();
  Eigen::Quaterniond q(state.box.rotation);
  if (angle > 0.0) q = Eigen::Quaterniond(Eigen::AngleAxisd(angle, w1.normalized())) * q;
  q.normalize();
  next.box.rotation = q.toRotationMatrix();
  next.time = state.time + dt;

  // Report the applied forces.
  contacts_.clear();
  contacts_.reserve(pending.size());
  auto unknown_velocity = [&](const Side& side, const Matrix3Xd& j) -> Vec3 {
    switch (side.kind) {
      case Side::Kind::Fixed: return Vec3::Zero();
      case Side::Kind::Box: return j * x_box;
      default: return j * x_arm[index(side.kind)].head(j.cols());
    }
  };
  for (std::size_t i = 0; i < pending.size(); ++i) {
    PendingContact& pc = pending[i];
    const Vec3 w = unknown_velocity(pc.a, jac_a[i]) - unknown_velocity(pc.b, jac_b[i]);
    pc.point.force = pc.f0 - pc.d * w;
    contacts_.push_back(pc.point);
  }

  if (!next.finite()) throw IntegrationError("step: non-finite state at t = " + std::to_string(next.time), state);
  return next;
}

// ---------------------------------------------------------------------------------------------

void write_state_header(std::ostream& out, const SimState& state) {
  out << "t,h,hd,box_x,box_y,box_z,box_qw,box_qx,box_qy,box_qz,box_vx,box_vy,box_vz,box_wx,box_wy,box_wz";
  for (const char* arm : {"l", "r"}) {
    const auto n = (arm[0] == 'l' ? state.left : state.right).q.size();
    for (Eigen::Index i = 0; i < n; ++i) out << ",q" << arm << i;
  }
  out << '\n';
}

void write_state_row(std::ostream& out, const SimState& s) {
  const Eigen::Quaterniond q(s.box.rotation);
  out.precision(17);
  out << s.time << ',' << s.h << ',' << s.hd;
  for (int i = 0; i < 3; ++i) out << ',' << s.box.position[i];
  out << ',' << q.w() << ',' << q.x() << ',' << q.y() << ',' << q.z();
  for (int i = 0; i < 3; ++i) out << ',' << s.box_velocity[i];
  for (int i = 0; i < 3; ++i) out << ',' << s.box_angular_velocity[i];
  for (const ArmState* a : {&s.left, &s.right})
    for (Eigen::Index i = 0; i < a->q.size(); ++i) out << ',' << a->q[i];
  out << '\n';
}

}  // namespace softchain
