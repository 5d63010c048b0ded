#include <softchain/articulated.hpp>

namespace softchain {

MassProperties MassProperties::operator+(const MassProperties& other) const {
  MassProperties out;
  out.mass = mass + other.mass;
  if (out.mass <= 0.0) return out;
  out.com = (mass * com + other.mass * other.com) / out.mass;
  auto shifted = [&](const MassProperties& p) {
    const Vec3 d = p.com - out.com;
    return Mat3(p.inertia + p.mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose()));
  };
  out.inertia = shifted(*this) + shifted(other);
  return out;
}

MassProperties MassProperties::cylinder(double mass, double radius, double height,
                                        const Vec3& center) {
  MassProperties p;
  p.mass = mass;
  p.com = center;
  const double lateral = mass * (3.0 * radius * radius + height * height) / 12.0;
  p.inertia = Vec3(lateral, lateral, 0.5 * mass * radius * radius).asDiagonal();
  return p;
}

Matrix6d spatial_inertia(double mass, const Vec3& com, const Mat3& inertia_about_com) {
  const Mat3 c = skew(com);
  Matrix6d out;
  out.topLeftCorner<3, 3>() = inertia_about_com + mass * c * c.transpose();
  out.topRightCorner<3, 3>() = mass * c;
  out.bottomLeftCorner<3, 3>() = mass * c.transpose();
  out.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return out;
}

Vector6d motion_cross(const Vector6d& v, const Vector6d& m) {
  const Vec3 w = v.head<3>(), lin = v.tail<3>();
  Vector6d out;
  out.head<3>() = w.cross(m.head<3>());
  out.tail<3>() = lin.cross(m.head<3>()) + w.cross(m.tail<3>());
  return out;
}

Vector6d force_cross(const Vector6d& v, const Vector6d& f) {
  const Vec3 w = v.head<3>(), lin = v.tail<3>();
  Vector6d out;
  out.head<3>() = w.cross(f.head<3>()) + lin.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

RevoluteChain::RevoluteChain(std::vector<RevoluteJoint> joints) : joints_(std::move(joints)) {
  const std::size_t n = joints_.size();
  frames_.resize(n);
  motion_.resize(n);
  velocity_.resize(n);
  inertia_.resize(n);
  massive_.resize(n);
  for (std::size_t i = 0; i < n; ++i) massive_[i] = joints_[i].body.mass > 0.0;
}

void RevoluteChain::update(const Pose& base, const Vec3& base_velocity, const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qd) {
  base_ = base;
  base_velocity_ = base_velocity;
  Vector6d v;
  v << Vec3::Zero(), base_velocity;
  const Pose* parent = &base_;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    const RevoluteJoint& j = joints_[i];
    const Pose joint_frame = *parent * j.offset;
    const double c = std::cos(q[static_cast<Eigen::Index>(i)]);
    const double s = std::sin(q[static_cast<Eigen::Index>(i)]);
    Mat3 rot = Mat3::Identity();
    const int a = j.axis, b = (a + 1) % 3, d = (a + 2) % 3;
    rot(b, b) = c;
    rot(b, d) = -s;
    rot(d, b) = s;
    rot(d, d) = c;
    frames_[i] = {joint_frame.rotation * rot, joint_frame.position};
    const Vec3 axis_w = joint_frame.rotation.col(a);
    motion_[i] << axis_w, joint_frame.position.cross(axis_w);
    v += motion_[i] * qd[static_cast<Eigen::Index>(i)];
    velocity_[i] = v;
    if (massive_[i]) {
      const Pose& f = frames_[i];
      inertia_[i] = spatial_inertia(j.body.mass, f * j.body.com,
                                    f.rotation * j.body.inertia * f.rotation.transpose());
    }
    parent = &frames_[i];
  }
}

void RevoluteChain::mass_matrix(Eigen::MatrixXd& out) const {
  const Eigen::Index n = dof();
  out.resize(n, n);
  Matrix6d composite = Matrix6d::Zero();
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    if (massive_[static_cast<std::size_t>(j)]) composite += inertia_[static_cast<std::size_t>(j)];
    const Vector6d f = composite * motion_[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double h = motion_[static_cast<std::size_t>(i)].dot(f);
      out(i, j) = h;
      out(j, i) = h;
    }
  }
}

void RevoluteChain::bias_forces(const Vec3& base_acceleration_minus_gravity,
                                Eigen::VectorXd& out) const {
  const std::size_t n = joints_.size();
  out.resize(static_cast<Eigen::Index>(n));
  std::vector<Vector6d> force(n);
  Vector6d a;
  a << Vec3::Zero(), base_acceleration_minus_gravity;
  Vector6d v_prev;
  v_prev << Vec3::Zero(), base_velocity_;
  for (std::size_t i = 0; i < n; ++i) {
    // S_i qd_i = v_i - v_parent; the axis moves with the parent body.
    a += motion_cross(velocity_[i], velocity_[i] - v_prev);
    if (massive_[i]) {
      force[i] = inertia_[i] * a + force_cross(velocity_[i], inertia_[i] * velocity_[i]);
    } else {
      force[i].setZero();
    }
    v_prev = velocity_[i];
  }
  Vector6d acc = Vector6d::Zero();
  for (std::size_t i = n; i-- > 0;) {
    acc += force[i];
    out[static_cast<Eigen::Index>(i)] = motion_[i].dot(acc);
  }
}

void RevoluteChain::point_jacobian(Eigen::Index body, const Vec3& point, Matrix3Xd& out) const {
  out.setZero(3, dof());
  for (Eigen::Index j = 0; j <= body; ++j) {
    const Vec3 a = motion_[static_cast<std::size_t>(j)].head<3>();
    out.col(j) = a.cross(point - frames_[static_cast<std::size_t>(j)].position);
  }
}

Vec3 RevoluteChain::point_velocity(Eigen::Index body, const Vec3& point) const {
  if (body < 0) return base_velocity_;
  const Vector6d& v = velocity_[static_cast<std::size_t>(body)];
  return v.tail<3>() + v.head<3>().cross(point);
}

double RevoluteChain::kinetic_energy() const {
  double t = 0.0;
  for (std::size_t i = 0; i < joints_.size(); ++i)
    if (massive_[i]) t += 0.5 * velocity_[i].dot(inertia_[i] * velocity_[i]);
  return t;
}

double RevoluteChain::gravity_potential(double gravity) const {
  double u = 0.0;
  for (std::size_t i = 0; i < joints_.size(); ++i)
    if (massive_[i]) u += joints_[i].body.mass * gravity * (frames_[i] * joints_[i].body.com).z();
  return u;
}

}  // namespace softchain
