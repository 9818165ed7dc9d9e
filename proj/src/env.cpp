#include "spikerl/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace spikerl {

Scalar motor_thrust(const DroneParams& p, Scalar rpm) {
  const Scalar t = p.thrust_c0 + p.thrust_c1 * rpm + p.thrust_c2 * rpm * rpm;
  return std::max(t, 0.0);
}

Scalar hover_rpm(const DroneParams& p) {
  const Scalar need = p.mass * p.gravity / 4.0;
  const Scalar c = p.thrust_c0 - need;
  if (p.thrust_c2 <= 0.0) {
    if (p.thrust_c1 <= 0.0)
      throw std::invalid_argument("hover_rpm: thrust curve cannot lift");
    return -c / p.thrust_c1;
  }
  const Scalar disc = p.thrust_c1 * p.thrust_c1 - 4.0 * p.thrust_c2 * c;
  if (disc < 0.0) throw std::invalid_argument("hover_rpm: no real solution");
  return (-p.thrust_c1 + std::sqrt(disc)) / (2.0 * p.thrust_c2);
}

Scalar curriculum_value(const CurriculumCoefficient& c, int stage,
                        int num_steps) {
  if (stage <= 0) return c.start;
  if (stage >= num_steps - 1) return c.end;
  const Scalar progress =
      static_cast<Scalar>(stage) / static_cast<Scalar>(num_steps - 1);
  return c.start + progress * (c.end - c.start);
}

RewardCoefficients active_coefficients(const CurriculumRewardConfig& cfg) {
  RewardCoefficients r;
  r.rp = curriculum_value(cfg.c_rp, cfg.stage, cfg.num_steps);
  r.rv = curriculum_value(cfg.c_rv, cfg.stage, cfg.num_steps);
  r.ra = curriculum_value(cfg.c_ra, cfg.stage, cfg.num_steps);
  r.rq = curriculum_value(cfg.c_rq, cfg.stage, cfg.num_steps);
  r.rs = curriculum_value(cfg.c_rs, cfg.stage, cfg.num_steps);
  r.rab = curriculum_value(cfg.c_rab, cfg.stage, cfg.num_steps);
  return r;
}

void advance_curriculum(CurriculumRewardConfig& cfg) {
  if (cfg.stage + 1 >= cfg.num_steps)
    throw std::logic_error("advance_curriculum: already at the last stage");
  ++cfg.stage;
}

const char* to_string(DoneReason r) {
  switch (r) {
    case DoneReason::none: return "none";
    case DoneReason::crash: return "crash";
    case DoneReason::timeout: return "timeout";
  }
  return "none";
}

namespace {

Matrix3 skew(const Vector3& w) {
  Matrix3 m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

// Exact rotation for a constant body rate over one sub-step.
Matrix3 rotation_exp(const Vector3& w_dt) {
  const Scalar angle = w_dt.norm();
  const Matrix3 k = skew(w_dt);
  if (angle < 1e-12) return Matrix3::Identity() + k;
  const Scalar a = std::sin(angle) / angle;
  const Scalar b = (1.0 - std::cos(angle)) / (angle * angle);
  return Matrix3::Identity() + a * k + b * (k * k);
}

Vector3 euler_from_rotation(const Matrix3& r) {
  // R = Rz(yaw) Ry(pitch) Rx(roll), body -> world
  const Scalar pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const Scalar roll = std::atan2(r(2, 1), r(2, 2));
  const Scalar yaw = std::atan2(r(1, 0), r(0, 0));
  return Vector3(roll, pitch, yaw);
}

bool finite(const QuadrotorState& s) {
  return s.position.allFinite() && s.velocity.allFinite() &&
         s.rotation.allFinite() && s.angular_rate.allFinite() &&
         s.rpm.allFinite();
}

}  // namespace

QuadrotorEnv::QuadrotorEnv(EnvConfig cfg) : cfg_(cfg) {
  if (cfg_.drone.mass <= 0.0 || cfg_.drone.dt <= 0.0 ||
      cfg_.drone.motor_tau <= 0.0 || cfg_.drone.substeps < 1)
    throw std::invalid_argument("QuadrotorEnv: bad physical constants");
  try {
    hover_rpm_ = hover_rpm(cfg_.drone);
  } catch (const std::invalid_argument&) {
    hover_rpm_ = 0.0;  // unliftable curve: still simulable, just can't hover
  }
  reset_to(QuadrotorState{});
}

Scalar QuadrotorEnv::hover_action_value() const {
  const Scalar span = cfg_.action_high - cfg_.action_low;
  return cfg_.action_low + span * hover_rpm_ / cfg_.drone.rpm_max;
}

Vector QuadrotorEnv::reset(RandomStream& rng) {
  QuadrotorState s;
  for (int i = 0; i < 3; ++i)
    s.position[i] = cfg_.target_position[i] +
                    rng.uniform(-cfg_.reset_pos_radius, cfg_.reset_pos_radius);
  for (int i = 0; i < 3; ++i)
    s.velocity[i] = rng.uniform(-cfg_.reset_vel, cfg_.reset_vel);
  const Scalar roll = rng.uniform(-cfg_.reset_att, cfg_.reset_att);
  const Scalar pitch = rng.uniform(-cfg_.reset_att, cfg_.reset_att);
  const Scalar yaw = rng.uniform(-cfg_.reset_att, cfg_.reset_att);
  s.rotation = (Eigen::AngleAxis<Scalar>(yaw, Vector3::UnitZ()) *
                Eigen::AngleAxis<Scalar>(pitch, Vector3::UnitY()) *
                Eigen::AngleAxis<Scalar>(roll, Vector3::UnitX()))
                   .toRotationMatrix();
  for (int i = 0; i < 3; ++i)
    s.angular_rate[i] = rng.uniform(-cfg_.reset_rate, cfg_.reset_rate);
  s.rpm.setConstant(hover_rpm_);
  return reset_to(s);
}

Vector QuadrotorEnv::reset_to(const QuadrotorState& state) {
  state_ = state;
  episode_steps_ = 0;
  return observation();
}

Vector QuadrotorEnv::observation() const {
  Vector obs = Vector::Zero(kObservationDim);
  obs.segment<3>(0) = state_.position;
  obs.segment<3>(3) = state_.velocity;
  obs.segment<3>(6) = euler_angles();
  obs.segment<3>(9) = state_.angular_rate;
  if (cfg_.encoding == AttitudeEncoding::rotmat) {
    obs.segment<3>(12) = state_.rotation.row(0);
    obs.segment<3>(15) = state_.rotation.row(1);
  }
  return obs;
}

Vector3 QuadrotorEnv::euler_angles() const {
  return euler_from_rotation(state_.rotation);
}

Scalar QuadrotorEnv::reward_for(const Vector& action) const {
  const RewardCoefficients c = active_coefficients(cfg_.curriculum);
  const Scalar pos_err =
      (state_.position - cfg_.target_position).squaredNorm();
  const Scalar vel_err = state_.velocity.squaredNorm();
  const Scalar att_err = euler_angles().squaredNorm();
  const Scalar act_err = (action.array() - c.rab).matrix().squaredNorm();
  return c.rs - c.rp * pos_err - c.rv * vel_err - c.rq * att_err -
         c.ra * act_err;
}

bool QuadrotorEnv::check_done(DoneReason* reason, bool* diverged) const {
  *diverged = false;
  if (!finite(state_)) {
    *reason = DoneReason::crash;
    *diverged = true;
    return true;
  }
  const Vector3 euler = euler_angles();
  const Scalar tilt_limit = cfg_.crash_tilt_deg * M_PI / 180.0;
  const bool crashed =
      state_.position.z() < 0.0 || std::abs(euler.x()) > tilt_limit ||
      std::abs(euler.y()) > tilt_limit ||
      (state_.position - cfg_.target_position).norm() > cfg_.crash_distance;
  if (crashed) {
    *reason = DoneReason::crash;
    return true;
  }
  if (episode_steps_ >= cfg_.episode_cap) {
    *reason = DoneReason::timeout;
    return true;
  }
  *reason = DoneReason::none;
  return false;
}

StepResult QuadrotorEnv::step(const Vector& action) {
  if (action.size() != kActionDim)
    throw std::invalid_argument("QuadrotorEnv::step: action size mismatch");
  const DroneParams& d = cfg_.drone;

  Eigen::Matrix<Scalar, 4, 1> rpm_des;
  const Scalar span = cfg_.action_high - cfg_.action_low;
  for (int i = 0; i < 4; ++i) {
    const Scalar a =
        std::clamp(action[i], cfg_.action_low, cfg_.action_high);
    rpm_des[i] = (a - cfg_.action_low) / span * d.rpm_max;
  }

  const Scalar dt = d.dt / d.substeps;
  const Scalar lx = d.arm_length / std::sqrt(2.0);
  // X layout: motors at (+,+), (+,-), (-,-), (-,+); alternating spin.
  const Scalar mx[4] = {lx, lx, -lx, -lx};
  const Scalar my[4] = {lx, -lx, -lx, lx};
  const Scalar spin[4] = {-1.0, 1.0, -1.0, 1.0};

  for (int sub = 0; sub < d.substeps; ++sub) {
    state_.rpm += (rpm_des - state_.rpm) * (dt / d.motor_tau);

    Scalar thrust = 0.0;
    Vector3 torque = Vector3::Zero();
    for (int i = 0; i < 4; ++i) {
      const Scalar t = motor_thrust(d, state_.rpm[i]);
      thrust += t;
      torque.x() += my[i] * t;
      torque.y() -= mx[i] * t;
      torque.z() += spin[i] * d.yaw_torque_coeff * t;
    }

    const Vector3 accel = Vector3(0.0, 0.0, -d.gravity) +
                          state_.rotation * Vector3(0.0, 0.0, thrust) / d.mass;
    state_.position += state_.velocity * dt;
    state_.velocity += accel * dt;

    const Vector3 w = state_.angular_rate;
    const Vector3 w_dot = d.inertia.cwiseInverse().cwiseProduct(
        torque - w.cross(d.inertia.cwiseProduct(w)));
    state_.rotation = state_.rotation * rotation_exp(w * dt);
    state_.angular_rate += w_dot * dt;
  }

  ++episode_steps_;
  ++lifetime_steps_;

  StepResult r;
  r.done = check_done(&r.reason, &r.diverged);
  r.reward = r.diverged ? 0.0 : reward_for(action);
  r.observation = r.diverged ? Vector(Vector::Zero(kObservationDim))
                             : observation();
  return r;
}

void TrajectoryLog::add(int t, const QuadrotorState& state,
                        const Vector3& euler, const Vector& action,
                        Scalar reward, DoneReason reason) {
  char buf[512];
  std::snprintf(
      buf, sizeof(buf),
      "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,"
      "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s",
      t, state.position.x(), state.position.y(), state.position.z(),
      state.velocity.x(), state.velocity.y(), state.velocity.z(), euler.x(),
      euler.y(), euler.z(), state.angular_rate.x(), state.angular_rate.y(),
      state.angular_rate.z(), state.rpm[0], state.rpm[1], state.rpm[2],
      state.rpm[3], action.size() > 0 ? action[0] : 0.0,
      action.size() > 1 ? action[1] : 0.0, action.size() > 2 ? action[2] : 0.0,
      action.size() > 3 ? action[3] : 0.0, reward, to_string(reason));
  rows.push_back(buf);
}

void TrajectoryLog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("TrajectoryLog: cannot write " + path);
  out << "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,wx,wy,wz,rpm0,rpm1,rpm2,rpm3,"
         "a0,a1,a2,a3,reward,done_reason\n";
  for (const auto& row : rows) out << row << '\n';
}

}  // namespace spikerl
