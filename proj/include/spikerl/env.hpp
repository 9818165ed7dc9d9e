#pragma once

#include <string>
#include <vector>

#include "spikerl/types.hpp"

namespace spikerl {

// Crazyflie-class quadrotor simulated at the 100 Hz control rate.
struct DroneParams {
  Scalar mass = 0.033;     // kg
  Scalar gravity = 9.81;   // m/s^2
  Vector3 inertia = Vector3(1.395e-5, 1.436e-5, 2.173e-5);  // kg m^2, diagonal
  Scalar arm_length = 0.046;            // m, center to motor, X layout
  Scalar yaw_torque_coeff = 0.005964552;  // m, yaw torque per thrust
  Scalar motor_tau = 0.05;              // s, first-order rpm lag
  Scalar rpm_max = 24000.0;
  // per-motor thrust in N: c0 + c1 * rpm + c2 * rpm^2
  Scalar thrust_c0 = 5.5e-4;
  Scalar thrust_c1 = 1.0e-6;
  Scalar thrust_c2 = 2.514941e-10;
  Scalar dt = 0.01;   // s, control step
  int substeps = 1;   // physics sub-steps per control step
};

Scalar motor_thrust(const DroneParams& p, Scalar rpm);
// rpm at which four motors exactly carry the weight.
Scalar hover_rpm(const DroneParams& p);

// One reward coefficient walked linearly from start to end over the
// curriculum stages.
struct CurriculumCoefficient {
  Scalar start = 0.0;
  Scalar end = 0.0;
};

struct CurriculumRewardConfig {
  CurriculumCoefficient c_rp{1.0, 3.5};     // position penalty
  CurriculumCoefficient c_rv{0.01, 0.10};   // velocity penalty
  CurriculumCoefficient c_ra{0.14, 0.50};   // action penalty
  CurriculumCoefficient c_rq{0.25, 0.25};   // attitude penalty
  CurriculumCoefficient c_rs{1.0, 1.0};     // survival bonus
  CurriculumCoefficient c_rab{0.667, 0.667};  // action baseline
  int num_steps = 6;  // stages 0 .. num_steps-1
  int stage = 0;
};

// Endpoint stages return the stored columns unchanged; inner stages
// interpolate start + progress * (end - start).
Scalar curriculum_value(const CurriculumCoefficient& c, int stage,
                        int num_steps);

struct RewardCoefficients {
  Scalar rp, rv, ra, rq, rs, rab;
};

RewardCoefficients active_coefficients(const CurriculumRewardConfig& cfg);
void advance_curriculum(CurriculumRewardConfig& cfg);  // pre: stage can grow

struct QuadrotorState {
  Vector3 position = Vector3::Zero();
  Vector3 velocity = Vector3::Zero();
  Matrix3 rotation = Matrix3::Identity();  // body -> world
  Vector3 angular_rate = Vector3::Zero();  // body frame
  Eigen::Matrix<Scalar, 4, 1> rpm = Eigen::Matrix<Scalar, 4, 1>::Zero();
};

enum class DoneReason { none, crash, timeout };
const char* to_string(DoneReason r);

enum class AttitudeEncoding { rotmat, euler };

struct EnvConfig {
  DroneParams drone;
  CurriculumRewardConfig curriculum;
  Vector3 target_position = Vector3(0.0, 0.0, 1.0);
  int episode_cap = 500;
  AttitudeEncoding encoding = AttitudeEncoding::rotmat;
  Scalar action_low = -2.0;
  Scalar action_high = 2.0;
  Scalar crash_tilt_deg = 80.0;
  Scalar crash_distance = 2.5;
  Scalar reset_pos_radius = 0.3;
  Scalar reset_vel = 0.1;
  Scalar reset_att = 0.1;
  Scalar reset_rate = 0.05;
};

struct StepResult {
  Vector observation;
  Scalar reward = 0.0;
  bool done = false;
  DoneReason reason = DoneReason::none;
  bool diverged = false;
};

// Observation layout (18 dims):
//   [0:3)   position
//   [3:6)   velocity
//   [6:9)   roll, pitch, yaw
//   [9:12)  body angular rates
//   [12:18) extension slots: rotation-matrix rows 0 and 1 (rotmat
//           encoding, default) or zeros (euler encoding)
inline constexpr int kObservationDim = 18;
inline constexpr int kActionDim = 4;

class QuadrotorEnv {
 public:
  explicit QuadrotorEnv(EnvConfig cfg = EnvConfig{});

  Vector reset(RandomStream& rng);
  // Start from an exact state instead of sampling one.
  Vector reset_to(const QuadrotorState& state);

  StepResult step(const Vector& action);

  Vector observation() const;
  Vector3 euler_angles() const;  // (roll, pitch, yaw)
  Scalar reward_for(const Vector& action) const;  // on the current state

  const QuadrotorState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  EnvConfig& config() { return cfg_; }
  int episode_steps() const { return episode_steps_; }
  long lifetime_steps() const { return lifetime_steps_; }
  Scalar hover_rpm_value() const { return hover_rpm_; }
  // action value whose rpm mapping holds hover thrust
  Scalar hover_action_value() const;

 private:
  bool check_done(DoneReason* reason, bool* diverged) const;

  EnvConfig cfg_;
  QuadrotorState state_;
  Scalar hover_rpm_ = 0.0;
  int episode_steps_ = 0;
  long lifetime_steps_ = 0;
};

// CSV rows of (t, state, action, reward, done_reason).
struct TrajectoryLog {
  std::vector<std::string> rows;
  void add(int t, const QuadrotorState& state, const Vector3& euler,
           const Vector& action, Scalar reward, DoneReason reason);
  void save(const std::string& path) const;
};

}  // namespace spikerl
