#include "spikerl/config.hpp"

#include <array>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spikerl {
namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& scope,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config section '" + scope +
                                "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("unknown config key: " + scope + it.key());
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void read_field(const json& j, const char* key, Vector3& out) {
  if (auto it = j.find(key); it != j.end()) {
    auto a = it->get<std::array<Scalar, 3>>();
    out = Vector3(a[0], a[1], a[2]);
  }
}

void read_field(const json& j, const char* key, CurriculumCoefficient& out) {
  if (auto it = j.find(key); it != j.end()) {
    auto a = it->get<std::array<Scalar, 2>>();
    out.start = a[0];
    out.end = a[1];
  }
}

json coeff_json(const CurriculumCoefficient& c) {
  return json::array({c.start, c.end});
}

void apply_drone(DroneParams& d, const json& j) {
  expect_keys(j, "env.drone.",
              {"mass", "gravity", "inertia", "arm_length", "yaw_torque_coeff",
               "motor_tau", "rpm_max", "thrust_c0", "thrust_c1", "thrust_c2",
               "dt", "substeps"});
  read_field(j, "mass", d.mass);
  read_field(j, "gravity", d.gravity);
  read_field(j, "inertia", d.inertia);
  read_field(j, "arm_length", d.arm_length);
  read_field(j, "yaw_torque_coeff", d.yaw_torque_coeff);
  read_field(j, "motor_tau", d.motor_tau);
  read_field(j, "rpm_max", d.rpm_max);
  read_field(j, "thrust_c0", d.thrust_c0);
  read_field(j, "thrust_c1", d.thrust_c1);
  read_field(j, "thrust_c2", d.thrust_c2);
  read_field(j, "dt", d.dt);
  read_field(j, "substeps", d.substeps);
}

void apply_curriculum(CurriculumRewardConfig& c, const json& j) {
  expect_keys(j, "env.curriculum.",
              {"c_rp", "c_rv", "c_ra", "c_rq", "c_rs", "c_rab", "num_steps"});
  read_field(j, "c_rp", c.c_rp);
  read_field(j, "c_rv", c.c_rv);
  read_field(j, "c_ra", c.c_ra);
  read_field(j, "c_rq", c.c_rq);
  read_field(j, "c_rs", c.c_rs);
  read_field(j, "c_rab", c.c_rab);
  read_field(j, "num_steps", c.num_steps);
}

void apply_env(EnvConfig& e, const json& j) {
  expect_keys(j, "env.",
              {"drone", "curriculum", "target_position", "episode_cap",
               "encoding", "action_low", "action_high", "crash_tilt_deg",
               "crash_distance", "reset_pos_radius", "reset_vel", "reset_att",
               "reset_rate"});
  if (auto it = j.find("drone"); it != j.end()) apply_drone(e.drone, *it);
  if (auto it = j.find("curriculum"); it != j.end())
    apply_curriculum(e.curriculum, *it);
  read_field(j, "target_position", e.target_position);
  read_field(j, "episode_cap", e.episode_cap);
  if (auto it = j.find("encoding"); it != j.end())
    e.encoding = parse_encoding(it->get<std::string>());
  read_field(j, "action_low", e.action_low);
  read_field(j, "action_high", e.action_high);
  read_field(j, "crash_tilt_deg", e.crash_tilt_deg);
  read_field(j, "crash_distance", e.crash_distance);
  read_field(j, "reset_pos_radius", e.reset_pos_radius);
  read_field(j, "reset_vel", e.reset_vel);
  read_field(j, "reset_att", e.reset_att);
  read_field(j, "reset_rate", e.reset_rate);
}

void apply_td3(Td3Config& t, const json& j) {
  expect_keys(j, "td3.",
              {"gamma", "tau_target", "policy_noise", "noise_clip",
               "explore_noise", "actor_delay", "lr", "alpha", "batch_size",
               "critic_hidden", "action_history"});
  read_field(j, "gamma", t.gamma);
  read_field(j, "tau_target", t.tau_target);
  read_field(j, "policy_noise", t.policy_noise);
  read_field(j, "noise_clip", t.noise_clip);
  read_field(j, "explore_noise", t.explore_noise);
  read_field(j, "actor_delay", t.actor_delay);
  read_field(j, "lr", t.lr);
  read_field(j, "alpha", t.alpha);
  read_field(j, "batch_size", t.batch_size);
  read_field(j, "critic_hidden", t.critic_hidden);
  read_field(j, "action_history", t.action_history);
}

void apply_jsrl(JsrlConfig& c, const json& j) {
  expect_keys(j, "jsrl.",
              {"lambda0", "lambda_decay", "episode_length", "warm_up",
               "stop_streak"});
  read_field(j, "lambda0", c.lambda0);
  read_field(j, "lambda_decay", c.lambda_decay);
  read_field(j, "episode_length", c.episode_length);
  read_field(j, "warm_up", c.warm_up);
  read_field(j, "stop_streak", c.stop_streak);
}

void apply_replay(ReplayConfig& r, const json& j) {
  expect_keys(j, "replay.", {"n_seq", "n_warmup", "stride", "capacity"});
  read_field(j, "n_seq", r.n_seq);
  read_field(j, "n_warmup", r.n_warmup);
  read_field(j, "stride", r.stride);
  read_field(j, "capacity", r.capacity);
}

void apply_slope(SlopeSchedule& s, const json& j) {
  expect_keys(j, "slope.",
              {"mode", "k", "k_min", "k_max", "window", "score_floor",
               "score_ceil", "interval_points"});
  if (auto it = j.find("mode"); it != j.end())
    s.mode = parse_slope_mode(it->get<std::string>());
  read_field(j, "k", s.k);
  read_field(j, "k_min", s.k_min);
  read_field(j, "k_max", s.k_max);
  read_field(j, "window", s.window);
  read_field(j, "score_floor", s.score_floor);
  read_field(j, "score_ceil", s.score_ceil);
  if (auto it = j.find("interval_points"); it != j.end()) {
    s.interval_points.clear();
    for (const auto& p : *it) {
      auto a = p.get<std::array<Scalar, 2>>();
      s.interval_points.emplace_back(static_cast<int>(a[0]), a[1]);
    }
  }
}

void apply_guide(GuideTrainConfig& g, const json& j) {
  expect_keys(j, "guide.",
              {"hidden", "max_epochs", "episodes_per_epoch",
               "gradient_steps_per_epoch", "batch_size", "buffer_capacity"});
  read_field(j, "hidden", g.hidden);
  read_field(j, "max_epochs", g.max_epochs);
  read_field(j, "episodes_per_epoch", g.episodes_per_epoch);
  read_field(j, "gradient_steps_per_epoch", g.gradient_steps_per_epoch);
  read_field(j, "batch_size", g.batch_size);
  read_field(j, "buffer_capacity", g.buffer_capacity);
}

void apply_root(RunConfig& cfg, const json& j) {
  expect_keys(
      j, "",
      {"method", "seed", "out", "scheduling_order", "epochs",
       "env_steps_per_epoch", "gradient_steps_per_epoch", "eval_episodes",
       "parallel_envs", "snn_hidden", "offline_bc_coef", "bc_guide_only",
       "jump_start", "curriculum_stages", "dataset_path", "env", "td3", "jsrl",
       "replay", "slope", "guide"});
  TrainerConfig& t = cfg.trainer;
  if (auto it = j.find("method"); it != j.end())
    t.method = parse_method(it->get<std::string>());
  read_field(j, "seed", t.seed);
  read_field(j, "out", cfg.out_dir);
  read_field(j, "scheduling_order", cfg.scheduling_order);
  read_field(j, "epochs", t.epochs);
  read_field(j, "env_steps_per_epoch", t.env_steps_per_epoch);
  read_field(j, "gradient_steps_per_epoch", t.gradient_steps_per_epoch);
  read_field(j, "eval_episodes", t.eval_episodes);
  read_field(j, "parallel_envs", t.parallel_envs);
  if (auto it = j.find("snn_hidden"); it != j.end()) {
    auto a = it->get<std::array<int, 2>>();
    t.snn_hidden1 = a[0];
    t.snn_hidden2 = a[1];
  }
  read_field(j, "offline_bc_coef", t.offline_bc_coef);
  read_field(j, "bc_guide_only", t.bc_guide_only);
  read_field(j, "jump_start", t.jump_start);
  read_field(j, "curriculum_stages", t.curriculum_stages);
  read_field(j, "dataset_path", t.dataset_path);
  if (auto it = j.find("env"); it != j.end()) apply_env(t.env, *it);
  if (auto it = j.find("td3"); it != j.end()) apply_td3(t.td3, *it);
  if (auto it = j.find("jsrl"); it != j.end()) apply_jsrl(t.jsrl, *it);
  if (auto it = j.find("replay"); it != j.end()) apply_replay(t.replay, *it);
  if (auto it = j.find("slope"); it != j.end()) apply_slope(t.slope, *it);
  if (auto it = j.find("guide"); it != j.end()) apply_guide(t.guide, *it);
}

json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  if (!j.is_object())
    throw std::invalid_argument("config root must be a JSON object");
  return j;
}

}  // namespace

RunConfig default_run_config(TrainMethod method) {
  RunConfig cfg;
  TrainerConfig& t = cfg.trainer;
  t.method = method;
  switch (method) {
    case TrainMethod::bc:
      t.snn_hidden1 = 256;
      t.snn_hidden2 = 128;
      t.replay.capacity = 1000000;
      t.epochs = 300;
      t.env_steps_per_epoch = 0;  // offline: trains from a dataset
      t.td3.policy_noise = 0.0;
      break;
    case TrainMethod::td3bc:
      t.snn_hidden1 = 256;
      t.snn_hidden2 = 256;
      t.replay.capacity = 1000000;
      t.epochs = 300;
      t.env_steps_per_epoch = 0;
      t.td3.policy_noise = 0.0;
      break;
    case TrainMethod::td3bc_jsrl:
      t.snn_hidden1 = 256;
      t.snn_hidden2 = 128;
      t.replay.capacity = 2000000;
      t.epochs = 1000;
      t.env_steps_per_epoch = 2000;  // 2M env steps over the run
      break;
    case TrainMethod::td3:
      t.snn_hidden1 = 256;
      t.snn_hidden2 = 128;
      t.replay.capacity = 2000000;
      t.epochs = 1000;
      t.env_steps_per_epoch = 1000;  // 1M env steps over the run
      break;
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  const TrainerConfig& t = cfg.trainer;
  json j;
  j["method"] = to_string(t.method);
  j["seed"] = t.seed;
  j["out"] = cfg.out_dir;
  j["scheduling_order"] = cfg.scheduling_order;
  j["epochs"] = t.epochs;
  j["env_steps_per_epoch"] = t.env_steps_per_epoch;
  j["gradient_steps_per_epoch"] = t.gradient_steps_per_epoch;
  j["eval_episodes"] = t.eval_episodes;
  j["parallel_envs"] = t.parallel_envs;
  j["snn_hidden"] = {t.snn_hidden1, t.snn_hidden2};
  j["offline_bc_coef"] = t.offline_bc_coef;
  j["bc_guide_only"] = t.bc_guide_only;
  j["jump_start"] = t.jump_start;
  j["curriculum_stages"] = t.curriculum_stages;
  j["dataset_path"] = t.dataset_path;

  const EnvConfig& e = t.env;
  json je;
  je["target_position"] = {e.target_position.x(), e.target_position.y(),
                           e.target_position.z()};
  je["episode_cap"] = e.episode_cap;
  je["encoding"] = to_string(e.encoding);
  je["action_low"] = e.action_low;
  je["action_high"] = e.action_high;
  je["crash_tilt_deg"] = e.crash_tilt_deg;
  je["crash_distance"] = e.crash_distance;
  je["reset_pos_radius"] = e.reset_pos_radius;
  je["reset_vel"] = e.reset_vel;
  je["reset_att"] = e.reset_att;
  je["reset_rate"] = e.reset_rate;
  const DroneParams& d = e.drone;
  je["drone"] = {{"mass", d.mass},
                 {"gravity", d.gravity},
                 {"inertia", {d.inertia.x(), d.inertia.y(), d.inertia.z()}},
                 {"arm_length", d.arm_length},
                 {"yaw_torque_coeff", d.yaw_torque_coeff},
                 {"motor_tau", d.motor_tau},
                 {"rpm_max", d.rpm_max},
                 {"thrust_c0", d.thrust_c0},
                 {"thrust_c1", d.thrust_c1},
                 {"thrust_c2", d.thrust_c2},
                 {"dt", d.dt},
                 {"substeps", d.substeps}};
  const CurriculumRewardConfig& c = e.curriculum;
  je["curriculum"] = {{"c_rp", coeff_json(c.c_rp)},
                      {"c_rv", coeff_json(c.c_rv)},
                      {"c_ra", coeff_json(c.c_ra)},
                      {"c_rq", coeff_json(c.c_rq)},
                      {"c_rs", coeff_json(c.c_rs)},
                      {"c_rab", coeff_json(c.c_rab)},
                      {"num_steps", c.num_steps}};
  j["env"] = std::move(je);

  j["td3"] = {{"gamma", t.td3.gamma},
              {"tau_target", t.td3.tau_target},
              {"policy_noise", t.td3.policy_noise},
              {"noise_clip", t.td3.noise_clip},
              {"explore_noise", t.td3.explore_noise},
              {"actor_delay", t.td3.actor_delay},
              {"lr", t.td3.lr},
              {"alpha", t.td3.alpha},
              {"batch_size", t.td3.batch_size},
              {"critic_hidden", t.td3.critic_hidden},
              {"action_history", t.td3.action_history}};
  j["jsrl"] = {{"lambda0", t.jsrl.lambda0},
               {"lambda_decay", t.jsrl.lambda_decay},
               {"episode_length", t.jsrl.episode_length},
               {"warm_up", t.jsrl.warm_up},
               {"stop_streak", t.jsrl.stop_streak}};
  j["replay"] = {{"n_seq", t.replay.n_seq},
                 {"n_warmup", t.replay.n_warmup},
                 {"stride", t.replay.stride},
                 {"capacity", t.replay.capacity}};
  json points = json::array();
  for (const auto& [epoch, k] : t.slope.interval_points)
    points.push_back({epoch, k});
  j["slope"] = {{"mode", to_string(t.slope.mode)},
                {"k", t.slope.k},
                {"k_min", t.slope.k_min},
                {"k_max", t.slope.k_max},
                {"window", t.slope.window},
                {"score_floor", t.slope.score_floor},
                {"score_ceil", t.slope.score_ceil},
                {"interval_points", std::move(points)}};
  j["guide"] = {{"hidden", t.guide.hidden},
                {"max_epochs", t.guide.max_epochs},
                {"episodes_per_epoch", t.guide.episodes_per_epoch},
                {"gradient_steps_per_epoch", t.guide.gradient_steps_per_epoch},
                {"batch_size", t.guide.batch_size},
                {"buffer_capacity", t.guide.buffer_capacity}};
  return j.dump(2) + "\n";
}

void apply_config_json(RunConfig& cfg, const std::string& text) {
  apply_root(cfg, parse_text(text));
}

std::optional<TrainMethod> peek_method_json(const std::string& text) {
  json j = parse_text(text);
  if (auto it = j.find("method"); it != j.end())
    return parse_method(it->get<std::string>());
  return std::nullopt;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  RunConfig cfg =
      default_run_config(peek_method_json(text).value_or(TrainMethod::td3bc_jsrl));
  apply_config_json(cfg, text);
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << run_config_to_json(cfg);
}

const char* to_string(AttitudeEncoding e) {
  return e == AttitudeEncoding::rotmat ? "rotmat" : "euler";
}

AttitudeEncoding parse_encoding(const std::string& name) {
  if (name == "rotmat") return AttitudeEncoding::rotmat;
  if (name == "euler") return AttitudeEncoding::euler;
  throw std::invalid_argument("unknown attitude encoding: " + name);
}

const char* to_string(SlopeMode m) {
  switch (m) {
    case SlopeMode::fixed:
      return "fixed";
    case SlopeMode::interval:
      return "interval";
    case SlopeMode::adaptive:
      return "adaptive";
  }
  return "adaptive";
}

SlopeMode parse_slope_mode(const std::string& name) {
  if (name == "fixed") return SlopeMode::fixed;
  if (name == "interval") return SlopeMode::interval;
  if (name == "adaptive") return SlopeMode::adaptive;
  throw std::invalid_argument("unknown slope mode: " + name);
}

}  // namespace spikerl
