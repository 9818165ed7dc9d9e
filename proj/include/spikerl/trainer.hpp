#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spikerl/env.hpp"
#include "spikerl/networks.hpp"
#include "spikerl/replay.hpp"
#include "spikerl/surrogate.hpp"
#include "spikerl/types.hpp"

namespace spikerl {

// ------------------------------------------------------------- configs ----

struct Td3Config {
  Scalar gamma = 0.99;
  Scalar tau_target = 0.01;
  Scalar policy_noise = 0.2;   // target action smoothing, stddev
  Scalar noise_clip = 0.5;
  Scalar explore_noise = 0.1;  // rollout exploration, stddev
  int actor_delay = 2;
  Scalar lr = 1e-3;
  Scalar alpha = 2.0;  // Q-term weight before the mean|Q| normalizer
  int batch_size = 32;
  std::vector<int> critic_hidden = {256, 256};
  int action_history = 32;  // privileged input looks this far back

  void validate() const;  // throws std::invalid_argument
};

struct JsrlConfig {
  Scalar lambda0 = 0.2;
  Scalar lambda_decay = 0.99;
  int episode_length = 500;
  int warm_up = 50;
  int stop_streak = 10;  // consecutive eval episodes the guide must survive
};

// BC coefficient after `epoch` decay steps, in closed form.
Scalar bc_lambda(const JsrlConfig& cfg, int epoch);

// Steps the guide controls at a given epoch: the handover point N grows
// linearly from 0 until only the warm-up period is covered.
int guide_steps_for_epoch(const JsrlConfig& cfg, int epoch, int total_epochs);

// ------------------------------------------------------------ networks ----

// Dense actor with a bounded output, used to jump-start episodes.
struct GuidePolicy {
  MlpNetwork net;
  Scalar squash = 2.0;  // action = squash * tanh(net(x))

  Vector act(const Vector& priv) const;
  Matrix act(const Matrix& priv) const;
};

GuidePolicy make_guide_policy(int input_dim, const std::vector<int>& hidden,
                              int act_dim, RandomStream& rng);

struct TwinCritics {
  MlpNetwork q1, q2;
};

TwinCritics make_twin_critics(int input_dim, const std::vector<int>& hidden,
                              RandomStream& rng);

// Rolling action window for building privileged inputs during rollouts.
class ActionHistory {
 public:
  ActionHistory(int history, int act_dim);
  void push(const Vector& action);
  void reset();
  // observation followed by the remembered actions, newest last
  Vector privileged(const Vector& obs) const;

 private:
  int history_;
  int act_dim_;
  std::deque<Vector> window_;
};

// ------------------------------------------------------- update pieces ----

// Masked-in steps of a slice batch, flattened for the time-invariant
// critics. Target actions come from the target policy unrolled over each
// slice's next-observation sequence, smoothed and clipped.
struct SequenceBatch {
  std::vector<SequenceSlice> slices;
  std::vector<std::vector<std::uint8_t>> masks;  // include-masks per slice
  long masked_steps = 0;

  Matrix priv;            // critic input dim x masked_steps
  Matrix actions;         // buffer actions
  Vector rewards;
  Vector done;
  Matrix priv_next;
  Matrix target_actions;  // smoothed target-policy actions at s_next
};

SequenceBatch assemble_batch(const std::vector<SequenceSlice>& slices,
                             const SnnPolicy& target_policy,
                             const Td3Config& td3, const JsrlConfig& jsrl,
                             Scalar action_low, Scalar action_high,
                             RandomStream& noise_rng, bool need_critic);

// y = r + gamma * (1 - d) * min_j Q'_j(priv_next, target_action)
Vector compute_td_targets(const TwinCritics& targets,
                          const SequenceBatch& batch, Scalar gamma);

// One regression step of both critics toward y. Returns the mean of the
// two squared-error losses.
Scalar critic_update(TwinCritics& critics, Adam& opt1, Adam& opt2,
                     const SequenceBatch& batch, const Vector& y);

struct ActorUpdateStats {
  Scalar loss = 0.0;     // combined objective on this batch
  Scalar q_term = 0.0;   // -(alpha/mean|Q|) * mean Q, zero when Q unused
  Scalar bc_term = 0.0;  // mean squared action gap against the buffer
  Scalar mean_abs_q = 0.0;
  bool skipped = false;  // all-masked batch
};

// Masked sequence update of the spiking actor:
//   loss = -(alpha / mean|Q1|) * mean Q1(priv, pi(s)) + lambda * mean |pi(s) - a|^2
// with means over masked-in steps. `use_q` off reduces to behavioral
// cloning; `bc_sources` restricts the BC term to transitions of that
// source when set.
ActorUpdateStats actor_update(SnnPolicy& policy, Adam& opt,
                              const MlpNetwork& q1,
                              const SequenceBatch& batch, Scalar lambda,
                              const Td3Config& td3, bool use_q,
                              std::optional<TransitionSource> bc_sources =
                                  std::nullopt);

// --------------------------------------------------------- experience ----

struct RolloutResult {
  Episode episode;
  int guide_controlled = 0;  // steps taken by the guide
  Scalar total_reward = 0.0;
  DoneReason end = DoneReason::none;
};

// One episode where the guide acts for the first `guide_steps` control
// steps (the spiking policy observes forward-only, warming its hidden
// state) and the spiking policy acts afterwards with exploration noise.
// Pass guide = nullptr or guide_steps = 0 for a pure policy rollout.
RolloutResult jsrl_rollout(QuadrotorEnv& env, const GuidePolicy* guide,
                           SnnPolicy& policy, int guide_steps,
                           const Td3Config& td3, RandomStream& env_rng,
                           RandomStream& noise_rng);

struct EvalResult {
  Scalar mean_reward = 0.0;
  Scalar mean_length = 0.0;
  std::vector<Scalar> rewards;
  std::vector<Scalar> lengths;
};

EvalResult evaluate_policy(QuadrotorEnv& env, SnnPolicy& policy, int episodes,
                           RandomStream& rng);
EvalResult evaluate_guide(QuadrotorEnv& env, const GuidePolicy& guide,
                          int episodes, RandomStream& rng);

// True when `stop_streak` consecutive noise-free episodes each survive at
// least the warm-up period.
bool guide_meets_stop_criterion(QuadrotorEnv& env, const GuidePolicy& guide,
                                const JsrlConfig& jsrl, RandomStream& rng);

struct GuideTrainConfig {
  std::vector<int> hidden = {64, 64};
  int max_epochs = 200;
  int episodes_per_epoch = 10;
  int gradient_steps_per_epoch = 200;
  int batch_size = 256;
  long buffer_capacity = 200000;
};

struct GuideTrainResult {
  GuidePolicy guide;
  bool criterion_met = false;
  int epochs_used = 0;
};

// Transition-level TD3 on privileged inputs; stops at the hover criterion
// or when the epoch budget runs out (criterion_met reports which).
GuideTrainResult train_guide(QuadrotorEnv& env, const Td3Config& td3,
                             const JsrlConfig& jsrl,
                             const GuideTrainConfig& cfg, SeedStreams& seeds);

// ------------------------------------------------------------- driver ----

enum class TrainMethod { bc, td3, td3bc, td3bc_jsrl };
TrainMethod parse_method(const std::string& name);  // throws on unknown
const char* to_string(TrainMethod m);
bool method_is_offline(TrainMethod m);

struct TrainerConfig {
  TrainMethod method = TrainMethod::td3bc_jsrl;
  std::uint64_t seed = 1;

  EnvConfig env;
  Td3Config td3;
  JsrlConfig jsrl;
  ReplayConfig replay;
  SlopeSchedule slope = make_adaptive_slope();
  GuideTrainConfig guide;

  int snn_hidden1 = 256;
  int snn_hidden2 = 128;

  int epochs = 1000;
  long env_steps_per_epoch = 2000;  // online collection budget
  int gradient_steps_per_epoch = 64;
  int eval_episodes = 20;
  int parallel_envs = 1;

  Scalar offline_bc_coef = 1.0;  // fixed BC weight for td3bc
  bool bc_guide_only = false;    // ablation: BC term on guide data only
  bool jump_start = true;        // ablation: disable the guide prefix
  int curriculum_stages = 6;     // advanced evenly across the epoch budget

  std::string dataset_path;  // offline methods load this episode log
};

struct EpochRow {
  int epoch = 0;
  Scalar mean_reward = 0.0;
  Scalar mean_episode_len = 0.0;
  Scalar lambda = 0.0;
  Scalar k_slope = 0.0;
  int curriculum_stage = 0;
  Scalar critic_loss = 0.0;
  Scalar actor_loss = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochRow& row);

struct TrainResult {
  SnnPolicy policy;
  GuidePolicy guide;  // empty net unless the method trained one
  std::vector<EpochRow> history;
  long total_env_steps = 0;  // training-env steps (excludes evaluation)
  bool guide_trained = false;
  bool aborted = false;
  std::string abort_reason;  // divergence diagnostics
};

// Optional per-epoch observer (progress printing); called after each row.
using EpochCallback = std::function<void(const EpochRow&)>;

TrainResult run_training(const TrainerConfig& cfg,
                         EpochCallback on_epoch = nullptr);

}  // namespace spikerl
