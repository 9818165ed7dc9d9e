#include "spikerl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace spikerl {

// ------------------------------------------------------------- configs ----

void Td3Config::validate() const {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("Td3Config: gamma must lie in (0,1)");
  if (tau_target <= 0.0 || tau_target > 1.0)
    throw std::invalid_argument("Td3Config: tau_target must lie in (0,1]");
  if (actor_delay < 1 || batch_size < 1 || action_history < 1)
    throw std::invalid_argument("Td3Config: counts must be positive");
  if (lr <= 0.0) throw std::invalid_argument("Td3Config: lr must be positive");
}

Scalar bc_lambda(const JsrlConfig& cfg, int epoch) {
  return cfg.lambda0 * std::pow(cfg.lambda_decay, static_cast<Scalar>(epoch));
}

int guide_steps_for_epoch(const JsrlConfig& cfg, int epoch, int total_epochs) {
  const int cap = cfg.episode_length - cfg.warm_up;
  const Scalar growth = static_cast<Scalar>(cfg.episode_length) /
                        static_cast<Scalar>(std::max(1, total_epochs));
  const int n = std::min(
      cap, static_cast<int>(std::llround(growth * static_cast<Scalar>(epoch))));
  return std::max(cfg.episode_length - n, cfg.warm_up);
}

// ------------------------------------------------------------ networks ----

Vector GuidePolicy::act(const Vector& priv) const {
  Vector z = mlp_forward(net, priv);
  return (squash * z.array().tanh()).matrix();
}

Matrix GuidePolicy::act(const Matrix& priv) const {
  Matrix z = mlp_forward(net, priv);
  return (squash * z.array().tanh()).matrix();
}

GuidePolicy make_guide_policy(int input_dim, const std::vector<int>& hidden,
                              int act_dim, RandomStream& rng) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(act_dim);
  GuidePolicy g;
  g.net = make_mlp(sizes, Activation::rectifier, rng);
  return g;
}

TwinCritics make_twin_critics(int input_dim, const std::vector<int>& hidden,
                              RandomStream& rng) {
  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  TwinCritics c;
  c.q1 = make_mlp(sizes, Activation::rectifier, rng);
  c.q2 = make_mlp(sizes, Activation::rectifier, rng);
  return c;
}

ActionHistory::ActionHistory(int history, int act_dim)
    : history_(history), act_dim_(act_dim) {}

void ActionHistory::push(const Vector& action) {
  window_.push_back(action);
  while (static_cast<int>(window_.size()) > history_) window_.pop_front();
}

void ActionHistory::reset() { window_.clear(); }

Vector ActionHistory::privileged(const Vector& obs) const {
  Vector out = Vector::Zero(obs.size() + static_cast<long>(history_) * act_dim_);
  out.head(obs.size()) = obs;
  const int have = static_cast<int>(window_.size());
  long at = obs.size() + static_cast<long>(history_ - have) * act_dim_;
  for (const Vector& a : window_) {
    out.segment(at, act_dim_) = a;
    at += act_dim_;
  }
  return out;
}

// ------------------------------------------------------------- helpers ----

namespace {

void adam_step(MlpNetwork& net, Adam& opt, const MlpGrads& grads) {
  Vector params = net.to_flat();
  opt.step(params, grads.to_flat());
  net.from_flat(params);
}

void adam_step(SnnPolicy& net, Adam& opt, const SnnGrads& grads) {
  Vector params = net.to_flat();
  opt.step(params, grads.to_flat());
  net.from_flat(params);
}

std::vector<Vector> slice_states(const SequenceSlice& s) {
  std::vector<Vector> obs(s.length);
  for (int i = 0; i < s.length; ++i) obs[i] = s.at(i).state;
  return obs;
}

std::vector<Vector> slice_next_states(const SequenceSlice& s) {
  std::vector<Vector> obs(s.length);
  for (int i = 0; i < s.length; ++i) obs[i] = s.at(i).next_state;
  return obs;
}

Matrix stack_input(const Matrix& priv, const Matrix& actions) {
  Matrix x(priv.rows() + actions.rows(), priv.cols());
  x.topRows(priv.rows()) = priv;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

}  // namespace

// ------------------------------------------------------- update pieces ----

SequenceBatch assemble_batch(const std::vector<SequenceSlice>& slices,
                             const SnnPolicy& target_policy,
                             const Td3Config& td3, const JsrlConfig& jsrl,
                             Scalar action_low, Scalar action_high,
                             RandomStream& noise_rng, bool need_critic) {
  SequenceBatch b;
  b.slices = slices;
  b.masks.reserve(slices.size());
  for (const auto& s : slices) {
    b.masks.push_back(s.warm_up_mask(s.length, jsrl.warm_up));
    for (int i = 0; i < s.length; ++i)
      if (b.masks.back()[i]) ++b.masked_steps;
  }
  if (!need_critic || b.masked_steps == 0) return b;

  const int obs_dim = static_cast<int>(slices.front().at(0).state.size());
  const int act_dim = static_cast<int>(slices.front().at(0).action.size());
  const long priv_dim = obs_dim + static_cast<long>(td3.action_history) * act_dim;

  b.priv.resize(priv_dim, b.masked_steps);
  b.actions.resize(act_dim, b.masked_steps);
  b.rewards.resize(b.masked_steps);
  b.done.resize(b.masked_steps);
  b.priv_next.resize(priv_dim, b.masked_steps);
  b.target_actions.resize(act_dim, b.masked_steps);

  long col = 0;
  for (size_t n = 0; n < slices.size(); ++n) {
    const SequenceSlice& s = slices[n];
    // the target policy re-lives the shifted window to produce a'_{t+1}
    auto next_fwd = snn_forward_sequence(target_policy, slice_next_states(s));
    for (int i = 0; i < s.length; ++i) {
      if (!b.masks[n][i]) continue;
      const Transition& t = s.at(i);
      b.priv.col(col) = s.privileged_input(i, td3.action_history);
      b.actions.col(col) = t.action;
      b.rewards[col] = t.reward;
      b.done[col] = t.done ? 1.0 : 0.0;
      b.priv_next.col(col) = s.privileged_next_input(i, td3.action_history);
      Vector a = next_fwd.actions[i];
      for (int d = 0; d < act_dim; ++d) {
        const Scalar eps = std::clamp(noise_rng.normal() * td3.policy_noise,
                                      -td3.noise_clip, td3.noise_clip);
        a[d] = std::clamp(a[d] + eps, action_low, action_high);
      }
      b.target_actions.col(col) = a;
      ++col;
    }
  }
  return b;
}

Vector compute_td_targets(const TwinCritics& targets,
                          const SequenceBatch& batch, Scalar gamma) {
  const Matrix x = stack_input(batch.priv_next, batch.target_actions);
  const Matrix q1 = mlp_forward(targets.q1, x);
  const Matrix q2 = mlp_forward(targets.q2, x);
  Vector y(batch.masked_steps);
  for (long i = 0; i < batch.masked_steps; ++i) {
    const Scalar q = std::min(q1(0, i), q2(0, i));
    y[i] = batch.rewards[i] + gamma * (1.0 - batch.done[i]) * q;
  }
  return y;
}

Scalar critic_update(TwinCritics& critics, Adam& opt1, Adam& opt2,
                     const SequenceBatch& batch, const Vector& y) {
  const long m = batch.masked_steps;
  if (m == 0) return 0.0;
  const Matrix x = stack_input(batch.priv, batch.actions);

  Scalar loss = 0.0;
  MlpNetwork* nets[2] = {&critics.q1, &critics.q2};
  Adam* opts[2] = {&opt1, &opt2};
  for (int j = 0; j < 2; ++j) {
    MlpTape tape = mlp_forward_tape(*nets[j], x);
    Matrix err = tape.act.back() - y.transpose();  // 1 x m
    loss += err.array().square().mean();
    Matrix out_grad = (2.0 / static_cast<Scalar>(m)) * err;
    auto back = mlp_backward(*nets[j], tape, out_grad);
    adam_step(*nets[j], *opts[j], back.grads);
  }
  return 0.5 * loss;
}

ActorUpdateStats actor_update(SnnPolicy& policy, Adam& opt,
                              const MlpNetwork& q1, const SequenceBatch& batch,
                              Scalar lambda, const Td3Config& td3, bool use_q,
                              std::optional<TransitionSource> bc_sources) {
  ActorUpdateStats stats;
  const long m = batch.masked_steps;
  if (m == 0) {
    stats.skipped = true;
    return stats;
  }
  const Scalar inv_m = 1.0 / static_cast<Scalar>(m);
  const int act_dim = policy.act_dim();

  // unroll the live policy over every slice, keeping tapes for BPTT
  std::vector<SnnForwardResult> fwd;
  fwd.reserve(batch.slices.size());
  for (const auto& s : batch.slices)
    fwd.push_back(snn_forward_sequence(policy, slice_states(s)));

  // flatten the masked-in policy actions in batch column order
  Matrix pi(act_dim, m);
  {
    long col = 0;
    for (size_t n = 0; n < batch.slices.size(); ++n)
      for (int i = 0; i < batch.slices[n].length; ++i)
        if (batch.masks[n][i]) pi.col(col++) = fwd[n].actions[i];
  }

  // dLoss/dpi per masked step
  Matrix pi_grad = Matrix::Zero(act_dim, m);
  if (use_q) {
    const Matrix x = stack_input(batch.priv, pi);
    MlpTape tape = mlp_forward_tape(q1, x);
    const Matrix q = tape.act.back();  // 1 x m
    stats.mean_abs_q = q.array().abs().mean();
    const Scalar scale = td3.alpha / (stats.mean_abs_q + 1e-8);
    stats.q_term = -scale * q.mean();
    Matrix out_grad = Matrix::Constant(1, m, -scale * inv_m);
    auto back = mlp_backward(q1, tape, out_grad);
    pi_grad += back.input_grad.bottomRows(act_dim);
  }

  Scalar bc_sum = 0.0;
  {
    long col = 0;
    for (size_t n = 0; n < batch.slices.size(); ++n) {
      const SequenceSlice& s = batch.slices[n];
      for (int i = 0; i < s.length; ++i) {
        if (!batch.masks[n][i]) continue;
        const Transition& t = s.at(i);
        if (!bc_sources || t.source == *bc_sources) {
          const Vector diff = pi.col(col) - t.action;
          bc_sum += diff.squaredNorm();
          pi_grad.col(col) += (2.0 * lambda * inv_m) * diff;
        }
        ++col;
      }
    }
  }
  stats.bc_term = bc_sum * inv_m;
  stats.loss = stats.q_term + lambda * stats.bc_term;

  // scatter the flat gradients back onto each slice and run BPTT
  SnnGrads grads = zero_grads(policy);
  long col = 0;
  for (size_t n = 0; n < batch.slices.size(); ++n) {
    const SequenceSlice& s = batch.slices[n];
    std::vector<Vector> out_grads(s.length, Vector::Zero(act_dim));
    for (int i = 0; i < s.length; ++i)
      if (batch.masks[n][i]) out_grads[i] = pi_grad.col(col++);
    grads.add(snn_backward_sequence(policy, fwd[n].tape, out_grads,
                                    batch.masks[n], policy.slope));
  }
  adam_step(policy, opt, grads);
  return stats;
}

// --------------------------------------------------------- experience ----

RolloutResult jsrl_rollout(QuadrotorEnv& env, const GuidePolicy* guide,
                           SnnPolicy& policy, int guide_steps,
                           const Td3Config& td3, RandomStream& env_rng,
                           RandomStream& noise_rng) {
  RolloutResult out;
  Vector obs = env.reset(env_rng);
  policy.reset_state();
  ActionHistory hist(td3.action_history, policy.act_dim());
  const Scalar lo = env.config().action_low;
  const Scalar hi = env.config().action_high;

  for (int t = 0;; ++t) {
    Vector a;
    TransitionSource src;
    if (guide != nullptr && t < guide_steps) {
      a = guide->act(hist.privileged(obs));
      policy.act(obs);  // warm the hidden state without acting
      src = TransitionSource::guide;
      ++out.guide_controlled;
    } else {
      a = policy.act(obs);
      for (int d = 0; d < a.size(); ++d)
        a[d] = std::clamp(a[d] + noise_rng.normal() * td3.explore_noise, lo,
                          hi);
      src = TransitionSource::policy;
    }
    hist.push(a);

    StepResult r = env.step(a);
    Transition tr;
    tr.state = obs;
    tr.action = a;
    tr.reward = r.reward;
    tr.done = r.done;
    tr.next_state = r.observation;
    tr.source = src;
    out.episode.push_back(std::move(tr));
    out.total_reward += r.reward;
    obs = r.observation;
    if (r.done) {
      out.end = r.reason;
      break;
    }
  }
  return out;
}

namespace {

template <class ActFn>
EvalResult evaluate_with(QuadrotorEnv& env, ActFn&& act, int episodes,
                         RandomStream& rng, Scalar lo, Scalar hi) {
  EvalResult ev;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(rng);
    Scalar total = 0.0;
    int len = 0;
    for (;;) {
      Vector a = act(obs);
      for (int d = 0; d < a.size(); ++d) a[d] = std::clamp(a[d], lo, hi);
      StepResult r = env.step(a);
      total += r.reward;
      ++len;
      obs = r.observation;
      if (r.done) break;
    }
    ev.rewards.push_back(total);
    ev.lengths.push_back(static_cast<Scalar>(len));
    ev.mean_reward += total;
    ev.mean_length += static_cast<Scalar>(len);
  }
  if (episodes > 0) {
    ev.mean_reward /= episodes;
    ev.mean_length /= episodes;
  }
  return ev;
}

}  // namespace

EvalResult evaluate_policy(QuadrotorEnv& env, SnnPolicy& policy, int episodes,
                           RandomStream& rng) {
  const Scalar lo = env.config().action_low, hi = env.config().action_high;
  return evaluate_with(
      env,
      [&policy, &env](const Vector& obs) {
        if (env.episode_steps() == 0) policy.reset_state();
        return policy.act(obs);
      },
      episodes, rng, lo, hi);
}

EvalResult evaluate_guide(QuadrotorEnv& env, const GuidePolicy& guide,
                          int episodes, RandomStream& rng) {
  const Scalar lo = env.config().action_low, hi = env.config().action_high;
  const int act_dim = guide.net.output_dim();
  const int history =
      (guide.net.input_dim() - kObservationDim) / std::max(1, act_dim);
  ActionHistory hist(history, act_dim);
  return evaluate_with(
      env,
      [&](const Vector& obs) {
        if (env.episode_steps() == 0) hist.reset();
        Vector a = guide.act(hist.privileged(obs));
        hist.push(a);
        return a;
      },
      episodes, rng, lo, hi);
}

bool guide_meets_stop_criterion(QuadrotorEnv& env, const GuidePolicy& guide,
                                const JsrlConfig& jsrl, RandomStream& rng) {
  EvalResult ev = evaluate_guide(env, guide, jsrl.stop_streak, rng);
  for (Scalar len : ev.lengths)
    if (len < static_cast<Scalar>(jsrl.warm_up)) return false;
  return true;
}

GuideTrainResult train_guide(QuadrotorEnv& env, const Td3Config& td3,
                             const JsrlConfig& jsrl,
                             const GuideTrainConfig& cfg, SeedStreams& seeds) {
  RandomStream init_rng(split_seed(seeds.init, 101));
  RandomStream sampler_rng(split_seed(seeds.sampler, 101));
  RandomStream noise_rng(split_seed(seeds.noise, 101));
  RandomStream env_rng(split_seed(seeds.env, 101));
  RandomStream eval_rng(split_seed(seeds.env, 102));

  const int obs_dim = kObservationDim;
  const int act_dim = kActionDim;
  const int priv_dim = obs_dim + td3.action_history * act_dim;
  const Scalar lo = env.config().action_low, hi = env.config().action_high;

  GuideTrainResult out;
  out.guide = make_guide_policy(priv_dim, cfg.hidden, act_dim, init_rng);
  GuidePolicy guide_target = out.guide;
  TwinCritics critics =
      make_twin_critics(priv_dim + act_dim, cfg.hidden, init_rng);
  TwinCritics targets = critics;
  Adam actor_opt{td3.lr}, c1_opt{td3.lr}, c2_opt{td3.lr};

  ReplayConfig rc;
  rc.capacity = cfg.buffer_capacity;
  ReplayBuffer buffer(rc);

  QuadrotorEnv eval_env(env.config());

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    out.epochs_used = epoch + 1;
    // collect privileged-state episodes with exploration noise
    for (int ep = 0; ep < cfg.episodes_per_epoch; ++ep) {
      Vector obs = env.reset(env_rng);
      ActionHistory hist(td3.action_history, act_dim);
      Episode episode;
      for (;;) {
        const Vector priv = hist.privileged(obs);
        Vector a = out.guide.act(priv);
        for (int d = 0; d < act_dim; ++d)
          a[d] = std::clamp(a[d] + noise_rng.normal() * td3.explore_noise, lo,
                            hi);
        hist.push(a);
        StepResult r = env.step(a);
        Transition tr;
        tr.state = priv;
        tr.action = a;
        tr.reward = r.reward;
        tr.done = r.done;
        tr.next_state = hist.privileged(r.observation);
        tr.source = TransitionSource::guide;
        episode.push_back(std::move(tr));
        obs = r.observation;
        if (r.done) break;
      }
      buffer.push_episode(std::move(episode));
    }

    for (int g = 0; g < cfg.gradient_steps_per_epoch; ++g) {
      auto refs = buffer.sample_transitions(cfg.batch_size, sampler_rng);
      if (!refs) break;
      const long bsz = static_cast<long>(refs->size());
      Matrix s(priv_dim, bsz), a(act_dim, bsz), s2(priv_dim, bsz);
      Vector r(bsz), d(bsz);
      for (long i = 0; i < bsz; ++i) {
        const Transition& t = (*(*refs)[i].episode)[(*refs)[i].index];
        s.col(i) = t.state;
        a.col(i) = t.action;
        s2.col(i) = t.next_state;
        r[i] = t.reward;
        d[i] = t.done ? 1.0 : 0.0;
      }

      // smoothed target actions and clipped double-Q regression
      Matrix a2 = guide_target.act(s2);
      for (long i = 0; i < bsz; ++i)
        for (int k = 0; k < act_dim; ++k) {
          const Scalar eps = std::clamp(noise_rng.normal() * td3.policy_noise,
                                        -td3.noise_clip, td3.noise_clip);
          a2(k, i) = std::clamp(a2(k, i) + eps, lo, hi);
        }
      const Matrix x2 = stack_input(s2, a2);
      const Matrix q1t = mlp_forward(targets.q1, x2);
      const Matrix q2t = mlp_forward(targets.q2, x2);
      Vector y(bsz);
      for (long i = 0; i < bsz; ++i)
        y[i] = r[i] + td3.gamma * (1.0 - d[i]) *
                          std::min(q1t(0, i), q2t(0, i));

      const Matrix x = stack_input(s, a);
      MlpNetwork* nets[2] = {&critics.q1, &critics.q2};
      Adam* opts[2] = {&c1_opt, &c2_opt};
      for (int j = 0; j < 2; ++j) {
        MlpTape tape = mlp_forward_tape(*nets[j], x);
        Matrix err = tape.act.back() - y.transpose();
        Matrix out_grad = (2.0 / static_cast<Scalar>(bsz)) * err;
        auto back = mlp_backward(*nets[j], tape, out_grad);
        adam_step(*nets[j], *opts[j], back.grads);
      }

      if (g % td3.actor_delay == 0) {
        MlpTape atape = mlp_forward_tape(out.guide.net, s);
        const Matrix z = atape.act.back();
        const Matrix tanh_z = z.array().tanh().matrix();
        const Matrix acts = out.guide.squash * tanh_z;
        MlpTape qtape = mlp_forward_tape(critics.q1, stack_input(s, acts));
        Matrix out_grad =
            Matrix::Constant(1, bsz, -1.0 / static_cast<Scalar>(bsz));
        auto qback = mlp_backward(critics.q1, qtape, out_grad);
        const Matrix da = qback.input_grad.bottomRows(act_dim);
        // through the squash: da/dz = squash * (1 - tanh^2)
        const Matrix dz =
            (da.array() *
             (out.guide.squash * (1.0 - tanh_z.array().square())))
                .matrix();
        auto aback = mlp_backward(out.guide.net, atape, dz);
        adam_step(out.guide.net, actor_opt, aback.grads);

        soft_update(guide_target.net, out.guide.net, td3.tau_target);
        soft_update(targets.q1, critics.q1, td3.tau_target);
        soft_update(targets.q2, critics.q2, td3.tau_target);
      }
    }

    if (guide_meets_stop_criterion(eval_env, out.guide, jsrl, eval_rng)) {
      out.criterion_met = true;
      return out;
    }
  }
  return out;
}

// ------------------------------------------------------------- driver ----

TrainMethod parse_method(const std::string& name) {
  if (name == "bc") return TrainMethod::bc;
  if (name == "td3") return TrainMethod::td3;
  if (name == "td3bc") return TrainMethod::td3bc;
  if (name == "td3bc_jsrl") return TrainMethod::td3bc_jsrl;
  throw std::invalid_argument("unknown training method: " + name);
}

const char* to_string(TrainMethod m) {
  switch (m) {
    case TrainMethod::bc: return "bc";
    case TrainMethod::td3: return "td3";
    case TrainMethod::td3bc: return "td3bc";
    case TrainMethod::td3bc_jsrl: return "td3bc_jsrl";
  }
  return "bc";
}

bool method_is_offline(TrainMethod m) {
  return m == TrainMethod::bc || m == TrainMethod::td3bc;
}

std::string metrics_csv_header() {
  return "epoch,mean_reward,mean_episode_len,lambda,k_slope,"
         "curriculum_stage,critic_loss,actor_loss";
}

std::string metrics_csv_row(const EpochRow& row) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%d,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g", row.epoch,
                row.mean_reward, row.mean_episode_len, row.lambda, row.k_slope,
                row.curriculum_stage, row.critic_loss, row.actor_loss);
  return buf;
}

namespace {

std::string divergence_dump(const char* where, int epoch, int step,
                            const EpochRow& row, const SnnPolicy& policy,
                            const TwinCritics& critics) {
  std::ostringstream os;
  os << "training diverged (" << where << "): epoch " << epoch << ", step "
     << step << ", lambda " << row.lambda << ", k " << row.k_slope
     << ", policy |theta| " << policy.to_flat().norm() << ", q1 |theta| "
     << critics.q1.to_flat().norm() << ", q2 |theta| "
     << critics.q2.to_flat().norm();
  return os.str();
}

}  // namespace

TrainResult run_training(const TrainerConfig& cfg, EpochCallback on_epoch) {
  cfg.td3.validate();
  const bool offline = method_is_offline(cfg.method);
  const bool use_q = cfg.method != TrainMethod::bc;
  SeedStreams seeds = seed_streams(cfg.seed);
  RandomStream init_rng(split_seed(seeds.init, 1));
  RandomStream sampler_rng(split_seed(seeds.sampler, 1));
  RandomStream target_noise_rng(split_seed(seeds.noise, 1));

  TrainResult out;
  out.policy = make_snn_policy(kObservationDim, cfg.snn_hidden1,
                               cfg.snn_hidden2, kActionDim, init_rng);
  SnnPolicy target_policy = out.policy;
  TwinCritics critics = make_twin_critics(
      kObservationDim + cfg.td3.action_history * kActionDim + kActionDim,
      cfg.td3.critic_hidden, init_rng);
  TwinCritics targets = critics;
  Adam actor_opt{cfg.td3.lr}, c1_opt{cfg.td3.lr}, c2_opt{cfg.td3.lr};

  ReplayBuffer buffer(cfg.replay);
  SlopeSchedule slope = cfg.slope;

  EnvConfig env_cfg = cfg.env;
  env_cfg.curriculum.stage = 0;

  if (offline) {
    if (cfg.dataset_path.empty()) {
      out.aborted = true;
      out.abort_reason = "offline method requires a dataset";
      return out;
    }
    for (const auto& ep : load_episode_log(cfg.dataset_path))
      buffer.push_episode(*ep);
  }

  const bool jump_start = cfg.method == TrainMethod::td3bc_jsrl && cfg.jump_start;
  if (jump_start) {
    QuadrotorEnv guide_env(env_cfg);
    auto gt = train_guide(guide_env, cfg.td3, cfg.jsrl, cfg.guide, seeds);
    out.total_env_steps += guide_env.lifetime_steps();
    out.guide = gt.guide;
    out.guide_trained = true;
    if (!gt.criterion_met) {
      out.aborted = true;
      out.abort_reason =
          "guide training exhausted its budget without meeting the hover "
          "criterion";
      return out;
    }
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int stage =
        std::min(cfg.curriculum_stages - 1,
                 static_cast<int>(static_cast<long>(cfg.curriculum_stages) *
                                  epoch / std::max(1, cfg.epochs)));
    env_cfg.curriculum.stage = stage;

    const Scalar k = slope.mode == SlopeMode::adaptive
                         ? slope.k
                         : slope_for_epoch(slope, epoch);
    out.policy.slope = k;
    target_policy.slope = k;

    Scalar lambda = 0.0;
    switch (cfg.method) {
      case TrainMethod::bc: lambda = 1.0; break;
      case TrainMethod::td3: lambda = 0.0; break;
      case TrainMethod::td3bc: lambda = cfg.offline_bc_coef; break;
      case TrainMethod::td3bc_jsrl: lambda = bc_lambda(cfg.jsrl, epoch); break;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lambda = lambda;
    row.k_slope = k;
    row.curriculum_stage = stage;

    // ---- collection (online methods) ----
    if (!offline) {
      const int guide_steps =
          jump_start ? guide_steps_for_epoch(cfg.jsrl, epoch, cfg.epochs) : 0;
      const GuidePolicy* guide = jump_start ? &out.guide : nullptr;
      long collected = 0;
      int index = 0;
      while (collected < cfg.env_steps_per_epoch) {
        const int wave = std::max(1, cfg.parallel_envs);
        std::vector<RolloutResult> results(wave);
        auto work = [&](int slot, int rollout_index) {
          QuadrotorEnv env(env_cfg);
          const std::uint64_t key = 0x10000000ULL +
                                    (static_cast<std::uint64_t>(epoch) << 20) +
                                    static_cast<std::uint64_t>(rollout_index);
          RandomStream env_rng(split_seed(seeds.env, key));
          RandomStream nz_rng(split_seed(seeds.noise, key));
          if (wave == 1) {
            results[slot] = jsrl_rollout(env, guide, out.policy, guide_steps,
                                         cfg.td3, env_rng, nz_rng);
          } else {
            SnnPolicy local = out.policy;
            results[slot] = jsrl_rollout(env, guide, local, guide_steps,
                                         cfg.td3, env_rng, nz_rng);
          }
        };
        if (wave == 1) {
          work(0, index);
        } else {
          std::vector<std::thread> pool;
          pool.reserve(wave);
          for (int j = 0; j < wave; ++j)
            pool.emplace_back(work, j, index + j);
          for (auto& th : pool) th.join();
        }
        // consume in index order; anything past the budget is discarded so
        // the collected set does not depend on the worker count
        for (int j = 0; j < wave && collected < cfg.env_steps_per_epoch; ++j) {
          const long len = static_cast<long>(results[j].episode.size());
          buffer.push_episode(std::move(results[j].episode));
          collected += len;
          out.total_env_steps += len;
        }
        index += wave;
      }
    }

    // ---- gradient steps ----
    Scalar critic_loss_sum = 0.0;
    long critic_updates = 0;
    Scalar actor_loss_sum = 0.0;
    long actor_updates = 0;
    for (int g = 0; g < cfg.gradient_steps_per_epoch; ++g) {
      auto slices = buffer.sample(cfg.td3.batch_size, sampler_rng);
      if (!slices) break;  // not enough sequences yet
      SequenceBatch batch = assemble_batch(
          *slices, target_policy, cfg.td3, cfg.jsrl, cfg.env.action_low,
          cfg.env.action_high, target_noise_rng, use_q);
      if (batch.masked_steps == 0) continue;  // all-masked batch: no update

      if (use_q) {
        const Vector y = compute_td_targets(targets, batch, cfg.td3.gamma);
        const Scalar closs = critic_update(critics, c1_opt, c2_opt, batch, y);
        if (!std::isfinite(closs)) {
          out.aborted = true;
          out.abort_reason = divergence_dump("critic loss", epoch, g, row,
                                             out.policy, critics);
          return out;
        }
        critic_loss_sum += closs;
        ++critic_updates;
      }

      const bool actor_turn = !use_q || (g % cfg.td3.actor_delay == 0);
      if (actor_turn) {
        std::optional<TransitionSource> bc_src;
        if (cfg.bc_guide_only) bc_src = TransitionSource::guide;
        ActorUpdateStats stats =
            actor_update(out.policy, actor_opt, critics.q1, batch, lambda,
                         cfg.td3, use_q, bc_src);
        if (!stats.skipped) {
          if (!std::isfinite(stats.loss)) {
            out.aborted = true;
            out.abort_reason = divergence_dump("actor loss", epoch, g, row,
                                               out.policy, critics);
            return out;
          }
          actor_loss_sum += stats.loss;
          ++actor_updates;
        }
        if (use_q) {
          soft_update(target_policy, out.policy, cfg.td3.tau_target);
          soft_update(targets.q1, critics.q1, cfg.td3.tau_target);
          soft_update(targets.q2, critics.q2, cfg.td3.tau_target);
        }
      }
    }
    if (critic_updates > 0) row.critic_loss = critic_loss_sum / critic_updates;
    if (actor_updates > 0) row.actor_loss = actor_loss_sum / actor_updates;

    // ---- evaluation ----
    QuadrotorEnv eval_env(env_cfg);
    RandomStream eval_rng(split_seed(
        seeds.env, 0xE4A1000000000000ULL + static_cast<std::uint64_t>(epoch)));
    EvalResult ev =
        evaluate_policy(eval_env, out.policy, cfg.eval_episodes, eval_rng);
    row.mean_reward = ev.mean_reward;
    row.mean_episode_len = ev.mean_length;

    if (slope.mode == SlopeMode::adaptive)
      update_adaptive_slope(slope, normalize_slope_score(slope, ev.mean_reward));

    out.history.push_back(row);
    if (on_epoch != nullptr) on_epoch(row);
  }
  return out;
}

}  // namespace spikerl
