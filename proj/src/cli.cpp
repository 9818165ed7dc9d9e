#include "spikerl/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikerl/checkpoint.hpp"
#include "spikerl/config.hpp"
#include "spikerl/gradient_diagnostics.hpp"
#include "spikerl/metrics.hpp"
#include "spikerl/trainer.hpp"

namespace spikerl {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Flag values that only count as overrides when actually given.
struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out;
  std::string method;
  int epochs = 0;
  int parallel_envs = 1;
  std::string slope_mode;
  double slope_k = 2.0;
  std::string dataset;

  CLI::Option* o_config = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_method = nullptr;
  CLI::Option* o_epochs = nullptr;
  CLI::Option* o_parallel = nullptr;
  CLI::Option* o_slope_mode = nullptr;
  CLI::Option* o_slope_k = nullptr;
  CLI::Option* o_dataset = nullptr;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_method,
                      bool with_training = true) {
  f.o_config = cmd->add_option("--config", f.config_path,
                               "JSON config file applied over the defaults");
  f.o_seed = cmd->add_option("--seed", f.seed, "master seed");
  f.o_out = cmd->add_option("--out", f.out, "run directory");
  if (with_method)
    f.o_method = cmd->add_option("--method", f.method,
                                 "bc | td3 | td3bc | td3bc_jsrl");
  if (!with_training) return;
  f.o_epochs = cmd->add_option("--epochs", f.epochs, "training epochs");
  f.o_parallel =
      cmd->add_option("--parallel-envs", f.parallel_envs,
                      "rollout workers (does not change the results)");
  f.o_slope_mode =
      cmd->add_option("--slope-mode", f.slope_mode,
                      "surrogate slope schedule: fixed | interval | adaptive");
  f.o_slope_k = cmd->add_option("--slope-k", f.slope_k,
                                "surrogate slope (start value)");
  f.o_dataset = cmd->add_option("--dataset", f.dataset,
                                "episode log for offline methods");
}

// Precedence: per-method defaults, then the config file, then flags.
RunConfig resolve_config(const CommonFlags& f, TrainMethod fallback) {
  std::string text;
  if (f.o_config && f.o_config->count()) text = read_text(f.config_path);

  TrainMethod method = fallback;
  if (!text.empty())
    if (auto m = peek_method_json(text)) method = *m;
  if (f.o_method && f.o_method->count()) method = parse_method(f.method);

  RunConfig cfg = default_run_config(method);
  if (!text.empty()) apply_config_json(cfg, text);
  cfg.trainer.method = method;

  if (f.o_seed->count()) cfg.trainer.seed = f.seed;
  if (f.o_out->count()) cfg.out_dir = f.out;
  if (f.o_epochs && f.o_epochs->count()) cfg.trainer.epochs = f.epochs;
  if (f.o_parallel && f.o_parallel->count())
    cfg.trainer.parallel_envs = f.parallel_envs;
  if (f.o_slope_k && f.o_slope_k->count()) cfg.trainer.slope.k = f.slope_k;
  if (f.o_slope_mode && f.o_slope_mode->count()) {
    const Scalar k = cfg.trainer.slope.k;
    switch (parse_slope_mode(f.slope_mode)) {
      case SlopeMode::fixed:
        cfg.trainer.slope = make_fixed_slope(k);
        break;
      case SlopeMode::interval:
        cfg.trainer.slope = make_interval_slope(k);
        break;
      case SlopeMode::adaptive:
        cfg.trainer.slope = make_adaptive_slope(k);
        break;
    }
  }
  if (f.o_dataset && f.o_dataset->count()) cfg.trainer.dataset_path = f.dataset;
  return cfg;
}

// Runs one training job and lays out the run directory:
// config.json, version.txt, metrics.csv, policy_final.ckpt[, guide.ckpt].
TrainResult execute_run(const RunConfig& cfg, bool verbose) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  save_run_config(cfg, (dir / "config.json").string());
  write_text(dir / "version.txt", std::string(kVersionString) + "\n");

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
  csv << metrics_csv_header() << '\n';

  TrainResult res = run_training(cfg.trainer, [&](const EpochRow& row) {
    csv << metrics_csv_row(row) << '\n';
    csv.flush();
    if (verbose)
      std::printf("epoch %4d  reward %9.3f  ep_len %7.1f  k %6.2f  stage %d\n",
                  row.epoch, row.mean_reward, row.mean_episode_len, row.k_slope,
                  row.curriculum_stage);
  });
  csv.close();

  save_checkpoint((dir / "policy_final.ckpt").string(), res.policy);
  if (res.guide_trained)
    save_checkpoint((dir / "guide.ckpt").string(), res.guide.net,
                    res.guide.squash);
  return res;
}

int cmd_train(const CommonFlags& f) {
  RunConfig cfg = resolve_config(f, TrainMethod::td3bc_jsrl);
  const TrainResult res = execute_run(cfg, /*verbose=*/true);
  if (res.aborted) {
    std::fprintf(stderr, "training aborted: %s\n", res.abort_reason.c_str());
    return 1;
  }
  std::printf("done: %d epochs, %ld env steps, artifacts in %s\n",
              cfg.trainer.epochs, res.total_env_steps, cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::uint64_t seed,
             const std::string& config_path) {
  RunConfig cfg = config_path.empty() ? default_run_config(TrainMethod::td3)
                                      : load_run_config(config_path);
  QuadrotorEnv env(cfg.trainer.env);
  RandomStream rng(split_seed(seed_streams(seed).env, 0xE7A1));

  EvalResult r;
  if (peek_checkpoint_kind(checkpoint) == CheckpointKind::snn) {
    SnnPolicy policy = load_snn_checkpoint(checkpoint);
    r = evaluate_policy(env, policy, episodes, rng);
  } else {
    Scalar squash = 0.0;
    MlpNetwork net = load_mlp_checkpoint(checkpoint, &squash);
    if (squash <= 0.0)
      throw std::runtime_error(
          "checkpoint has no action squash scale; not an actor network");
    GuidePolicy guide{std::move(net), squash};
    r = evaluate_guide(env, guide, episodes, rng);
  }
  std::printf("episodes            %d\n", episodes);
  std::printf("mean reward         %.4f\n", r.mean_reward);
  std::printf("mean episode length %.2f\n", r.mean_length);
  return 0;
}

int cmd_bench(const std::string& checkpoint, const std::string& log_path,
              int episodes, std::uint64_t seed, const std::string& out_json) {
  if (peek_checkpoint_kind(checkpoint) != CheckpointKind::snn)
    throw std::runtime_error("bench expects a spiking policy checkpoint");
  SnnPolicy policy = load_snn_checkpoint(checkpoint);

  std::vector<Vector> observations;
  if (!log_path.empty()) {
    for (const auto& ep : load_episode_log(log_path))
      for (const Transition& tr : *ep) {
        if (tr.state.size() != policy.obs_dim())
          throw std::runtime_error(
              "episode log state width does not match the policy input");
        observations.push_back(tr.state);
      }
  } else {
    if (policy.obs_dim() != kObservationDim)
      throw std::runtime_error(
          "policy input does not match the simulator observation; pass --log");
    QuadrotorEnv env{EnvConfig{}};
    RandomStream rng(split_seed(seed_streams(seed).env, 0xB33C));
    for (int ep = 0; ep < episodes; ++ep) {
      env.reset(rng);
      policy.reset_state();
      bool done = false;
      while (!done) {
        observations.push_back(env.observation());
        const Vector a = policy.act(observations.back());
        done = env.step(a).done;
      }
    }
  }
  if (observations.empty()) throw std::runtime_error("no observations to replay");

  const OpsReport r = build_ops_report(policy, observations);
  std::printf("steps replayed           %ld\n", r.sparsity.steps);
  std::printf("footprint (KB)           %.2f\n", r.footprint_kb);
  std::printf("activation sparsity      %.4f\n", r.activation_sparsity);
  std::printf("  layer 1 / layer 2      %.4f / %.4f\n", r.sparsity.layer1,
              r.sparsity.layer2);
  std::printf("dense synops             %ld\n", r.dense_synops);
  std::printf("eff. MACs                %.1f\n", r.eff_macs);
  std::printf("eff. ACs (per-layer)     %.1f\n", r.eff_acs);
  std::printf("eff. ACs (uniform)       %.1f\n", r.eff_acs_uniform);
  std::printf("energy per step (mJ)     %.6e\n", r.energy_mj);

  nlohmann::json j;
  j["footprint_kb"] = r.footprint_kb;
  j["activation_sparsity"] = r.activation_sparsity;
  j["dense_synops"] = r.dense_synops;
  j["eff_macs"] = r.eff_macs;
  j["eff_acs"] = r.eff_acs;
  j["eff_acs_uniform"] = r.eff_acs_uniform;
  j["energy_mj"] = r.energy_mj;
  j["layer_sparsity"] = {r.sparsity.layer1, r.sparsity.layer2};
  j["steps"] = r.sparsity.steps;
  const std::string text = j.dump(2) + "\n";
  if (out_json.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text(out_json, text);
  return 0;
}

int cmd_analyze_slopes(const SlopeSweepConfig& cfg, const std::string& out) {
  const std::vector<SlopeSweepRow> rows = run_slope_sweep(cfg);
  write_slope_sweep_csv(out, rows);
  for (const SlopeSweepRow& r : rows)
    if (r.layer == 0)
      std::printf(
          "k %7.2f  layer0 |grad| %.3e  zero %.3f  cosine-to-ref %.4f\n",
          r.slope, r.mean_abs_grad, r.zero_fraction, r.cosine_to_ref);
  std::printf("full per-layer table: %s\n", out.c_str());
  return 0;
}

int cmd_ablate(const CommonFlags& f) {
  RunConfig base = resolve_config(f, TrainMethod::td3bc_jsrl);
  base.trainer.method = TrainMethod::td3bc_jsrl;

  struct Cell {
    const char* name;
    bool bc;
    bool jump_start;
  };
  const Cell grid[4] = {{"bc+jumpstart", true, true},
                        {"jumpstart_only", false, true},
                        {"bc_only", true, false},
                        {"neither", false, false}};

  std::string table =
      "variant,bc,jump_start,final_reward,final_episode_len,best_episode_len\n";
  int rc = 0;
  for (const Cell& cell : grid) {
    RunConfig cfg = base;
    cfg.out_dir = (fs::path(base.out_dir) / cell.name).string();
    if (!cell.bc) cfg.trainer.jsrl.lambda0 = 0.0;
    cfg.trainer.jump_start = cell.jump_start;

    std::printf("== %s ==\n", cell.name);
    const TrainResult res = execute_run(cfg, /*verbose=*/false);
    if (res.aborted) {
      std::fprintf(stderr, "%s aborted: %s\n", cell.name,
                   res.abort_reason.c_str());
      rc = 1;
      continue;
    }
    Scalar best_len = 0.0;
    for (const EpochRow& row : res.history)
      best_len = std::max(best_len, row.mean_episode_len);
    const EpochRow& last = res.history.back();
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%d,%d,%.4f,%.2f,%.2f\n", cell.name,
                  cell.bc ? 1 : 0, cell.jump_start ? 1 : 0, last.mean_reward,
                  last.mean_episode_len, best_len);
    table += line;
  }
  std::fputs(table.c_str(), stdout);
  fs::create_directories(base.out_dir);
  write_text(fs::path(base.out_dir) / "ablation.csv", table);
  return rc;
}

int cmd_collect(const CommonFlags& f, int episodes, double noise) {
  RunConfig cfg = resolve_config(f, TrainMethod::td3bc_jsrl);
  const std::string out =
      f.o_out->count() ? f.out : std::string("guide_data.eplog");

  SeedStreams seeds = seed_streams(cfg.trainer.seed);
  QuadrotorEnv env(cfg.trainer.env);
  GuideTrainResult gt = train_guide(env, cfg.trainer.td3, cfg.trainer.jsrl,
                                    cfg.trainer.guide, seeds);
  std::printf("guide: %d epochs, criterion %s\n", gt.epochs_used,
              gt.criterion_met ? "met" : "NOT met");

  const Scalar sigma = noise >= 0.0 ? noise : cfg.trainer.td3.explore_noise;
  const Scalar lo = cfg.trainer.env.action_low;
  const Scalar hi = cfg.trainer.env.action_high;
  QuadrotorEnv roll_env(cfg.trainer.env);
  ActionHistory hist(cfg.trainer.td3.action_history, kActionDim);
  std::vector<EpisodePtr> episodes_out;
  long steps = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    RandomStream er(split_seed(seeds.env, 0xC011EC7ULL + ep));
    RandomStream nr(split_seed(seeds.noise, 0xC011EC7ULL + ep));
    roll_env.reset(er);
    hist.reset();
    Episode episode;
    bool done = false;
    while (!done) {
      const Vector obs = roll_env.observation();
      Vector a = gt.guide.act(hist.privileged(obs));
      for (int i = 0; i < a.size(); ++i)
        a[i] = std::clamp(a[i] + sigma * nr.normal(), lo, hi);
      const StepResult sr = roll_env.step(a);
      episode.push_back(Transition{obs, a, sr.reward, sr.done, sr.observation,
                                   TransitionSource::guide});
      hist.push(a);
      done = sr.done;
    }
    steps += static_cast<long>(episode.size());
    episodes_out.push_back(std::make_shared<const Episode>(std::move(episode)));
  }
  save_episode_log(out, episodes_out);
  save_checkpoint(out + ".guide.ckpt", gt.guide.net, gt.guide.squash);
  std::printf("wrote %d episodes (%ld transitions) to %s\n", episodes, steps,
              out.c_str());
  return gt.criterion_met ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"spiking-network quadrotor control: training and analysis"};
  app.set_version_flag("--version", std::string(kVersionString));
  app.require_subcommand(1);
  int rc = 0;

  // train
  auto* train = app.add_subcommand("train", "train a spiking policy");
  auto train_flags = std::make_shared<CommonFlags>();
  add_common_flags(train, *train_flags, /*with_method=*/true);
  train->callback([&rc, train_flags] { rc = cmd_train(*train_flags); });

  // eval
  auto* eval = app.add_subcommand("eval", "run deterministic eval episodes");
  auto eval_ckpt = std::make_shared<std::string>();
  auto eval_eps = std::make_shared<int>(20);
  auto eval_seed = std::make_shared<std::uint64_t>(1);
  auto eval_cfg = std::make_shared<std::string>();
  eval->add_option("--checkpoint", *eval_ckpt, "policy or guide checkpoint")
      ->required();
  eval->add_option("--episodes", *eval_eps, "episode count (default 20)");
  eval->add_option("--seed", *eval_seed, "master seed");
  eval->add_option("--config", *eval_cfg, "config for the environment");
  eval->callback([&rc, eval_ckpt, eval_eps, eval_seed, eval_cfg] {
    rc = cmd_eval(*eval_ckpt, *eval_eps, *eval_seed, *eval_cfg);
  });

  // bench
  auto* bench =
      app.add_subcommand("bench", "operation counts, sparsity and energy");
  auto bench_ckpt = std::make_shared<std::string>();
  auto bench_log = std::make_shared<std::string>();
  auto bench_eps = std::make_shared<int>(5);
  auto bench_seed = std::make_shared<std::uint64_t>(1);
  auto bench_out = std::make_shared<std::string>();
  bench->add_option("--checkpoint", *bench_ckpt, "spiking policy checkpoint")
      ->required();
  bench->add_option("--log", *bench_log,
                    "episode log to replay (default: fresh rollouts)");
  bench->add_option("--episodes", *bench_eps, "rollout episodes when no log");
  bench->add_option("--seed", *bench_seed, "rollout seed");
  bench->add_option("--out", *bench_out, "write the JSON report here");
  bench->callback([&rc, bench_ckpt, bench_log, bench_eps, bench_seed,
                   bench_out] {
    rc = cmd_bench(*bench_ckpt, *bench_log, *bench_eps, *bench_seed,
                   *bench_out);
  });

  // analyze-slopes
  auto* slopes = app.add_subcommand(
      "analyze-slopes", "surrogate-slope gradient sweep on a probe stack");
  auto sweep = std::make_shared<SlopeSweepConfig>();
  auto sweep_out = std::make_shared<std::string>("slope_sweep.csv");
  slopes->add_option("--slopes", sweep->slopes, "slope values to test");
  slopes->add_option("--trials", sweep->trials, "random re-inits per slope");
  slopes->add_option("--layers", sweep->hidden_layers, "hidden layer count");
  slopes->add_option("--neurons", sweep->neurons, "neurons per hidden layer");
  slopes->add_option("--seed", sweep->seed, "sweep seed");
  slopes->add_option("--out", *sweep_out, "CSV output path");
  slopes->callback(
      [&rc, sweep, sweep_out] { rc = cmd_analyze_slopes(*sweep, *sweep_out); });

  // ablate
  auto* ablate = app.add_subcommand(
      "ablate", "2x2 grid over the BC term and the jump-start guide");
  auto ablate_flags = std::make_shared<CommonFlags>();
  add_common_flags(ablate, *ablate_flags, /*with_method=*/false);
  ablate->callback([&rc, ablate_flags] { rc = cmd_ablate(*ablate_flags); });

  // collect
  auto* collect = app.add_subcommand(
      "collect", "train a guide and record an episode log for offline runs");
  auto collect_flags = std::make_shared<CommonFlags>();
  auto collect_eps = std::make_shared<int>(50);
  auto collect_noise = std::make_shared<double>(-1.0);
  add_common_flags(collect, *collect_flags, /*with_method=*/false,
                   /*with_training=*/false);
  collect_flags->o_out->description(
      "episode log path (default guide_data.eplog)");
  collect->add_option("--episodes", *collect_eps, "episodes to record");
  collect->add_option("--noise", *collect_noise,
                      "exploration noise stddev (default: explore_noise)");
  collect->callback([&rc, collect_flags, collect_eps, collect_noise] {
    rc = cmd_collect(*collect_flags, *collect_eps, *collect_noise);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return rc;
}

}  // namespace spikerl
