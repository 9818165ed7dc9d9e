#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "spikerl/checkpoint.hpp"
#include "spikerl/cli.hpp"
#include "spikerl/config.hpp"
#include "spikerl/replay.hpp"
#include "spikerl/trainer.hpp"

using namespace spikerl;
namespace fs = std::filesystem;

namespace {

int call(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"spikerl"};
  argv.insert(argv.end(), args);
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Weightless drone in zero gravity: episodes always reach the cap.
const char* kSmokeConfig = R"({
  "method": "td3",
  "epochs": 2,
  "env_steps_per_epoch": 80,
  "gradient_steps_per_epoch": 2,
  "eval_episodes": 1,
  "snn_hidden": [6, 6],
  "td3": {"batch_size": 1, "critic_hidden": [8], "action_history": 4},
  "jsrl": {"warm_up": 10},
  "replay": {"n_seq": 30, "n_warmup": 10, "stride": 10},
  "env": {"episode_cap": 40, "crash_tilt_deg": 181, "crash_distance": 1e9,
          "drone": {"gravity": 0.0, "thrust_c0": 0.0, "thrust_c1": 0.0,
                    "thrust_c2": 0.0}}
})";

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::path("cli_test") / name) {
    fs::remove_all("cli_test");
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("cli_test"); }
};

}  // namespace

TEST_CASE("train lays out a complete run directory") {
  TempDir tmp("train");
  const fs::path cfg = tmp.path / "cfg.json";
  {
    std::ofstream out(cfg);
    out << kSmokeConfig;
  }
  const fs::path run = tmp.path / "run";
  CHECK(call({"train", "--config", cfg.c_str(), "--seed", "11", "--out",
              run.c_str()}) == 0);

  CHECK(fs::exists(run / "config.json"));
  CHECK(fs::exists(run / "metrics.csv"));
  CHECK(fs::exists(run / "policy_final.ckpt"));
  CHECK(slurp(run / "version.txt") == std::string(kVersionString) + "\n");

  // resolved snapshot reloads to the exact run parameters
  RunConfig snap = load_run_config((run / "config.json").string());
  CHECK(snap.trainer.method == TrainMethod::td3);
  CHECK(snap.trainer.seed == 11);
  CHECK(snap.trainer.epochs == 2);
  CHECK(snap.trainer.env.drone.gravity == 0.0);

  const std::string csv = slurp(run / "metrics.csv");
  CHECK(line_count(csv) == 3);  // header + one row per epoch
  CHECK(csv.rfind(metrics_csv_header(), 0) == 0);

  SnnPolicy policy = load_snn_checkpoint((run / "policy_final.ckpt").string());
  CHECK(policy.hidden1() == 6);

  // same config and seed: byte-identical metrics
  const fs::path run2 = tmp.path / "run2";
  CHECK(call({"train", "--config", cfg.c_str(), "--seed", "11", "--out",
              run2.c_str()}) == 0);
  CHECK(slurp(run2 / "metrics.csv") == csv);

  // another seed diverges
  const fs::path run3 = tmp.path / "run3";
  CHECK(call({"train", "--config", cfg.c_str(), "--seed", "12", "--out",
              run3.c_str()}) == 0);
  CHECK(slurp(run3 / "metrics.csv") != csv);
}

TEST_CASE("flags take precedence over the config file") {
  TempDir tmp("flags");
  const fs::path cfg = tmp.path / "cfg.json";
  {
    std::ofstream out(cfg);
    out << kSmokeConfig;  // epochs 2, method td3
  }
  const fs::path run = tmp.path / "run";
  CHECK(call({"train", "--config", cfg.c_str(), "--seed", "3", "--out",
              run.c_str(), "--epochs", "1", "--slope-mode", "fixed",
              "--slope-k", "30"}) == 0);

  RunConfig snap = load_run_config((run / "config.json").string());
  CHECK(snap.trainer.epochs == 1);
  CHECK(snap.trainer.slope.mode == SlopeMode::fixed);
  CHECK(snap.trainer.slope.k == 30.0);
  CHECK(line_count(slurp(run / "metrics.csv")) == 2);
}

TEST_CASE("usage and config errors exit with code 2") {
  CHECK(call({"train", "--method", "sac", "--epochs", "1"}) == 2);
  CHECK(call({"train", "--config", "no_such_file.json"}) == 2);
  CHECK(call({"eval", "--checkpoint", "no_such_ckpt.ckpt"}) == 2);
  CHECK(call({"no-such-subcommand"}) != 0);
}

TEST_CASE("offline training via cli aborts without a dataset") {
  TempDir tmp("offline");
  const fs::path run = tmp.path / "run";
  CHECK(call({"train", "--method", "bc", "--epochs", "1", "--seed", "1",
              "--out", run.c_str()}) == 1);
}

TEST_CASE("eval and bench consume a saved checkpoint") {
  TempDir tmp("evalbench");
  RandomStream init(17);
  SnnPolicy policy = make_snn_policy(kObservationDim, 6, 6, kActionDim, init);
  const fs::path ckpt = tmp.path / "p.ckpt";
  save_checkpoint(ckpt.string(), policy);

  CHECK(call({"eval", "--checkpoint", ckpt.c_str(), "--episodes", "2",
              "--seed", "5"}) == 0);

  // bench against a recorded episode log
  Episode ep;
  RandomStream r(23);
  for (int t = 0; t < 30; ++t) {
    Transition tr;
    tr.state = r.uniform_vector(kObservationDim, -1.0, 1.0);
    tr.action = Vector::Zero(kActionDim);
    tr.next_state = tr.state;
    tr.done = t == 29;
    ep.push_back(tr);
  }
  const fs::path log = tmp.path / "obs.eplog";
  save_episode_log(log.string(),
                   {std::make_shared<const Episode>(std::move(ep))});
  const fs::path report = tmp.path / "ops.json";
  CHECK(call({"bench", "--checkpoint", ckpt.c_str(), "--log", log.c_str(),
              "--out", report.c_str()}) == 0);

  auto j = nlohmann::json::parse(slurp(report));
  CHECK(j["steps"] == 30);
  CHECK(j["dense_synops"] ==
        18 * 6 + 6 * 6 + 6 * 4);
  CHECK(j["eff_macs"].get<double>() + j["eff_acs"].get<double>() <=
        j["dense_synops"].get<double>());
  CHECK(j["activation_sparsity"].get<double>() >= 0.0);
  CHECK(j["activation_sparsity"].get<double>() <= 1.0);
}

TEST_CASE("analyze-slopes writes the sweep csv") {
  TempDir tmp("sweep");
  const fs::path out = tmp.path / "sweep.csv";
  CHECK(call({"analyze-slopes", "--slopes", "1", "25", "--trials", "2",
              "--layers", "2", "--neurons", "8", "--out", out.c_str()}) == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("slope,layer,", 0) == 0);
  // header + slopes x weight layers (2 hidden layers -> 3 weight layers)
  CHECK(line_count(csv) == 1 + 2 * 3);
}

TEST_CASE("collect then offline bc training closes the loop") {
  TempDir tmp("loop");
  const fs::path cfg = tmp.path / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "guide": {"hidden": [6], "max_epochs": 1, "episodes_per_epoch": 1,
                "gradient_steps_per_epoch": 2, "batch_size": 4},
      "td3": {"batch_size": 1, "action_history": 4},
      "jsrl": {"warm_up": 10, "stop_streak": 2},
      "replay": {"n_seq": 30, "n_warmup": 10, "stride": 10},
      "env": {"episode_cap": 40, "crash_tilt_deg": 181, "crash_distance": 1e9,
              "drone": {"gravity": 0.0, "thrust_c0": 0.0, "thrust_c1": 0.0,
                        "thrust_c2": 0.0}}
    })";
  }
  const fs::path log = tmp.path / "demo.eplog";
  CHECK(call({"collect", "--config", cfg.c_str(), "--seed", "5", "--out",
              log.c_str(), "--episodes", "3"}) == 0);
  auto episodes = load_episode_log(log.string());
  CHECK(episodes.size() == 3);
  CHECK(episodes[0]->size() == 40);  // weightless env always reaches the cap
  CHECK(fs::exists(log.string() + ".guide.ckpt"));

  const fs::path run = tmp.path / "bc_run";
  CHECK(call({"train", "--config", cfg.c_str(), "--method", "bc", "--epochs",
              "1", "--seed", "2", "--out", run.c_str(), "--dataset",
              log.c_str()}) == 0);
  const std::string csv = slurp(run / "metrics.csv");
  CHECK(line_count(csv) == 2);
}

TEST_CASE("ablate emits the four-cell grid") {
  TempDir tmp("ablate");
  const fs::path cfg = tmp.path / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({
      "epochs": 1,
      "env_steps_per_epoch": 40,
      "gradient_steps_per_epoch": 1,
      "eval_episodes": 1,
      "snn_hidden": [4, 4],
      "td3": {"batch_size": 1, "critic_hidden": [6], "action_history": 4},
      "jsrl": {"warm_up": 10, "stop_streak": 2, "episode_length": 30},
      "replay": {"n_seq": 30, "n_warmup": 10, "stride": 10},
      "guide": {"hidden": [4], "max_epochs": 1, "episodes_per_epoch": 1,
                "gradient_steps_per_epoch": 2, "batch_size": 4},
      "env": {"episode_cap": 30, "crash_tilt_deg": 181, "crash_distance": 1e9,
              "drone": {"gravity": 0.0, "thrust_c0": 0.0, "thrust_c1": 0.0,
                        "thrust_c2": 0.0}}
    })";
  }
  const fs::path out = tmp.path / "grid";
  CHECK(call({"ablate", "--config", cfg.c_str(), "--seed", "6", "--out",
              out.c_str()}) == 0);

  const std::string table = slurp(out / "ablation.csv");
  CHECK(line_count(table) == 5);  // header + four cells
  for (const char* name :
       {"bc+jumpstart", "jumpstart_only", "bc_only", "neither"}) {
    CHECK(table.find(name) != std::string::npos);
    CHECK(fs::exists(out / name / "metrics.csv"));
  }
}
