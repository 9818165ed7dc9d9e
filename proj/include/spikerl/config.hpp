#pragma once

#include <optional>
#include <string>

#include "spikerl/trainer.hpp"

namespace spikerl {

// Full description of a run: trainer settings plus artifact placement.
// Serializes to JSON; the resolved snapshot lands in the run directory.
struct RunConfig {
  TrainerConfig trainer;
  std::string out_dir = "runs/run";
  int scheduling_order = 3;  // reserved knob, carried through configs unused
};

// Defaults per training method. Network widths, buffer capacity and the
// epoch/step budgets differ between methods; everything else is shared:
//   bc:          [256,128], 1M buffer,  300 epochs, offline
//   td3bc:       [256,256], 1M buffer,  300 epochs, offline
//   td3bc_jsrl:  [256,128], 2M buffer, 1000 epochs, 2000 env steps/epoch
//   td3:         [256,128], 2M buffer, 1000 epochs, 1000 env steps/epoch
RunConfig default_run_config(TrainMethod method);

// Snapshot of every field. apply_config_json(x, run_config_to_json(c))
// reproduces c exactly.
std::string run_config_to_json(const RunConfig& cfg);

// Applies the fields present in `text` onto `cfg`; missing fields keep
// their current values. Unknown keys throw std::invalid_argument naming
// the offending key, so config typos fail loudly instead of silently
// running the defaults.
void apply_config_json(RunConfig& cfg, const std::string& text);

// Reads just the "method" key, if present, without touching anything else.
// The caller picks the default set before applying the full file.
std::optional<TrainMethod> peek_method_json(const std::string& text);

// File variants. load_run_config resolves defaults from the file's own
// "method" key (td3bc_jsrl when absent), then applies the file on top.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

const char* to_string(AttitudeEncoding e);
AttitudeEncoding parse_encoding(const std::string& name);
const char* to_string(SlopeMode m);
SlopeMode parse_slope_mode(const std::string& name);

}  // namespace spikerl
