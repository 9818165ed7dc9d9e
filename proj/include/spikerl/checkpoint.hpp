#pragma once

#include <string>

#include "spikerl/networks.hpp"

namespace spikerl {

inline constexpr const char* kCheckpointVersion = "SPIKERL-CKPT-1";

// JSON records with a versioned header. Weights are stored row-major.
void save_checkpoint(const std::string& path, const SnnPolicy& policy);
void save_checkpoint(const std::string& path, const MlpNetwork& net,
                     Scalar squash_scale = 0.0);

// What kind of network a checkpoint holds.
enum class CheckpointKind { snn, mlp };
CheckpointKind peek_checkpoint_kind(const std::string& path);

SnnPolicy load_snn_checkpoint(const std::string& path);
MlpNetwork load_mlp_checkpoint(const std::string& path,
                               Scalar* squash_scale = nullptr);

}  // namespace spikerl
