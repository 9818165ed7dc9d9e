#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spikerl/types.hpp"

namespace spikerl {

enum class TransitionSource : std::uint8_t { guide = 0, policy = 1 };

struct Transition {
  Vector state;
  Vector action;
  Scalar reward = 0.0;
  bool done = false;
  Vector next_state;
  TransitionSource source = TransitionSource::policy;
};

using Episode = std::vector<Transition>;
using EpisodePtr = std::shared_ptr<const Episode>;

// A window into one episode used for stateful training. Full windows are
// n_seq long; one shorter terminal window is kept for episodes between
// warm-up and n_seq, padded and marked invalid past its end.
struct SequenceSlice {
  EpisodePtr episode;
  int start = 0;
  int length = 0;  // valid transitions, <= n_seq

  const Transition& at(int i) const { return (*episode)[start + i]; }
  bool valid(int i) const { return i < length; }

  // 1 for steps past warm-up that hold real data, else 0.
  std::vector<std::uint8_t> warm_up_mask(int n_seq, int n_warmup) const;

  // Observation plus the previous `history` actions (newest last), drawing
  // on pre-window context from the owning episode, zero-padded before the
  // episode start. Index i is relative to the window.
  Vector privileged_input(int i, int history) const;
  Vector privileged_next_input(int i, int history) const;
};

struct ReplayConfig {
  int n_seq = 100;
  int n_warmup = 50;
  int stride = 10;
  long capacity = 1000000;  // transitions
};

// Episode-backed replay store. Slices reference shared episode storage;
// eviction is FIFO over whole episodes once the transition count would
// exceed capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(ReplayConfig cfg = ReplayConfig{});

  // Returns the number of slices the episode produced.
  int push_episode(Episode episode);

  long transition_count() const { return transitions_; }
  long slice_count() const { return static_cast<long>(slices_.size()); }
  long episode_count() const { return static_cast<long>(episodes_.size()); }
  const ReplayConfig& config() const { return cfg_; }

  // Uniform with replacement; nullopt while fewer slices than batch_size
  // exist (retry after more data arrives).
  std::optional<std::vector<SequenceSlice>> sample(int batch_size,
                                                   RandomStream& rng) const;

  // Uniform over stored transitions, as (episode, index) pairs.
  struct TransitionRef {
    EpisodePtr episode;
    int index;
  };
  std::optional<std::vector<TransitionRef>> sample_transitions(
      int batch_size, RandomStream& rng) const;

  const std::deque<EpisodePtr>& episodes() const { return episodes_; }

 private:
  void evict_if_needed();

  ReplayConfig cfg_;
  std::deque<EpisodePtr> episodes_;
  std::deque<SequenceSlice> slices_;
  long transitions_ = 0;
};

// How many slices an episode of a given length yields.
int slice_count_for_length(int episode_length, const ReplayConfig& cfg);

// Binary episode log (offline datasets).
inline constexpr const char* kEpisodeLogMagic = "SPIKERL-EPLOG-1";
void save_episode_log(const std::string& path,
                      const std::vector<EpisodePtr>& episodes);
std::vector<EpisodePtr> load_episode_log(const std::string& path);

}  // namespace spikerl
