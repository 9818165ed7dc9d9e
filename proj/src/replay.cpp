#include "spikerl/replay.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spikerl {

std::vector<std::uint8_t> SequenceSlice::warm_up_mask(int n_seq,
                                                      int n_warmup) const {
  std::vector<std::uint8_t> mask(n_seq, 0);
  for (int i = n_warmup; i < n_seq && i < length; ++i) mask[i] = 1;
  return mask;
}

namespace {

Vector history_input(const Episode& ep, const Vector& obs, int newest,
                     int history) {
  // actions at episode indices (newest - history + 1) .. newest, zero-padded
  const int act_dim = ep.empty() ? 0 : static_cast<int>(ep[0].action.size());
  Vector out = Vector::Zero(obs.size() + static_cast<long>(history) * act_dim);
  out.head(obs.size()) = obs;
  long at = obs.size();
  for (int idx = newest - history + 1; idx <= newest; ++idx) {
    if (idx >= 0 && idx < static_cast<int>(ep.size()))
      out.segment(at, act_dim) = ep[idx].action;
    at += act_dim;
  }
  return out;
}

}  // namespace

Vector SequenceSlice::privileged_input(int i, int history) const {
  const int e = start + i;
  return history_input(*episode, (*episode)[e].state, e - 1, history);
}

Vector SequenceSlice::privileged_next_input(int i, int history) const {
  const int e = start + i;
  return history_input(*episode, (*episode)[e].next_state, e, history);
}

int slice_count_for_length(int episode_length, const ReplayConfig& cfg) {
  if (episode_length >= cfg.n_seq)
    return (episode_length - cfg.n_seq) / cfg.stride + 1;
  if (episode_length > cfg.n_warmup) return 1;
  return 0;
}

ReplayBuffer::ReplayBuffer(ReplayConfig cfg) : cfg_(cfg) {
  if (cfg_.n_warmup >= cfg_.n_seq || cfg_.stride < 1 || cfg_.capacity < 1)
    throw std::invalid_argument("ReplayBuffer: bad configuration");
}

int ReplayBuffer::push_episode(Episode episode) {
  const int len = static_cast<int>(episode.size());
  const int n_slices = slice_count_for_length(len, cfg_);
  auto ptr = std::make_shared<const Episode>(std::move(episode));
  episodes_.push_back(ptr);
  transitions_ += len;
  if (len >= cfg_.n_seq) {
    for (int s = 0; s + cfg_.n_seq <= len; s += cfg_.stride)
      slices_.push_back(SequenceSlice{ptr, s, cfg_.n_seq});
  } else if (len > cfg_.n_warmup) {
    slices_.push_back(SequenceSlice{ptr, 0, len});
  }
  evict_if_needed();
  return n_slices;
}

void ReplayBuffer::evict_if_needed() {
  while (transitions_ > cfg_.capacity && !episodes_.empty()) {
    EpisodePtr victim = episodes_.front();
    episodes_.pop_front();
    transitions_ -= static_cast<long>(victim->size());
    while (!slices_.empty() && slices_.front().episode == victim)
      slices_.pop_front();
  }
}

std::optional<std::vector<SequenceSlice>> ReplayBuffer::sample(
    int batch_size, RandomStream& rng) const {
  if (slice_count() < batch_size) return std::nullopt;
  std::vector<SequenceSlice> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b)
    batch.push_back(slices_[rng.uniform_int(static_cast<int>(slices_.size()))]);
  return batch;
}

std::optional<std::vector<ReplayBuffer::TransitionRef>>
ReplayBuffer::sample_transitions(int batch_size, RandomStream& rng) const {
  if (transitions_ < batch_size) return std::nullopt;
  std::vector<TransitionRef> batch;
  batch.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    long r = rng.uniform_int(static_cast<int>(transitions_));
    for (const auto& ep : episodes_) {
      const long n = static_cast<long>(ep->size());
      if (r < n) {
        batch.push_back(TransitionRef{ep, static_cast<int>(r)});
        break;
      }
      r -= n;
    }
  }
  return batch;
}

namespace {

template <class T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("episode log: truncated file");
  return v;
}

void write_vector(std::ofstream& out, const Vector& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
}

Vector read_vector(std::ifstream& in, int n) {
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(Scalar)));
  if (!in) throw std::runtime_error("episode log: truncated file");
  return v;
}

}  // namespace

void save_episode_log(const std::string& path,
                      const std::vector<EpisodePtr>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("episode log: cannot write " + path);
  out.write(kEpisodeLogMagic, std::strlen(kEpisodeLogMagic));
  out.put('\n');
  std::uint32_t obs_dim = 0, act_dim = 0;
  for (const auto& ep : episodes) {
    if (!ep->empty()) {
      obs_dim = static_cast<std::uint32_t>((*ep)[0].state.size());
      act_dim = static_cast<std::uint32_t>((*ep)[0].action.size());
      break;
    }
  }
  write_raw(out, obs_dim);
  write_raw(out, act_dim);
  write_raw(out, static_cast<std::uint64_t>(episodes.size()));
  for (const auto& ep : episodes) {
    write_raw(out, static_cast<std::uint64_t>(ep->size()));
    for (const Transition& t : *ep) {
      write_vector(out, t.state);
      write_vector(out, t.action);
      write_raw(out, t.reward);
      write_raw(out, static_cast<std::uint8_t>(t.done ? 1 : 0));
      write_vector(out, t.next_state);
      write_raw(out, static_cast<std::uint8_t>(t.source));
    }
  }
}

std::vector<EpisodePtr> load_episode_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("episode log: cannot open " + path);
  std::string magic(std::strlen(kEpisodeLogMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  char nl = 0;
  in.get(nl);
  if (!in || magic != kEpisodeLogMagic || nl != '\n')
    throw std::runtime_error("episode log: bad header in " + path);
  const auto obs_dim = read_raw<std::uint32_t>(in);
  const auto act_dim = read_raw<std::uint32_t>(in);
  const auto count = read_raw<std::uint64_t>(in);
  std::vector<EpisodePtr> episodes;
  episodes.reserve(count);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = read_raw<std::uint64_t>(in);
    Episode ep;
    ep.reserve(len);
    for (std::uint64_t i = 0; i < len; ++i) {
      Transition t;
      t.state = read_vector(in, static_cast<int>(obs_dim));
      t.action = read_vector(in, static_cast<int>(act_dim));
      t.reward = read_raw<Scalar>(in);
      t.done = read_raw<std::uint8_t>(in) != 0;
      t.next_state = read_vector(in, static_cast<int>(obs_dim));
      t.source = static_cast<TransitionSource>(read_raw<std::uint8_t>(in));
      ep.push_back(std::move(t));
    }
    episodes.push_back(std::make_shared<const Episode>(std::move(ep)));
  }
  return episodes;
}

}  // namespace spikerl
