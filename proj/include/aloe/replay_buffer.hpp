#pragma once

#include "aloe/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aloe {

/// Contiguous run of segments that came from one stored episode fragment.
struct EpisodeSpan {
  std::int64_t id = 0;
  std::size_t first = 0;
  std::size_t count = 0;
  int iteration = 0;
  /// The fragment ended in a handover or never terminated, so the return
  /// that followed its actions was not observed.
  bool censored = false;
};

/// Append-only store of chunked transition segments.
///
/// Episodes are sliced into segments of stride h when appended; a segment
/// never spans a change of source label.
class ReplayBuffer {
 public:
  ReplayBuffer(int horizon, int action_dim, std::optional<std::size_t> capacity = std::nullopt);

  /// Returns the number of segments produced. Throws std::invalid_argument
  /// for empty episodes and for terminal flags before the last step.
  std::size_t append_episode(const Episode& episode, int iteration = 0);
  /// Appends a pre-built segment as its own single-segment episode.
  void append_segment(TransitionSegment segment, int iteration = 0);

  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
  std::vector<TransitionSegment> sample_batch(std::size_t batch_size, std::uint64_t seed) const;

  const std::vector<TransitionSegment>& segments() const { return segments_; }
  const std::vector<EpisodeSpan>& episodes() const { return episodes_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  int horizon() const { return horizon_; }
  int action_dim() const { return action_dim_; }

  void set_env_config_hash(std::string hash) { env_config_hash_ = std::move(hash); }
  const std::string& env_config_hash() const { return env_config_hash_; }

  /// Writes segments.jsonl plus a manifest.json sidecar into `dir`.
  void save(const std::filesystem::path& dir) const;
  static ReplayBuffer load(const std::filesystem::path& dir);

 private:
  void enforce_capacity();

  int horizon_;
  int action_dim_;
  std::optional<std::size_t> capacity_;
  std::vector<TransitionSegment> segments_;
  std::vector<EpisodeSpan> episodes_;
  std::int64_t next_episode_id_ = 0;
  std::string env_config_hash_;
};

/// Slices an episode into segments of at most `horizon` steps, splitting at
/// source changes. The tail rows of a short chunk are zero.
std::vector<TransitionSegment> slice_episode(const Episode& episode, int horizon);

}  // namespace aloe
