#include "aloe/replay_buffer.hpp"

#include "aloe/dataset_io.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace aloe {

std::vector<TransitionSegment> slice_episode(const Episode& episode, int horizon) {
  const auto& steps = episode.steps;
  const std::size_t n = steps.size();
  if (n == 0) throw std::invalid_argument("append_episode: empty episode");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (steps[i].terminated) throw std::invalid_argument("append_episode: terminal flag before the last step");
  }
  const int d = static_cast<int>(steps[0].action.size());
  std::vector<TransitionSegment> out;
  std::size_t i = 0;
  while (i < n) {
    const Source src = steps[i].source;
    std::size_t len = 1;
    while (len < static_cast<std::size_t>(horizon) && i + len < n && steps[i + len].source == src) ++len;

    TransitionSegment seg;
    seg.state = steps[i].state;
    Matrix actions = Matrix::Zero(horizon, d);
    for (std::size_t k = 0; k < len; ++k) {
      if (steps[i + k].action.size() != d) throw std::invalid_argument("append_episode: action dimension changes");
      actions.row(static_cast<Eigen::Index>(k)) = steps[i + k].action.transpose();
      seg.rewards.push_back(steps[i + k].reward);
    }
    seg.chunk = ActionChunk(std::move(actions), static_cast<int>(len));
    const StepRecord& last = steps[i + len - 1];
    seg.next_state = i + len < n ? steps[i + len].state : episode.final_state;
    seg.terminated = last.terminated;
    seg.success = last.success;
    seg.handover = last.handover;
    seg.source = src;
    seg.start_step = static_cast<int>(i);
    seg.validate();
    out.push_back(std::move(seg));
    i += len;
  }
  return out;
}

ReplayBuffer::ReplayBuffer(int horizon, int action_dim, std::optional<std::size_t> capacity)
    : horizon_(horizon), action_dim_(action_dim), capacity_(capacity) {
  if (horizon < 1 || action_dim < 1) throw std::invalid_argument("ReplayBuffer: bad shape");
}

std::size_t ReplayBuffer::append_episode(const Episode& episode, int iteration) {
  auto sliced = slice_episode(episode, horizon_);
  if (sliced.front().chunk.action_dim() != action_dim_) {
    throw std::invalid_argument("append_episode: action dimension differs from the buffer");
  }
  EpisodeSpan span;
  span.id = next_episode_id_++;
  span.first = segments_.size();
  span.count = sliced.size();
  span.iteration = iteration;
  const auto& last = sliced.back();
  span.censored = last.handover || !last.terminated;
  for (auto& seg : sliced) {
    seg.episode = span.id;
    seg.iteration = iteration;
    segments_.push_back(std::move(seg));
  }
  episodes_.push_back(span);
  enforce_capacity();
  return span.count;
}

void ReplayBuffer::append_segment(TransitionSegment segment, int iteration) {
  segment.validate();
  if (segment.chunk.horizon() != horizon_ || segment.chunk.action_dim() != action_dim_) {
    throw std::invalid_argument("append_segment: chunk shape differs from the buffer");
  }
  EpisodeSpan span;
  span.id = next_episode_id_++;
  span.first = segments_.size();
  span.count = 1;
  span.iteration = iteration;
  span.censored = segment.handover || !segment.terminated;
  segment.episode = span.id;
  segment.iteration = iteration;
  segments_.push_back(std::move(segment));
  episodes_.push_back(span);
  enforce_capacity();
}

void ReplayBuffer::enforce_capacity() {
  if (!capacity_) return;
  std::size_t drop_episodes = 0;
  std::size_t drop_segments = 0;
  while (segments_.size() - drop_segments > *capacity_ && drop_episodes + 1 < episodes_.size()) {
    drop_segments += episodes_[drop_episodes].count;
    ++drop_episodes;
  }
  if (drop_segments == 0) return;
  segments_.erase(segments_.begin(), segments_.begin() + static_cast<std::ptrdiff_t>(drop_segments));
  episodes_.erase(episodes_.begin(), episodes_.begin() + static_cast<std::ptrdiff_t>(drop_episodes));
  for (auto& span : episodes_) span.first -= drop_segments;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (segments_.empty()) throw std::logic_error("sample_batch: replay buffer is empty");
  std::uniform_int_distribution<std::size_t> pick(0, segments_.size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<TransitionSegment> ReplayBuffer::sample_batch(std::size_t batch_size,
                                                          std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<TransitionSegment> batch;
  batch.reserve(batch_size);
  for (std::size_t i : sample_indices(batch_size, rng)) batch.push_back(segments_[i]);
  return batch;
}

void ReplayBuffer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_segments_jsonl(dir / "segments.jsonl", segments_);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["horizon"] = horizon_;
  manifest["action_dim"] = action_dim_;
  manifest["env_config_hash"] = env_config_hash_;
  manifest["capacity"] = capacity_ ? nlohmann::json(*capacity_) : nlohmann::json(nullptr);
  std::vector<int> tags;
  for (const auto& seg : segments_) tags.push_back(seg.iteration);
  manifest["iteration_tags"] = tags;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : episodes_) {
    eps.push_back({{"id", e.id}, {"first", e.first}, {"count", e.count},
                   {"iteration", e.iteration}, {"censored", e.censored}});
  }
  manifest["episodes"] = eps;
  manifest["next_episode_id"] = next_episode_id_;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing replay manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  std::optional<std::size_t> capacity;
  if (!manifest.at("capacity").is_null()) capacity = manifest.at("capacity").get<std::size_t>();
  ReplayBuffer buffer(manifest.at("horizon").get<int>(), manifest.at("action_dim").get<int>(), capacity);
  buffer.env_config_hash_ = manifest.at("env_config_hash").get<std::string>();
  buffer.segments_ = read_segments_jsonl(dir / "segments.jsonl");
  for (const auto& e : manifest.at("episodes")) {
    buffer.episodes_.push_back(EpisodeSpan{e.at("id").get<std::int64_t>(), e.at("first").get<std::size_t>(),
                                           e.at("count").get<std::size_t>(), e.at("iteration").get<int>(),
                                           e.at("censored").get<bool>()});
  }
  buffer.next_episode_id_ = manifest.at("next_episode_id").get<std::int64_t>();
  const auto tags = manifest.at("iteration_tags").get<std::vector<int>>();
  if (tags.size() != buffer.segments_.size()) throw std::runtime_error("replay manifest/segment count mismatch");
  return buffer;
}

}  // namespace aloe
