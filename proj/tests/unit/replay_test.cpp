#include "aloe/replay_buffer.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace aloe;

namespace {

// Episode of `n` steps on a 1-D line; steps at index >= takeover are
// labeled as intervention.
Episode line_episode(int n, bool terminal, int takeover = -1, bool success = false) {
  Episode ep;
  for (int t = 0; t < n; ++t) {
    StepRecord r;
    r.state.obs = Vector::Constant(1, t);
    r.action = Vector::Constant(1, 0.01 * t);
    const bool last = t == n - 1;
    r.terminated = last && terminal;
    r.success = r.terminated && success;
    r.reward = r.terminated ? (success ? 0.0 : -10.0) : -1.0;
    r.source = (takeover >= 0 && t >= takeover) ? Source::Intervention : Source::PolicyRollout;
    ep.steps.push_back(r);
  }
  ep.final_state.obs = Vector::Constant(1, n);
  return ep;
}

}  // namespace

TEST(Slicing, ExactDivisionGivesFullChunks) {
  const auto segs = slice_episode(line_episode(100, false), 10);
  ASSERT_EQ(segs.size(), 10u);
  for (const auto& s : segs) {
    EXPECT_EQ(s.chunk.valid_len, 10);
    EXPECT_FALSE(s.terminated);
  }
  EXPECT_EQ(segs[3].start_step, 30);
  EXPECT_EQ(segs[3].next_state.obs[0], 40.0);
}

TEST(Slicing, RemainderIsTruncatedAtTermination) {
  const auto segs = slice_episode(line_episode(105, true), 10);
  ASSERT_EQ(segs.size(), 11u);
  EXPECT_EQ(segs.back().chunk.valid_len, 5);
  EXPECT_TRUE(segs.back().terminated);
  EXPECT_EQ(segs.back().rewards.size(), 5u);
  EXPECT_EQ(segs.back().chunk.actions.row(7).norm(), 0.0);  // zero padding
  EXPECT_EQ(segs.back().next_state.obs[0], 105.0);
}

TEST(Slicing, TakeoverSplitsTheSpanningSegment) {
  // 12 steps, h = 5, takeover at step 7: boundaries by hand are
  // [0,5) policy, [5,7) policy, [7,12) intervention.
  const auto segs = slice_episode(line_episode(12, true, 7, true), 5);
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0].start_step, 0);
  EXPECT_EQ(segs[0].chunk.valid_len, 5);
  EXPECT_EQ(segs[0].source, Source::PolicyRollout);
  EXPECT_EQ(segs[1].start_step, 5);
  EXPECT_EQ(segs[1].chunk.valid_len, 2);
  EXPECT_EQ(segs[1].source, Source::PolicyRollout);
  EXPECT_EQ(segs[1].next_state.obs[0], 7.0);
  EXPECT_EQ(segs[2].start_step, 7);
  EXPECT_EQ(segs[2].chunk.valid_len, 5);
  EXPECT_EQ(segs[2].source, Source::Intervention);
  EXPECT_TRUE(segs[2].terminated);
  EXPECT_TRUE(segs[2].success);
}

TEST(Slicing, MidEpisodeTerminalIsRejected) {
  Episode ep = line_episode(6, true);
  ep.steps[2].terminated = true;
  ReplayBuffer buffer(3, 1);
  EXPECT_THROW(buffer.append_episode(ep), std::invalid_argument);
  EXPECT_THROW(buffer.append_episode(Episode{}), std::invalid_argument);
  EXPECT_TRUE(buffer.empty());
}

TEST(ReplayBuffer, StoresSuccessfulAndFailedEpisodesWithIterationTags) {
  ReplayBuffer buffer(4, 1);
  EXPECT_EQ(buffer.append_episode(line_episode(8, true, -1, true), 0), 2u);
  EXPECT_EQ(buffer.append_episode(line_episode(6, true, -1, false), 1), 2u);
  ASSERT_EQ(buffer.episodes().size(), 2u);
  EXPECT_EQ(buffer.episodes()[1].first, 2u);
  EXPECT_EQ(buffer.episodes()[1].iteration, 1);
  EXPECT_EQ(buffer.segments()[3].iteration, 1);
  EXPECT_FALSE(buffer.episodes()[1].censored);
  EXPECT_NE(buffer.segments()[0].episode, buffer.segments()[2].episode);
}

TEST(ReplayBuffer, UnterminatedOrHandoverFragmentsAreCensored) {
  ReplayBuffer buffer(4, 1);
  buffer.append_episode(line_episode(8, false));
  Episode handover = line_episode(5, true);
  handover.steps.back().handover = true;
  buffer.append_episode(handover);
  EXPECT_TRUE(buffer.episodes()[0].censored);
  EXPECT_TRUE(buffer.episodes()[1].censored);
  EXPECT_TRUE(buffer.segments().back().handover);
}

TEST(ReplayBuffer, AccumulationIsASuperset) {
  ReplayBuffer buffer(3, 1);
  std::vector<TransitionSegment> before;
  for (int it = 0; it < 6; ++it) {
    buffer.append_episode(line_episode(4 + it, it % 2 == 0, it == 3 ? 2 : -1), it);
    ASSERT_GE(buffer.size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(buffer.segments()[i], before[i]);
    before = buffer.segments();
  }
}

TEST(ReplayBuffer, SingleSegmentBatchRepeatsIt) {
  ReplayBuffer buffer(4, 1);
  buffer.append_episode(line_episode(4, false));
  const auto batch = buffer.sample_batch(4, 1);
  ASSERT_EQ(batch.size(), 4u);
  for (const auto& s : batch) EXPECT_EQ(s, buffer.segments()[0]);
}

TEST(ReplayBuffer, SamplingIsDeterministicPerSeed) {
  ReplayBuffer buffer(2, 1);
  buffer.append_episode(line_episode(40, true));
  EXPECT_EQ(buffer.sample_batch(16, 9), buffer.sample_batch(16, 9));
  EXPECT_NE(buffer.sample_batch(16, 9), buffer.sample_batch(16, 10));
}

TEST(ReplayBuffer, SamplingIsUniformOverSources) {
  // 7 policy segments and 3 intervention segments: 30% intervention.
  ReplayBuffer buffer(1, 1);
  for (int i = 0; i < 7; ++i) buffer.append_episode(line_episode(1, false));
  for (int i = 0; i < 3; ++i) buffer.append_episode(line_episode(1, false, 0));
  const auto batch = buffer.sample_batch(10000, 2024);
  double intervention = 0.0;
  for (const auto& s : batch) intervention += s.source == Source::Intervention ? 1.0 : 0.0;
  // Binomial sd at n = 1e4, p = 0.3 is 0.0046; 0.02 is more than 4 sd.
  EXPECT_NEAR(intervention / 10000.0, 0.3, 0.02);
}

TEST(ReplayBuffer, EmptyBufferSamplingIsAnError) {
  ReplayBuffer buffer(2, 1);
  Rng rng(0);
  EXPECT_THROW(buffer.sample_indices(3, rng), std::logic_error);
}

TEST(ReplayBuffer, SaveLoadRoundTrip) {
  ReplayBuffer buffer(3, 1);
  buffer.set_env_config_hash("abc123");
  buffer.append_episode(line_episode(7, true, 4, true), 0);
  buffer.append_episode(line_episode(5, false), 2);
  const auto dir = std::filesystem::temp_directory_path() / "aloe_replay_roundtrip";
  std::filesystem::remove_all(dir);
  buffer.save(dir);
  const ReplayBuffer back = ReplayBuffer::load(dir);
  EXPECT_EQ(back.segments(), buffer.segments());
  ASSERT_EQ(back.episodes().size(), buffer.episodes().size());
  for (std::size_t i = 0; i < back.episodes().size(); ++i) {
    EXPECT_EQ(back.episodes()[i].first, buffer.episodes()[i].first);
    EXPECT_EQ(back.episodes()[i].count, buffer.episodes()[i].count);
    EXPECT_EQ(back.episodes()[i].censored, buffer.episodes()[i].censored);
  }
  EXPECT_EQ(back.env_config_hash(), "abc123");
  EXPECT_EQ(back.horizon(), 3);
  std::filesystem::remove_all(dir);
}

TEST(ReplayBuffer, CapacityEvictsOldestEpisodes) {
  ReplayBuffer buffer(2, 1, 5);
  for (int i = 0; i < 5; ++i) buffer.append_episode(line_episode(4, false), i);
  EXPECT_LE(buffer.size(), 5u);
  EXPECT_EQ(buffer.segments().back().iteration, 4);
  EXPECT_EQ(buffer.episodes().front().first, 0u);
}
