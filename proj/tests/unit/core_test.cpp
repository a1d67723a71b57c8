#include "aloe/core.hpp"
#include "aloe/dataset_io.hpp"
#include "aloe/kv_config.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace aloe;

namespace {

TransitionSegment sample_segment() {
  TransitionSegment s;
  s.state.obs = Vector::LinSpaced(3, 0.1, 0.3);
  s.state.task_id = 1;
  Matrix a(2, 2);
  a << 0.5, -0.25, 1.0 / 3.0, 0.125;
  s.chunk = ActionChunk(a, 2);
  s.rewards = {-1.0, -1.0};
  s.next_state.obs = Vector::LinSpaced(3, 0.4, 0.6);
  s.next_state.task_id = 1;
  s.source = Source::Intervention;
  s.episode = 7;
  s.start_step = 4;
  s.iteration = 2;
  return s;
}

}  // namespace

TEST(Reward, TerminalSuccessIsZero) {
  EXPECT_EQ(step_reward(true, false, true, RewardSpec{200.0, -1.0}), 0.0);
}

TEST(Reward, TerminalFailureIsMinusCFail) {
  EXPECT_EQ(step_reward(false, true, true, RewardSpec{200.0, -1.0}), -200.0);
}

TEST(Reward, IntermediateStepIsMinusOne) {
  EXPECT_EQ(step_reward(false, false, false, RewardSpec{200.0, -1.0}), -1.0);
}

TEST(Reward, EveryOutcomeIsNonPositive) {
  for (bool s : {false, true}) {
    for (bool f : {false, true}) {
      for (bool t : {false, true}) {
        if (s && f) continue;
        if ((s || f) && !t) continue;
        EXPECT_LE(step_reward(s, f, t, RewardSpec{5.0, -1.0}), 0.0);
      }
    }
  }
}

TEST(Reward, DiscountedSumMatchesHandComputation) {
  EXPECT_DOUBLE_EQ(discounted_sum({-1.0, -1.0, -10.0}, 0.9), -1.0 - 0.9 - 0.81 * 10.0);
  EXPECT_DOUBLE_EQ(discounted_sum({-3.0, 5.0}, 0.0), -3.0);
  EXPECT_EQ(discounted_sum({}, 0.9), 0.0);
}

TEST(ActionChunk, FlattenIsRowMajorAndRoundTrips) {
  Matrix a(3, 2);
  a << 1, 2, 3, 4, 5, 6;
  const ActionChunk c(a);
  EXPECT_TRUE(c.full());
  const Vector flat = c.flattened();
  for (int i = 0; i < 6; ++i) EXPECT_EQ(flat[i], i + 1);
  EXPECT_EQ(ActionChunk::from_flat(flat, 3, 2), c);
}

TEST(ActionChunk, RejectsValidLengthOutsideHorizon) {
  EXPECT_THROW(ActionChunk(Matrix::Zero(2, 1), 3), std::invalid_argument);
  EXPECT_THROW(ActionChunk(Matrix::Zero(2, 1), -1), std::invalid_argument);
}

TEST(Segment, ValidateChecksRewardCountAndTermination) {
  TransitionSegment s = sample_segment();
  EXPECT_NO_THROW(s.validate());
  s.rewards.push_back(-1.0);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = sample_segment();
  s.success = true;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.terminated = true;
  EXPECT_NO_THROW(s.validate());
  s.handover = true;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.success = false;
  EXPECT_NO_THROW(s.validate());
  s.terminated = false;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Segment, SourceLabelsRoundTrip) {
  for (Source s : {Source::PolicyRollout, Source::Intervention}) EXPECT_EQ(source_from_string(to_string(s)), s);
  EXPECT_THROW(source_from_string("human"), std::invalid_argument);
}

TEST(DatasetIo, JsonLinesRoundTripIsExact) {
  std::vector<TransitionSegment> segs{sample_segment(), sample_segment()};
  segs[1].terminated = true;
  segs[1].success = true;
  segs[1].rewards = {-1.0, 0.0};
  segs[1].source = Source::PolicyRollout;
  std::stringstream buf;
  write_segments_jsonl(buf, segs);
  const auto back = read_segments_jsonl(buf);
  ASSERT_EQ(back.size(), segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) EXPECT_EQ(back[i], segs[i]);
}

TEST(DatasetIo, MalformedLineReportsLineNumber) {
  std::stringstream buf;
  write_segments_jsonl(buf, {sample_segment()});
  buf << "{not json}\n";
  try {
    read_segments_jsonl(buf);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(KeyValueConfig, ParsesTypedValuesAndComments) {
  const auto cfg = KeyValueConfig::parse_string("# header\na = 3\nb = 0.5   # trailing\nc = 1 2 3\nd = true\n");
  EXPECT_EQ(cfg.get_int("a", 0, 10), 3);
  EXPECT_EQ(cfg.get_double("b", 0.0, 1.0), 0.5);
  EXPECT_EQ(cfg.get_ints("c"), (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(cfg.get_bool("d", false));
  EXPECT_NO_THROW(cfg.finish());
}

TEST(KeyValueConfig, OutOfRangeErrorNamesTheLine) {
  const auto cfg = KeyValueConfig::parse_string("a = 1\n\nb = 42\n", "x.cfg");
  try {
    cfg.get_int("b", 0, 10);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("x.cfg:3"), std::string::npos) << e.what();
  }
}

TEST(KeyValueConfig, UnknownKeyIsRejectedByFinish) {
  const auto cfg = KeyValueConfig::parse_string("a = 1\ntypo = 2\n");
  cfg.get_int("a", 0, 10);
  try {
    cfg.finish();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(KeyValueConfig, MissingRequiredKeyAndBadSyntaxThrow) {
  const auto cfg = KeyValueConfig::parse_string("a = 1\n");
  EXPECT_THROW(cfg.get_int("missing", 0, 1), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("no equals sign\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse_string("a = x\n").get_double("a", 0, 1), ConfigError);
}

TEST(KeyValueConfig, CanonicalTextIsSortedAndIncludesOverrides) {
  auto cfg = KeyValueConfig::parse_string("b = 2\na = 1\n");
  cfg.set("c", "3");
  cfg.set("a", "9");
  EXPECT_EQ(cfg.canonical_text(), "a = 9\nb = 2\nc = 3\n");
}
