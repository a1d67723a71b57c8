#include "aloe/critic.hpp"

#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace aloe;
using aloe::testing::finite_difference;
using aloe::testing::relative_error;

namespace {

CriticFeatures concat_features(int obs_dim = 3, int h = 2, int d = 1) {
  return CriticFeatures{CriticFeatures::Kind::Concat, obs_dim, h, d, 1};
}

// Linear ensemble whose members output fixed constants.
EnsembleCritic constant_critic(const std::vector<double>& values, int h = 2, bool pessimistic = true) {
  CriticConfig c;
  c.ensemble_size = static_cast<int>(values.size());
  c.hidden = {};
  c.pessimistic_targets = pessimistic;
  Rng rng(0);
  EnsembleCritic critic(concat_features(3, h), c, rng);
  for (std::size_t i = 0; i < values.size(); ++i) {
    critic.online()[i].params().setZero();
    critic.online()[i].bias(0)[0] = values[i];
    critic.target()[i] = critic.online()[i];
  }
  return critic;
}

State state3(double a, double b, double c) {
  State s;
  s.obs = Vector(3);
  s.obs << a, b, c;
  return s;
}

TransitionSegment segment(std::vector<double> rewards, bool terminated, bool success, int h = 2) {
  TransitionSegment s;
  s.state = state3(0.1, 0.2, 0.3);
  s.chunk = ActionChunk(Matrix::Constant(h, 1, 0.5), static_cast<int>(rewards.size()));
  s.rewards = std::move(rewards);
  s.next_state = state3(0.4, 0.5, 0.6);
  s.terminated = terminated;
  s.success = success;
  return s;
}

ChunkSampler fixed_sampler(int h) {
  return [h](const std::vector<State>& states, Rng&) {
    return std::vector<ActionChunk>(states.size(), ActionChunk(Matrix::Constant(h, 1, -0.5)));
  };
}

}  // namespace

TEST(Pessimism, MinimumOfMembers) {
  const EnsembleCritic critic = constant_critic({-3.0, -2.5, -4.1});
  const TransitionSegment s = segment({-1.0, -1.0}, false, false);
  EXPECT_DOUBLE_EQ(critic.pessimistic_q(s.state, s.chunk, false), -4.1);
}

TEST(Pessimism, SingleMemberIsTheNetItself) {
  CriticConfig c;
  c.ensemble_size = 1;
  c.hidden = {8};
  Rng rng(1);
  const EnsembleCritic critic(concat_features(), c, rng);
  const TransitionSegment s = segment({-1.0, -1.0}, false, false);
  Vector x(critic.features().input_dim());
  critic.features().encode(s.state, s.chunk, x);
  EXPECT_DOUBLE_EQ(critic.pessimistic_q(s.state, s.chunk, false), critic.online()[0].forward_one(x)[0]);
}

TEST(Pessimism, IdenticalMembersTie) {
  CriticConfig c;
  c.ensemble_size = 4;
  c.hidden = {8};
  Rng rng(2);
  EnsembleCritic critic(concat_features(), c, rng);
  for (auto& m : critic.online()) m = critic.online()[0];
  const TransitionSegment s = segment({-1.0, -1.0}, false, false);
  const auto members = critic.member_values(s.state, s.chunk, false);
  for (double v : members) EXPECT_EQ(v, critic.pessimistic_q(s.state, s.chunk, false));
}

TEST(Pessimism, MinNeverExceedsMeanOnRandomInputs) {
  CriticConfig c;
  c.ensemble_size = 5;
  c.hidden = {16, 16};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const EnsembleCritic critic(concat_features(), c, rng);
    const Matrix x = Matrix::Random(critic.features().input_dim(), 200);
    const Matrix q = critic.member_values(x, false);
    for (Eigen::Index j = 0; j < q.cols(); ++j) EXPECT_LE(q.col(j).minCoeff(), q.col(j).mean());
  }
}

TEST(Pessimism, TruncatedChunkIsRejected) {
  const EnsembleCritic critic = constant_critic({-1.0, -2.0});
  const TransitionSegment s = segment({-10.0}, true, false);
  EXPECT_THROW(critic.pessimistic_q(s.state, s.chunk, false), std::invalid_argument);
}

TEST(TdTarget, GeometricSumWithBootstrap) {
  const EnsembleCritic critic = constant_critic({-5.0, -2.0, -3.0});
  Rng rng(0);
  const auto seg = segment({-1.0, -1.0}, false, false);
  EXPECT_NEAR(td_chunk_target(seg, fixed_sampler(2), critic, 1, rng) - (-1.0 - 0.99) + 5.0 * 0.99 * 0.99, 0.0, 1e-12);
}

TEST(TdTarget, HandExampleGammaPointNine) {
  CriticConfig c;
  c.ensemble_size = 2;
  c.gamma = 0.9;
  c.hidden = {};
  Rng rng(0);
  EnsembleCritic critic(concat_features(), c, rng);
  for (auto* set : {&critic.online(), &critic.target()}) {
    for (auto& m : *set) m.params().setZero();
  }
  critic.target()[0].bias(0)[0] = -5.0;
  critic.target()[1].bias(0)[0] = -1.0;
  const auto seg = segment({-1.0, -1.0}, false, false);
  EXPECT_NEAR(td_chunk_target(seg, fixed_sampler(2), critic, 3, rng), -5.95, 1e-12);
}

TEST(TdTarget, TerminalSuccessDoesNotBootstrap) {
  CriticConfig c;
  c.ensemble_size = 2;
  c.gamma = 0.9;
  c.hidden = {};
  Rng rng(0);
  EnsembleCritic critic(concat_features(), c, rng);
  for (auto& m : critic.target()) m.bias(0)[0] = -100.0;
  EXPECT_NEAR(td_chunk_target(segment({-1.0, 0.0}, true, true), fixed_sampler(2), critic, 2, rng), -1.0, 1e-15);
  EXPECT_NEAR(td_chunk_target(segment({-50.0}, true, false), fixed_sampler(2), critic, 2, rng), -50.0, 1e-15);
}

TEST(TdTarget, MyopicDiscountIgnoresBootstrap) {
  CriticConfig c;
  c.ensemble_size = 2;
  c.gamma = 0.0;
  c.hidden = {};
  Rng rng(0);
  EnsembleCritic critic(concat_features(), c, rng);
  for (auto& m : critic.target()) m.bias(0)[0] = -100.0;
  EXPECT_EQ(td_chunk_target(segment({-1.0, -1.0}, false, false), fixed_sampler(2), critic, 2, rng), -1.0);
}

TEST(TdTarget, MeanAggregateWhenPessimismDisabled) {
  const EnsembleCritic pess = constant_critic({-4.0, -2.0}, 2, true);
  const EnsembleCritic mean = constant_critic({-4.0, -2.0}, 2, false);
  Rng rng(0);
  const auto seg = segment({-1.0, -1.0}, false, false);
  const double g = 0.99 * 0.99;
  EXPECT_NEAR(td_chunk_target(seg, fixed_sampler(2), pess, 1, rng), -1.99 - 4.0 * g, 1e-12);
  EXPECT_NEAR(td_chunk_target(seg, fixed_sampler(2), mean, 1, rng), -1.99 - 3.0 * g, 1e-12);
}

TEST(TdTarget, AveragesOverNextActionSamples) {
  // Linear critic reading the first chunk entry: Q = 10 * a_0.
  CriticConfig c;
  c.ensemble_size = 1;
  c.gamma = 0.5;
  c.hidden = {};
  Rng init(0);
  EnsembleCritic critic(concat_features(), c, init);
  auto& net = critic.target()[0];
  net.params().setZero();
  net.params()[3] = 10.0;  // weight on the first chunk entry (after 3 obs entries)
  int calls = 0;
  const ChunkSampler alternating = [&calls](const std::vector<State>& states, Rng&) {
    std::vector<ActionChunk> out;
    for (std::size_t i = 0; i < states.size(); ++i) {
      out.emplace_back(Matrix::Constant(2, 1, calls++ % 2 == 0 ? -1.0 : -0.5));
    }
    return out;
  };
  Rng rng(0);
  const double y = td_chunk_target(segment({-1.0, -1.0}, false, false), alternating, critic, 2, rng);
  EXPECT_NEAR(y, -1.5 + 0.25 * (-7.5), 1e-12);
}

TEST(TdTarget, RewardCountMismatchThrows) {
  const EnsembleCritic critic = constant_critic({-1.0, -2.0});
  auto seg = segment({-1.0, -1.0}, false, false);
  seg.rewards.pop_back();
  Rng rng(0);
  EXPECT_THROW(td_chunk_target(seg, fixed_sampler(2), critic, 1, rng), std::invalid_argument);
}

TEST(CriticLoss, PerfectFitHasZeroLossAndGradient) {
  const EnsembleCritic critic = constant_critic({-2.0, -2.0, -2.0});
  const auto a = segment({-1.0, -1.0}, false, false);
  const auto b = segment({-1.0, 0.0}, true, true);
  const CriticLoss l = critic_loss_and_grads({&a, &b}, {-2.0, -2.0}, critic);
  EXPECT_EQ(l.loss, 0.0);
  for (const auto& g : l.grads) EXPECT_EQ(g.norm(), 0.0);
}

TEST(CriticLoss, SymmetricResiduals) {
  const EnsembleCritic critic = constant_critic({1.0, -1.0});
  const auto a = segment({-1.0, -1.0}, false, false);
  EXPECT_DOUBLE_EQ(critic_loss_and_grads({&a}, {0.0}, critic).loss, 1.0);
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CriticConfig c;
    c.ensemble_size = 3;
    c.hidden = {12, 12};
    c.activation = Activation::Tanh;
    c.value_scale = 2.5;
    Rng rng(seed);
    EnsembleCritic critic(concat_features(), c, rng);
    auto a = segment({-1.0, -1.0}, false, false);
    auto b = segment({-1.0, 0.0}, true, true);
    b.state = state3(-0.3, 0.9, 0.0);
    b.chunk.actions << 0.2, -0.7;
    const std::vector<double> y{-3.0, -0.5};
    const CriticLoss l = critic_loss_and_grads({&a, &b}, y, critic);
    for (int k = 0; k < 3; ++k) {
      const auto f = [&](const Vector& p) {
        EnsembleCritic probe = critic;
        probe.online()[k].params() = p;
        return critic_loss_and_grads({&a, &b}, y, probe).loss;
      };
      EXPECT_LT(relative_error(l.grads[k], finite_difference(f, critic.online()[k].params())), 1e-4)
          << "seed " << seed << " member " << k;
    }
  }
}

TEST(Polyak, FullCopyFrozenAndCoefficient) {
  CriticConfig c;
  c.ensemble_size = 2;
  c.hidden = {4};
  Rng rng(0);
  EnsembleCritic base(concat_features(), c, rng);
  for (auto& m : base.online()) m.params().setConstant(1.0);
  for (auto& m : base.target()) m.params().setConstant(0.0);

  auto full_ck = base.to_checkpoint();
  full_ck.meta["polyak"] = 1.0;
  EnsembleCritic full = EnsembleCritic::from_checkpoint(full_ck);
  full.polyak_update();
  for (int i = 0; i < 2; ++i) EXPECT_EQ(full.target()[i].params(), full.online()[i].params());

  auto frozen_ck = base.to_checkpoint();
  frozen_ck.meta["polyak"] = 0.0;
  EnsembleCritic frozen = EnsembleCritic::from_checkpoint(frozen_ck);
  frozen.polyak_update();
  for (int i = 0; i < 2; ++i) EXPECT_EQ(frozen.target()[i].params().norm(), 0.0);

  EnsembleCritic standard = base;  // default polyak 0.005
  standard.polyak_update();
  for (int i = 0; i < 2; ++i) {
    for (double v : standard.target()[i].params()) EXPECT_DOUBLE_EQ(v, 0.005);
  }
}

TEST(Polyak, RepeatedUpdatesConvergeGeometrically) {
  const EnsembleCritic start = [] {
    CriticConfig c;
    c.ensemble_size = 1;
    c.hidden = {};
    c.polyak = 0.1;
    Rng rng(0);
    EnsembleCritic e(concat_features(), c, rng);
    e.online()[0].params().setConstant(2.0);
    e.target()[0].params().setConstant(0.0);
    return e;
  }();
  EnsembleCritic e = start;
  for (int n = 0; n < 10; ++n) e.polyak_update();
  const double expected = 2.0 * (1.0 - std::pow(0.9, 10));
  for (double v : e.target()[0].params()) EXPECT_NEAR(v, expected, 1e-14);
}

TEST(EnsembleCritic, CheckpointRoundTripIsExact) {
  CriticConfig c;
  c.ensemble_size = 3;
  c.hidden = {5};
  c.value_scale = 7.0;
  c.pessimistic_targets = false;
  Rng rng(9);
  EnsembleCritic critic(concat_features(4, 3, 2), c, rng);
  critic.online()[1].params()[0] += 1.0;
  const EnsembleCritic back = EnsembleCritic::from_checkpoint(critic.to_checkpoint());
  EXPECT_EQ(back.size(), 3);
  EXPECT_EQ(back.config().value_scale, 7.0);
  EXPECT_FALSE(back.config().pessimistic_targets);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back.online()[i].params(), critic.online()[i].params());
    EXPECT_EQ(back.target()[i].params(), critic.target()[i].params());
  }
  EXPECT_EQ(back.features().horizon, 3);
  EXPECT_EQ(back.features().action_dim, 2);
}

TEST(EnsembleCritic, MembersAreIndependentlyInitialised) {
  CriticConfig c;
  c.ensemble_size = 3;
  c.hidden = {8};
  Rng rng(0);
  const EnsembleCritic critic(concat_features(), c, rng);
  EXPECT_NE(critic.online()[0].params(), critic.online()[1].params());
  EXPECT_EQ(critic.online()[2].params(), critic.target()[2].params());
}

TEST(Features, TabularEncodingIsOneHotOverStateAndCode) {
  const CriticFeatures f{CriticFeatures::Kind::ChainTabular, 5, 2, 1, 1};
  EXPECT_EQ(f.input_dim(), 20);
  State s;
  s.obs = Vector::Zero(5);
  s.obs[3] = 1.0;
  Matrix a(2, 1);
  a << 1.0, -1.0;  // code 0b10
  Vector x(20);
  f.encode(s, ActionChunk(a), x);
  EXPECT_EQ(x.sum(), 1.0);
  EXPECT_EQ(x[3 * 4 + 2], 1.0);
}
