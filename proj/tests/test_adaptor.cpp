#include <gtest/gtest.h>

#include "training_fixture.hpp"

using namespace emomix;
using namespace emomix::testing;

namespace {

void zero_all(AdaptorParams& p) {
  p.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
}

void zero_all(DiscriminatorParams& d) {
  d.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
}

}  // namespace

TEST(Init, DeterministicAndShaped) {
  AdaptorConfig cfg;
  cfg.vocab_size = 40;
  cfg.speaker_count = 3;
  cfg.seed = 17;
  auto [p1, d1] = init_params(cfg);
  auto [p2, d2] = init_params(cfg);
  EXPECT_EQ(p1.phoneme_table.rows, 40u);
  EXPECT_EQ(p1.phoneme_table.cols, 8u);
  EXPECT_EQ(p1.emotion_table.rows, 5u);
  EXPECT_EQ(p1.phoneme_table, p2.phoneme_table);
  for (Element e : kElements) {
    EXPECT_EQ(p1.head(e).w1, p2.head(e).w1);
    EXPECT_EQ(d1.net(e).w1, d2.net(e).w1);
    EXPECT_EQ(p1.head(e).w1.cols, 24u);
    EXPECT_EQ(d1.net(e).w1.cols, 4u);
  }
  cfg.seed = 18;
  EXPECT_NE(init_params(cfg).first.phoneme_table, p1.phoneme_table);
}

TEST(Init, RejectsBadConfig) {
  AdaptorConfig cfg;
  cfg.hidden_dim = 0;
  EXPECT_THROW(init_params(cfg), ConfigError);
  cfg = AdaptorConfig{};
  cfg.lr_generator = -1.0;
  EXPECT_THROW(init_params(cfg), ConfigError);
}

TEST(Forward, ZeroWeightsGiveBiasResponse) {
  AdaptorConfig cfg;
  cfg.vocab_size = 5;
  auto [p, d] = init_params(cfg);
  zero_all(p);
  p.head(Element::kDuration).b2.data[0] = 0.7;
  p.head(Element::kPitch).b2.data[0] = -0.2;
  p.head(Element::kEnergy).b2.data[0] = 1.5;
  const std::vector<int> ids = {0, 3, 1, 4};
  const auto pred = forward(p, ids, 0, EmotionCondition::intensity(Emotion::kSad, 0.3));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    EXPECT_EQ(pred.log_duration[k], 0.7);
    EXPECT_EQ(pred.pitch[k], -0.2);
    EXPECT_EQ(pred.energy[k], 1.5);
  }
}

TEST(Forward, EndpointConditioningIsPureEmotion) {
  auto prob = SmallProblem::make(3);
  auto [p, d] = prob.params();
  const auto& ids = prob.batch.categorical[0].phoneme_ids;
  for (Emotion e : kAllEmotions) {
    const auto a = forward(p, ids, 0, EmotionCondition{e, Emotion::kNeutral, 1.0});
    const auto b = forward(p, ids, 0, EmotionCondition::pure(e));
    EXPECT_EQ(a.pitch, b.pitch);
    EXPECT_EQ(a.log_duration, b.log_duration);
    EXPECT_EQ(a.energy, b.energy);
  }
}

TEST(Forward, RejectsOutOfRangeIds) {
  AdaptorConfig cfg;
  cfg.vocab_size = 3;
  auto [p, d] = init_params(cfg);
  const std::vector<int> bad = {0, 3};
  EXPECT_THROW(forward(p, bad, 0, EmotionCondition{}), Error);
  const std::vector<int> ok = {0, 2};
  EXPECT_THROW(forward(p, ok, 1, EmotionCondition{}), Error);
  const std::vector<int> empty;
  EXPECT_THROW(forward(p, empty, 0, EmotionCondition{}), Error);
}

TEST(RegressionLoss, Examples) {
  Prediction pred;
  pred.log_duration = {std::log(3.0), std::log(5.0)};
  pred.pitch = {110, 190};
  pred.energy = {0, 0};
  ProsodyTarget target{{100, 200}, {2, 4}, {0, 0}};
  const auto l = loss_regression(pred, target);
  EXPECT_EQ(l.duration, 0.0);
  EXPECT_DOUBLE_EQ(l.pitch, 100.0);
  EXPECT_EQ(l.energy, 0.0);

  Prediction zero{{0, 0}, {0, 0}, {0, 0}};
  const auto z = loss_regression(zero, ProsodyTarget{{0, 0}, {0, 0}, {0, 0}});
  EXPECT_EQ(z.duration + z.pitch + z.energy, 0.0);
}

TEST(RegressionLoss, NonNegativeAndZeroOnlyAtTarget) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    ProsodyTarget t;
    Prediction p;
    for (std::size_t k = 0; k < n; ++k) {
      t.pitch.push_back(rng.uniform(80, 400));
      t.duration.push_back(static_cast<int>(rng.below(20)));
      t.energy.push_back(rng.uniform(0, 5));
      p.pitch.push_back(t.pitch.back());
      p.log_duration.push_back(std::log(t.duration.back() + 1.0));
      p.energy.push_back(t.energy.back());
    }
    const auto exact = loss_regression(p, t);
    EXPECT_EQ(exact.pitch, 0.0);
    EXPECT_NEAR(exact.duration, 0.0, 1e-30);
    EXPECT_EQ(exact.energy, 0.0);
    const std::size_t k = rng.below(n);
    p.pitch[k] += rng.uniform(0.1, 5.0);
    p.energy[k] -= rng.uniform(0.1, 5.0);
    p.log_duration[k] += 0.01;
    const auto off = loss_regression(p, t);
    EXPECT_GT(off.pitch, 0.0);
    EXPECT_GT(off.energy, 0.0);
    EXPECT_GT(off.duration, 0.0);
  }
}

TEST(Discriminator, ZeroWeightsScoreIsBias) {
  AdaptorConfig cfg;
  auto [p, d] = init_params(cfg);
  zero_all(d);
  d.net(Element::kPitch).b2.data[0] = 0.37;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> seq(1 + rng.below(12));
    for (double& v : seq) v = rng.uniform(-3, 3);
    EXPECT_DOUBLE_EQ(discriminator_score(d, Element::kPitch, seq), 0.37);
  }
}

TEST(Discriminator, ConstantSequenceEqualsSingleWindow) {
  AdaptorConfig cfg;
  cfg.seed = 8;
  auto [p, d] = init_params(cfg);
  const std::vector<double> window(static_cast<std::size_t>(cfg.disc_window), 1.3);
  const std::vector<double> eight(8, 1.3), eighty(80, 1.3), short_seq(2, 1.3);
  const double single = discriminator_score(d, Element::kEnergy, window);
  EXPECT_NEAR(discriminator_score(d, Element::kEnergy, eight), single, 1e-12);
  EXPECT_NEAR(discriminator_score(d, Element::kEnergy, eighty), single, 1e-12);
  EXPECT_NEAR(discriminator_score(d, Element::kEnergy, short_seq), single, 1e-12);
}

TEST(Discriminator, DurationScoredInLogDomain) {
  AdaptorConfig cfg;
  cfg.seed = 9;
  auto [p, d] = init_params(cfg);
  d.net(Element::kDuration) = d.net(Element::kPitch);
  const std::vector<double> frames = {1, 4, 9, 2, 0};
  std::vector<double> logs;
  for (double f : frames) logs.push_back(std::log(f + 1.0));
  EXPECT_DOUBLE_EQ(discriminator_score(d, Element::kDuration, frames), discriminator_score(d, Element::kPitch, logs));
}

TEST(AdversarialLoss, LsganTargets) {
  const std::vector<double> ones = {1.0, 1.0}, zeros = {0.0, 0.0, 0.0};
  const auto l = lsgan_losses(ones, zeros);
  EXPECT_EQ(l.disc_loss, 0.0);
  EXPECT_EQ(l.gen_loss, 1.0);
}

TEST(AdversarialLoss, ConstantHalfDiscriminator) {
  AdaptorConfig cfg;
  auto [p, d] = init_params(cfg);
  zero_all(d);
  for (Element e : kElements) d.net(e).b2.data[0] = 0.5;
  const auto l = loss_adversarial(d, Element::kPitch, {{1, 2, 3}, {4}}, {{5, 6, 7, 8, 9}});
  EXPECT_DOUBLE_EQ(l.disc_loss, 0.5);
  EXPECT_DOUBLE_EQ(l.gen_loss, 0.25);
  EXPECT_THROW(loss_adversarial(d, Element::kPitch, {}, {{1.0}}), Error);
}

TEST(AdversarialLoss, ScalarToyConverges) {
  AdaptorConfig cfg;
  cfg.disc_window = 1;
  cfg.seed = 1;
  auto [p, d] = init_params(cfg);
  AdversarialLoss l;
  for (int s = 0; s < 2000; ++s) l = discriminator_step(d, Element::kPitch, {{1.0}}, {{0.0}}, 0.05);
  l = loss_adversarial(d, Element::kPitch, {{1.0}}, {{0.0}});
  EXPECT_LT(l.disc_loss, 0.05);
  EXPECT_NEAR(discriminator_score(d, Element::kPitch, std::vector<double>{1.0}), 1.0, 0.05);
  EXPECT_NEAR(discriminator_score(d, Element::kPitch, std::vector<double>{0.0}), 0.0, 0.05);
}
