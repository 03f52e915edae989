#include <gtest/gtest.h>

#include "training_fixture.hpp"

using namespace emomix;
using namespace emomix::testing;

namespace {

std::vector<double> flatten(AdaptorParams p) {
  std::vector<double> v;
  p.for_each([&](const std::string&, Tensor& t) { v.insert(v.end(), t.data.begin(), t.data.end()); });
  return v;
}

std::vector<double> flatten(DiscriminatorParams d) {
  std::vector<double> v;
  d.for_each([&](const std::string&, Tensor& t) { v.insert(v.end(), t.data.begin(), t.data.end()); });
  return v;
}

}  // namespace

TEST(Vocabulary, SortedAndLookup) {
  auto prob = SmallProblem::make(1);
  EXPECT_TRUE(std::is_sorted(prob.vocab.phonemes.begin(), prob.vocab.phonemes.end()));
  EXPECT_EQ(prob.vocab.speakers, (std::vector<std::string>{"spk0", "spk1"}));
  EXPECT_EQ(prob.vocab.speaker_id("spk1"), 1);
  EXPECT_THROW(prob.vocab.phoneme_id("nope"), Error);
}

TEST(LossReport, CompositesAreExactSums) {
  auto prob = SmallProblem::make(2);
  auto [p, d] = prob.params();
  for (bool adv : {true, false}) {
    const auto r = evaluate_objective(p, d, prob.batch, adv, nullptr, nullptr);
    EXPECT_NEAR(r.L_categorical, r.L_p + r.L_d + r.L_e, 1e-9);
    EXPECT_NEAR(r.L_intermediate, r.L_adv() + r.L_p_tilde + r.L_d_tilde + r.L_e_tilde, 1e-9);
    EXPECT_NEAR(r.L_total, r.L_categorical + r.L_intermediate, 1e-9);
    for (const auto& [name, v] : r.fields()) EXPECT_TRUE(std::isfinite(v)) << name;
    if (!adv) EXPECT_EQ(r.L_adv(), 0.0);
  }
}

TEST(LossReport, AdversarialColumnsOnlyWhenEnabled) {
  LossReport r;
  r.adversarial = false;
  for (const auto& [name, v] : r.fields()) EXPECT_EQ(name.find("adv"), std::string::npos);
  const auto csv = format_loss_csv({}, false);
  EXPECT_EQ(csv.find("L_adv"), std::string::npos);
  EXPECT_NE(format_loss_csv({}, true).find("L_adv_p"), std::string::npos);
}

TEST(LossReport, NonFiniteRaisesDivergence) {
  LossReport r;
  r.step = 12;
  r.L_p_tilde = std::numeric_limits<double>::quiet_NaN();
  try {
    check_finite(r);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.term(), "L_p_tilde");
    EXPECT_EQ(e.step(), 12);
  }
}

TEST(TrainStep, ZeroLearningRatesLeaveParameters) {
  auto prob = SmallProblem::make(4);
  prob.cfg.lr_generator = prob.cfg.lr_discriminator = 0.0;
  auto [p, d] = prob.params();
  const auto p0 = flatten(p), d0 = flatten(d);
  const auto r = train_step(p, d, prob.batch, prob.cfg);
  EXPECT_EQ(flatten(p), p0);
  EXPECT_EQ(flatten(d), d0);
  EXPECT_GT(r.L_total, 0.0);
}

TEST(TrainStep, PhasesTouchOnlyTheirParameters) {
  auto prob = SmallProblem::make(5);
  prob.cfg.lr_generator = 0.0;
  auto [p, d] = prob.params();
  const auto p0 = flatten(p), d0 = flatten(d);
  train_step(p, d, prob.batch, prob.cfg);
  EXPECT_EQ(flatten(p), p0);
  EXPECT_NE(flatten(d), d0);

  prob.cfg.lr_generator = 0.05;
  prob.cfg.lr_discriminator = 0.0;
  auto [p2, d2] = prob.params();
  train_step(p2, d2, prob.batch, prob.cfg);
  EXPECT_NE(flatten(p2), p0);
  EXPECT_EQ(flatten(d2), d0);
}

TEST(TrainStep, NoDiscriminatorLeavesDiscriminator) {
  auto prob = SmallProblem::make(6);
  prob.cfg.use_discriminator = false;
  auto [p, d] = prob.params();
  const auto d0 = flatten(d);
  const auto r = train_step(p, d, prob.batch, prob.cfg);
  EXPECT_EQ(flatten(d), d0);
  EXPECT_FALSE(r.adversarial);
}

TEST(TrainStep, RecordOverloadMatchesResolvedBatch) {
  auto prob = SmallProblem::make(7);
  std::vector<UtteranceRecord> recs;
  for (const auto& [k, r] : prob.index.records()) recs.push_back(r);
  recs.resize(3);
  std::vector<PseudoLabel> labels(prob.labels.begin(), prob.labels.begin() + 3);
  auto [p1, d1] = prob.params();
  auto [p2, d2] = prob.params();
  const auto a = train_step(p1, d1, recs, labels, prob.vocab, prob.index, prob.cfg);
  const auto b = train_step(p2, d2, resolve_batch(recs, labels, prob.vocab, prob.index), prob.cfg);
  EXPECT_EQ(a.L_total, b.L_total);
  EXPECT_EQ(flatten(p1), flatten(p2));
}

TEST(Training, ReproducibleTrajectory) {
  auto prob = SmallProblem::make(8);
  std::vector<TrainingItem> cat, inter;
  for (const auto& [k, r] : prob.index.records()) cat.push_back(resolve(r, prob.vocab));
  for (const auto& l : prob.labels) inter.push_back(resolve(l, prob.vocab, prob.index));
  auto run = [&] {
    auto [p, d] = prob.params();
    TrainingRun tr{p, d, {}, 0};
    train(tr, cat, inter, prob.cfg, 30);
    return format_loss_csv(tr.trajectory, true);
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 31);
}

TEST(GradientCheck, PassesOnRandomConfigs) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto prob = SmallProblem::make(seed);
    auto [p, d] = prob.params();
    for (bool adv : {true, false}) {
      GradientCheckOptions opts;
      opts.adversarial = adv;
      const auto r = gradient_check(p, d, prob.batch, 1e-5, opts);
      EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed << " worst " << r.worst_parameter;
      EXPECT_EQ(r.parameters_checked, parameter_count(p) + (adv ? flatten(d).size() : 0));
    }
  }
}

TEST(GradientCheck, DoubledGradientFlagged) {
  auto prob = SmallProblem::make(14);
  auto [p, d] = prob.params();
  GradientCheckOptions opts;
  opts.tamper = [](AdaptorParams& g, DiscriminatorParams&) { g.head(Element::kPitch).b2.data[0] *= 2.0; };
  const auto r = gradient_check(p, d, prob.batch, 1e-5, opts);
  EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-4);
  EXPECT_EQ(r.worst_parameter, "head.pitch.b2[0]");
}

TEST(GradientCheck, PerfectFitHasZeroGradient) {
  auto prob = SmallProblem::make(15);
  auto [p, d] = prob.params();
  p.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
  p.head(Element::kDuration).b2.data[0] = std::log(3.0);
  for (auto* half : {&prob.batch.categorical, &prob.batch.intermediate})
    for (auto& item : *half)
      for (std::size_t k = 0; k < item.target.size(); ++k) {
        item.target.duration[k] = 2;
        item.target.pitch[k] = p.norm.pitch_mean;
        item.target.energy[k] = p.norm.energy_mean;
      }
  auto g = p.zeros_like();
  const auto r = evaluate_objective(p, d, prob.batch, false, &g, nullptr);
  EXPECT_NEAR(r.L_total, 0.0, 1e-28);
  for (double v : flatten(g)) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(IntensityProbe, ReportsEveryLambda) {
  auto prob = SmallProblem::make(16);
  auto [p, d] = prob.params();
  const std::vector<double> lambdas = {0.0, 0.5, 1.0};
  const auto rows = intensity_probe(p, prob.vocab, prob.index, lambdas);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].emotion, Emotion::kHappy);
    EXPECT_EQ(rows[i].lambda, lambdas[i]);
    EXPECT_GT(rows[i].phonemes, 0u);
  }
  EXPECT_EQ(format_intensity_csv(rows).substr(0, 15), "emotion,lambda,");
}

TEST(Checkpoint, RoundTrip) {
  auto prob = SmallProblem::make(17);
  auto [p, d] = prob.params();
  Checkpoint ck{prob.cfg, prob.vocab, p, d, 42};
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.vocab, prob.vocab);
  EXPECT_EQ(back.params.norm, p.norm);
  EXPECT_EQ(flatten(back.params), flatten(p));
  EXPECT_EQ(flatten(back.disc), flatten(d));
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(decode_checkpoint("XXXX" + bytes.substr(4)), Error);
}
