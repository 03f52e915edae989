#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace emomix;
using namespace emomix::testing;

namespace {

PhonemeAlignment random_contiguous(Rng& rng, std::size_t n) {
  PhonemeAlignment a;
  double t = rng.uniform(0.0, 0.2);
  for (std::size_t i = 0; i < n; ++i) {
    const double end = t + rng.uniform(0.002, 0.3);
    a.entries.push_back({"P" + std::to_string(rng.below(40)), t, end});
    t = end;
  }
  return a;
}

F0Track f0_track(std::vector<double> values) {
  F0Track t;
  t.hop_length = 256;
  t.sample_rate = 22050;
  for (double v : values) t.voiced.push_back(v > 0.0);
  t.values = std::move(values);
  return t;
}

EnergyTrack energy_track(std::vector<double> values) {
  EnergyTrack t;
  t.hop_length = 256;
  t.sample_rate = 22050;
  t.values = std::move(values);
  return t;
}

const double kHop = 256.0 / 22050.0;

}  // namespace

TEST(Alignment, ParsesTwoEntries) {
  const auto a = parse_alignment("AH\t0.00\t0.10\nT\t0.10\t0.25");
  ASSERT_EQ(a.entries.size(), 2u);
  EXPECT_NEAR(a.entries[0].end - a.entries[0].start, 0.10, 1e-12);
  EXPECT_NEAR(a.entries[1].end - a.entries[1].start, 0.15, 1e-12);
}

TEST(Alignment, CommentsAndCrlfIgnored) {
  const auto a = parse_alignment("# header\r\nAH\t0\t0.1\r\n\n");
  ASSERT_EQ(a.entries.size(), 1u);
  EXPECT_EQ(a.entries[0].phoneme, "AH");
}

TEST(Alignment, RejectsInvalidEntries) {
  EXPECT_THROW(parse_alignment("AH\t0.20\t0.10"), Error);
  EXPECT_THROW(parse_alignment("AH\t0.0\t0.2\nB\t0.1\t0.3"), Error);
  EXPECT_THROW(parse_alignment("AH\t0.0"), Error);
  EXPECT_THROW(parse_alignment("AH\tx\t0.1"), Error);
  EXPECT_THROW(parse_alignment(""), Error);
}

TEST(Alignment, FiftyPhonemeRoundTrip) {
  Rng rng(50);
  const auto a = random_contiguous(rng, 50);
  const auto once = parse_alignment(format_alignment(a));
  const auto twice = parse_alignment(format_alignment(once));
  EXPECT_EQ(once.entries, a.entries);
  EXPECT_EQ(twice.entries, once.entries);
}

TEST(Durations, HandArithmetic) {
  PhonemeAlignment a;
  a.entries.push_back({"AH", 0.0, 0.1});
  EXPECT_EQ(durations_in_frames(a, AnalysisConfig{}, 22050), std::vector<int>{9});
  a.entries[0] = {"T", 0.0, 0.004};
  EXPECT_EQ(durations_in_frames(a, AnalysisConfig{}, 22050), std::vector<int>{0});
}

TEST(Durations, TelescopeToAlignmentSpan) {
  Rng rng(9);
  AnalysisConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_contiguous(rng, 1 + rng.below(30));
    const auto d = durations_in_frames(a, cfg, 22050);
    const double fr = frame_rate(cfg, 22050);
    long total = 0;
    for (int v : d) {
      EXPECT_GE(v, 0);
      total += v;
    }
    EXPECT_EQ(total, time_to_frame(a.entries.back().end, fr) - time_to_frame(a.entries.front().start, fr));
  }
}

TEST(PhonemeAverage, ConstantTracks) {
  Rng rng(2);
  const auto a = random_contiguous(rng, 8);
  const auto frames = static_cast<std::size_t>(a.entries.back().end / kHop) + 2;
  const auto f = phoneme_average(f0_track(std::vector<double>(frames, 200.0)),
                                 energy_track(std::vector<double>(frames, 1.0)), a, AnalysisConfig{});
  ASSERT_EQ(f.size(), 8u);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.duration[i] == 0) continue;
    EXPECT_DOUBLE_EQ(f.pitch[i], 200.0);
    EXPECT_DOUBLE_EQ(f.energy[i], 1.0);
  }
}

TEST(PhonemeAverage, InterpolatesUnvoicedMiddle) {
  PhonemeAlignment a;
  a.entries.push_back({"AA", 0.0, 3 * kHop});
  const auto f = phoneme_average(f0_track({100.0, 0.0, 300.0}), energy_track({1, 1, 1}), a, AnalysisConfig{});
  EXPECT_NEAR(continuous_f0(f0_track({100.0, 0.0, 300.0}))[1], 200.0, 1e-12);
  EXPECT_NEAR(f.pitch[0], 200.0, 1e-12);
  EXPECT_EQ(f.duration[0], 3);
}

TEST(PhonemeAverage, DisjointEnergyMeans) {
  PhonemeAlignment a;
  a.entries.push_back({"A", 0.0, 2 * kHop});
  a.entries.push_back({"B", 2 * kHop, 4 * kHop});
  const auto f = phoneme_average(f0_track({0, 0, 0, 0}), energy_track({1, 1, 3, 3}), a, AnalysisConfig{});
  EXPECT_DOUBLE_EQ(f.energy[0], 1.0);
  EXPECT_DOUBLE_EQ(f.energy[1], 3.0);
  EXPECT_EQ(f.pitch, (std::vector<double>{0.0, 0.0}));
}

TEST(PhonemeAverage, EdgeGapsTakeNearestVoiced) {
  const auto c = continuous_f0(f0_track({0, 0, 150, 0, 170, 0}));
  EXPECT_EQ(c, (std::vector<double>{150, 150, 150, 160, 170, 170}));
}

TEST(PhonemeAverage, ZeroDurationPhonemeGetsZeros) {
  PhonemeAlignment a;
  a.entries.push_back({"A", 0.0, 2 * kHop});
  a.entries.push_back({"B", 2 * kHop, 2 * kHop + 0.001});
  a.entries.push_back({"C", 2 * kHop + 0.001, 4 * kHop});
  const auto f = phoneme_average(f0_track({100, 100, 100, 100}), energy_track({2, 2, 2, 2}), a, AnalysisConfig{});
  EXPECT_EQ(f.duration[1], 0);
  EXPECT_EQ(f.pitch[1], 0.0);
  EXPECT_EQ(f.energy[1], 0.0);
}

TEST(PhonemeAverage, RandomizedProperties) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_contiguous(rng, 1 + rng.below(12));
    const auto frames = static_cast<std::size_t>(a.entries.back().end / kHop) + 1;
    std::vector<double> f0(frames), en(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      f0[i] = rng.coin() ? rng.uniform(80.0, 400.0) : 0.0;
      en[i] = rng.uniform(0.0, 5.0);
    }
    const auto track = f0_track(f0);
    const auto f = phoneme_average(track, energy_track(en), a, AnalysisConfig{});
    ASSERT_EQ(f.size(), a.entries.size());
    const auto cont = continuous_f0(track);
    const double fr = frame_rate(AnalysisConfig{}, 22050);
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_EQ(f.phonemes[i], a.entries[i].phoneme);
      const long lo = time_to_frame(a.entries[i].start, fr);
      const long hi = std::min<long>(time_to_frame(a.entries[i].end, fr), static_cast<long>(frames));
      if (hi <= lo) continue;
      const auto [mn, mx] = std::minmax_element(cont.begin() + lo, cont.begin() + hi);
      EXPECT_GE(f.pitch[i], *mn - 1e-9);
      EXPECT_LE(f.pitch[i], *mx + 1e-9);
    }
    EXPECT_EQ(f, phoneme_average(track, energy_track(en), a, AnalysisConfig{}));
  }
}

TEST(PhonemeAverage, RejectsInconsistentInputs) {
  PhonemeAlignment a;
  a.entries.push_back({"A", 0.0, 1.0});
  EXPECT_THROW(phoneme_average(f0_track({100, 100}), energy_track({1, 1}), a, AnalysisConfig{}), Error);
  a.entries[0].end = 2 * kHop;
  EXPECT_THROW(phoneme_average(f0_track({100, 100}), energy_track({1}), a, AnalysisConfig{}), Error);
  auto other = energy_track({1, 1});
  other.hop_length = 128;
  EXPECT_THROW(phoneme_average(f0_track({100, 100}), other, a, AnalysisConfig{}), Error);
}

TEST(PhonemeFeaturesIo, RoundTrip) {
  Rng rng(4);
  auto f = random_features(rng, 12);
  EXPECT_EQ(parse_phoneme_features(format_phoneme_features(f)), f);
  EXPECT_THROW(parse_phoneme_features("A\t100\t1.5\t2\n"), Error);
  EXPECT_THROW(parse_phoneme_features("A\t-100\t1\t2\n"), Error);
}
