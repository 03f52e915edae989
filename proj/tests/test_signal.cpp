#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace emomix;
using namespace emomix::testing;

namespace {

std::vector<unsigned char> wav_bytes(int channels, int sr, const std::vector<std::int16_t>& interleaved) {
  std::vector<unsigned char> out;
  auto put = [&](std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  };
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put(36 + data_bytes, 4);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put(16, 4);
  put(1, 2);
  put(static_cast<std::uint32_t>(channels), 2);
  put(static_cast<std::uint32_t>(sr), 4);
  put(static_cast<std::uint32_t>(sr * channels * 2), 4);
  put(static_cast<std::uint32_t>(channels * 2), 2);
  put(16, 2);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put(data_bytes, 4);
  for (auto s : interleaved) put(static_cast<std::uint16_t>(s), 2);
  return out;
}

}  // namespace

TEST(Wav, OneSecondMonoDecodes) {
  const auto bytes = wav_bytes(1, 22050, std::vector<std::int16_t>(22050, 100));
  const auto w = decode_wav(bytes);
  EXPECT_EQ(w.samples.size(), 22050u);
  EXPECT_EQ(w.sample_rate, 22050);
}

TEST(Wav, StereoOppositeChannelsAverageToZero) {
  std::vector<std::int16_t> s;
  for (int i = 0; i < 100; ++i) s.insert(s.end(), {16384, -16384});
  for (double v : decode_wav(wav_bytes(2, 22050, s)).samples) EXPECT_EQ(v, 0.0);
}

TEST(Wav, HandWrittenFourSamples) {
  const auto w = decode_wav(wav_bytes(1, 16000, {-32768, 0, 16384, 32767}));
  ASSERT_EQ(w.samples.size(), 4u);
  EXPECT_EQ(w.samples[0], -1.0);
  EXPECT_EQ(w.samples[1], 0.0);
  EXPECT_EQ(w.samples[2], 0.5);
  EXPECT_DOUBLE_EQ(w.samples[3], 32767.0 / 32768.0);
}

TEST(Wav, RejectsUnsupportedRateAndGarbage) {
  EXPECT_THROW(decode_wav(wav_bytes(1, 12345, {0, 0})), Error);
  const std::vector<unsigned char> junk = {'R', 'I', 'F', 'X', 0, 0};
  EXPECT_THROW(decode_wav(junk), Error);
  EXPECT_THROW(load_waveform("/nonexistent/file.wav"), Error);
}

TEST(Wav, SixteenBitRoundTrip) {
  const auto w = sine(440.0, 0.05);
  const auto back = decode_wav(encode_wav16(w));
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32768.0);
}

TEST(F0, Sine220WithinTwoHertz) {
  const auto t = estimate_f0(sine(220.0, 1.0), AnalysisConfig{});
  EXPECT_NEAR(median_voiced(t), 220.0, 2.0);
  std::size_t voiced = 0;
  for (bool v : t.voiced) voiced += v;
  EXPECT_GE(static_cast<double>(voiced) / t.size(), 0.95);
}

TEST(F0, SilenceIsUnvoicedZero) {
  const auto t = estimate_f0(silence(0.5), AnalysisConfig{});
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_FALSE(t.voiced[i]);
    EXPECT_EQ(t.values[i], 0.0);
  }
}

TEST(F0, WhiteNoiseMostlyUnvoiced) {
  Rng rng(42);
  Waveform w = silence(1.0);
  for (double& s : w.samples) s = rng.uniform(-0.1, 0.1);
  const auto t = estimate_f0(w, AnalysisConfig{});
  std::size_t unvoiced = 0;
  for (bool v : t.voiced) unvoiced += !v;
  EXPECT_GE(static_cast<double>(unvoiced) / t.size(), 0.8);
}

TEST(F0, ValuesZeroOrInsideBand) {
  AnalysisConfig cfg;
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w = sine(rng.uniform(50.0, 700.0), 0.3);
    for (double& s : w.samples) s += rng.uniform(-0.05, 0.05);
    const auto t = estimate_f0(w, cfg);
    for (double v : t.values) EXPECT_TRUE(v == 0.0 || (v >= cfg.f0_min && v <= cfg.f0_max)) << v;
  }
}

TEST(F0, SweepMedianErrorBelowThreePercent) {
  for (int hz = 80; hz <= 400; hz += 20) {
    const double est = median_voiced(estimate_f0(sine(hz, 0.5), AnalysisConfig{}));
    EXPECT_LT(std::abs(est - hz) / hz, 0.03) << hz << " Hz estimated as " << est;
  }
}

TEST(Energy, ZeroSignalZeroEnergy) {
  for (double e : compute_energy(silence(0.2), AnalysisConfig{}).values) EXPECT_EQ(e, 0.0);
}

TEST(Energy, DoublingAmplitudeDoublesEnergy) {
  Rng rng(5);
  Waveform w = silence(0.2);
  for (double& s : w.samples) s = rng.uniform(-0.4, 0.4);
  Waveform w2 = w;
  for (double& s : w2.samples) s *= 2.0;
  const auto a = compute_energy(w, AnalysisConfig{}), b = compute_energy(w2, AnalysisConfig{});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b.values[i], 2.0 * a.values[i]);
}

TEST(Energy, HomogeneousForArbitraryScale) {
  Rng rng(6);
  Waveform w = silence(0.2);
  for (double& s : w.samples) s = rng.uniform(-0.4, 0.4);
  for (double alpha : {0.3, 1.7, 3.14159}) {
    Waveform ws = w;
    for (double& s : ws.samples) s *= alpha;
    const auto a = compute_energy(w, AnalysisConfig{}), b = compute_energy(ws, AnalysisConfig{});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.values[i], alpha * a.values[i], 1e-9 * b.values[i]);
  }
}

TEST(Energy, ImpulseMatchesBruteForceTransform) {
  AnalysisConfig cfg;
  Waveform w = silence(0.0);
  w.samples.assign(1024, 0.0);
  w.samples[512] = 1.0;
  const auto e = compute_energy(w, cfg);
  ASSERT_EQ(e.size(), 1u);

  const auto win = hann_window(1024);
  std::vector<double> frame(1024);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = w.samples[i] * win[i];
  double acc = 0.0;
  for (double m : brute_force_magnitudes(frame)) acc += m * m;
  EXPECT_NEAR(e.values[0], std::sqrt(acc), 1e-9);
  EXPECT_NEAR(e.values[0], 22.64950330581225, 1e-9);
}

TEST(Spectrum, FftAgreesWithDirectSum) {
  Rng rng(8);
  std::vector<double> x(256);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const auto fast = magnitude_spectrum(x), slow = brute_force_magnitudes(x);
  for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_NEAR(fast[k], slow[k], 1e-9);
  std::vector<double> odd(100);
  for (double& v : odd) v = rng.uniform(-1.0, 1.0);
  const auto fb = magnitude_spectrum(odd), sb = brute_force_magnitudes(odd);
  for (std::size_t k = 0; k < fb.size(); ++k) EXPECT_NEAR(fb[k], sb[k], 1e-9);
}

TEST(MelCepstra, SilenceGivesDctOfFloor) {
  const auto t = compute_mel_cepstra(silence(0.1), AnalysisConfig{});
  ASSERT_GT(t.size(), 0u);
  const double c0 = std::log(kLogFloor) * std::sqrt(80.0);
  for (const auto& f : t.frames) {
    ASSERT_EQ(f.size(), 13u);
    EXPECT_NEAR(f[0], c0, 1e-9);
    EXPECT_NEAR(f[0], -205.94947168, 1e-6);
    for (std::size_t k = 1; k < f.size(); ++k) EXPECT_NEAR(f[k], 0.0, 1e-9);
  }
}

TEST(MelCepstra, HandFourPointDct) {
  const double e = std::numbers::e;
  const std::vector<double> mel = {e, e * e, e * e * e, e * e * e * e};
  const auto c = cepstra_from_mel_energies(mel, 4);
  const std::vector<double> expected = {5.0, -2.2304425, 0.0, -0.15851267};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(c[k], expected[k], 1e-7);
}

TEST(MelCepstra, Deterministic) {
  const auto w = sine(300.0, 0.2);
  EXPECT_EQ(compute_mel_cepstra(w, AnalysisConfig{}).frames, compute_mel_cepstra(w, AnalysisConfig{}).frames);
}

TEST(MelCepstra, FiltersArePeakNormalizedTriangles) {
  const auto bank = mel_filterbank(80, 1024, 22050);
  ASSERT_EQ(bank.size(), 80u);
  for (const auto& f : bank) {
    EXPECT_EQ(f.size(), 513u);
    EXPECT_LE(*std::max_element(f.begin(), f.end()), 1.0);
    EXPECT_GE(*std::min_element(f.begin(), f.end()), 0.0);
  }
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Features, FrameCountsAgree) {
  AnalysisConfig cfg;
  for (std::size_t len : {1024u, 1025u, 1280u, 5000u, 22050u}) {
    Waveform w = silence(0.0);
    w.samples.assign(len, 0.0);
    const std::size_t expected = (len - 1024) / 256 + 1;
    EXPECT_EQ(estimate_f0(w, cfg).size(), expected);
    EXPECT_EQ(compute_energy(w, cfg).size(), expected);
    EXPECT_EQ(compute_mel_cepstra(w, cfg).size(), expected);
  }
}

TEST(Features, ShortOrInvalidInputsRejected) {
  Waveform w = silence(0.0);
  w.samples.assign(100, 0.0);
  EXPECT_THROW(estimate_f0(w, AnalysisConfig{}), Error);
  AnalysisConfig bad;
  bad.hop_length = 0;
  EXPECT_THROW(compute_energy(silence(0.1), bad), Error);
  bad = AnalysisConfig{};
  bad.n_cepstra = 100;
  EXPECT_THROW(compute_mel_cepstra(silence(0.1), bad), Error);
}

TEST(TrackIo, TableRoundTrip) {
  const auto w = sine(180.0, 0.2);
  const auto f0 = estimate_f0(w, AnalysisConfig{});
  const auto en = compute_energy(w, AnalysisConfig{});
  const auto [f0b, enb] = parse_track_table(format_track_table(f0, en));
  EXPECT_EQ(f0b.values, f0.values);
  EXPECT_EQ(f0b.voiced, f0.voiced);
  EXPECT_EQ(enb.values, en.values);
  EXPECT_EQ(f0b.hop_length, 256);
  EXPECT_EQ(f0b.sample_rate, 22050);
}

TEST(TrackIo, ContainerRoundTripAndHeader) {
  const auto w = sine(180.0, 0.2);
  const auto cep = compute_mel_cepstra(w, AnalysisConfig{});
  const auto bytes = encode_track(cep);
  EXPECT_EQ(bytes.substr(0, 4), "IMX1");
  EXPECT_EQ(decode_mel_cepstra_track(bytes).frames, cep.frames);
  const auto f0 = estimate_f0(w, AnalysisConfig{});
  const auto back = decode_f0_track(encode_track(f0));
  EXPECT_EQ(back.values, f0.values);
  EXPECT_EQ(back.voiced, f0.voiced);
  EXPECT_THROW(decode_energy_track(encode_track(f0)), Error);
  EXPECT_THROW(decode_f0_track(bytes.substr(0, 10)), Error);
}
