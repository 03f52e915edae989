#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/wav.hpp"

namespace emomix {

struct AnalysisConfig {
  int frame_length = 1024;
  int hop_length = 256;
  double f0_min = 70.0;
  double f0_max = 600.0;
  double yin_threshold = 0.15;
  int n_mels = 80;
  int n_cepstra = 13;
};

inline void validate(const AnalysisConfig& cfg, int sample_rate) {
  if (cfg.hop_length <= 0 || cfg.hop_length > cfg.frame_length)
    throw ConfigError("hop_length must satisfy 0 < hop_length <= frame_length");
  if (!(cfg.f0_min > 0.0 && cfg.f0_min < cfg.f0_max && cfg.f0_max < sample_rate / 2.0))
    throw ConfigError("f0 band must satisfy 0 < f0_min < f0_max < sample_rate/2");
  if (!(cfg.yin_threshold > 0.0 && cfg.yin_threshold < 1.0))
    throw ConfigError("yin_threshold must lie in (0, 1)");
  if (cfg.n_cepstra < 1 || cfg.n_cepstra > cfg.n_mels)
    throw ConfigError("n_cepstra must satisfy 1 <= n_cepstra <= n_mels");
}

// Frame-level pitch. values[i] == 0 exactly when voiced[i] is false.
struct F0Track {
  std::vector<double> values;
  std::vector<bool> voiced;
  int hop_length = 256;
  int sample_rate = 22050;

  std::size_t size() const { return values.size(); }
};

struct EnergyTrack {
  std::vector<double> values;
  int hop_length = 256;
  int sample_rate = 22050;

  std::size_t size() const { return values.size(); }
};

struct MelCepstraTrack {
  std::vector<std::vector<double>> frames;
  int hop_length = 256;
  int sample_rate = 22050;

  std::size_t size() const { return frames.size(); }
  std::size_t order() const { return frames.empty() ? 0 : frames.front().size(); }
};

inline std::size_t frame_count(std::size_t n_samples, const AnalysisConfig& cfg) {
  const auto frame = static_cast<std::size_t>(cfg.frame_length);
  if (n_samples < frame) return 0;
  return (n_samples - frame) / static_cast<std::size_t>(cfg.hop_length) + 1;
}

namespace detail {

inline void require_frames(const Waveform& w, const AnalysisConfig& cfg) {
  validate(cfg, w.sample_rate);
  if (w.samples.size() < static_cast<std::size_t>(cfg.frame_length))
    throw Error("waveform shorter than one frame (" + std::to_string(w.samples.size()) +
                " < " + std::to_string(cfg.frame_length) + " samples)");
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
inline void fft_pow2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> wk = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * wk;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace detail

// Magnitudes of bins 0..N/2 of the DFT of a real frame. Power-of-two lengths
// use the FFT; other lengths fall back to direct summation.
inline std::vector<double> magnitude_spectrum(std::span<const double> frame) {
  const std::size_t n = frame.size();
  const std::size_t bins = n / 2 + 1;
  std::vector<double> mag(bins);
  if (detail::is_pow2(n)) {
    std::vector<std::complex<double>> buf(frame.begin(), frame.end());
    detail::fft_pow2(buf);
    for (std::size_t k = 0; k < bins; ++k) mag[k] = std::abs(buf[k]);
  } else {
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc{};
      for (std::size_t t = 0; t < n; ++t)
        acc += frame[t] * std::polar(1.0, -2.0 * std::numbers::pi *
                                              static_cast<double>(k * t % n) / static_cast<double>(n));
      mag[k] = std::abs(acc);
    }
  }
  return mag;
}

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

namespace detail {

// Calls fn(frame_index, magnitude_spectrum) for each Hann-windowed frame.
template <typename Fn>
void for_each_spectrum(const Waveform& w, const AnalysisConfig& cfg, Fn&& fn) {
  const auto n = static_cast<std::size_t>(cfg.frame_length);
  const auto window = hann_window(n);
  const std::size_t frames = frame_count(w.samples.size(), cfg);
  std::vector<double> buf(n);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(cfg.hop_length);
    for (std::size_t i = 0; i < n; ++i) buf[i] = w.samples[start + i] * window[i];
    fn(f, magnitude_spectrum(buf));
  }
}

}  // namespace detail

// YIN period estimate for one frame. Returns 0 for unvoiced.
inline double yin_frame(std::span<const double> frame, int sample_rate, const AnalysisConfig& cfg) {
  const std::size_t width = frame.size() / 2;
  const auto tau_min = static_cast<std::size_t>(std::max(2.0, std::floor(sample_rate / cfg.f0_max)));
  const std::size_t tau_max =
      std::min(width - 1, static_cast<std::size_t>(std::ceil(sample_rate / cfg.f0_min)));
  if (tau_min + 1 >= tau_max) return 0.0;

  std::vector<double> diff(tau_max + 2, 0.0);
  for (std::size_t tau = 1; tau <= tau_max + 1 && tau < frame.size() - width + 1; ++tau) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double d = frame[j] - frame[j + tau];
      acc += d * d;
    }
    diff[tau] = acc;
  }

  // Cumulative-mean-normalized difference.
  std::vector<double> cmnd(diff.size(), 1.0);
  double running = 0.0;
  for (std::size_t tau = 1; tau < diff.size(); ++tau) {
    running += diff[tau];
    cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
  }

  std::size_t best = 0;
  for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
    if (cmnd[tau] < cfg.yin_threshold) {
      while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
      best = tau;
      break;
    }
  }
  if (best == 0) return 0.0;

  double period = static_cast<double>(best);
  if (best > 0 && best + 1 < cmnd.size()) {
    const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom > 0.0) period += 0.5 * (a - c) / denom;
  }
  const double f0 = sample_rate / period;
  if (!(f0 >= cfg.f0_min && f0 <= cfg.f0_max)) return 0.0;
  return f0;
}

inline F0Track estimate_f0(const Waveform& w, const AnalysisConfig& cfg) {
  detail::require_frames(w, cfg);
  const std::size_t frames = frame_count(w.samples.size(), cfg);
  F0Track track;
  track.hop_length = cfg.hop_length;
  track.sample_rate = w.sample_rate;
  track.values.resize(frames);
  track.voiced.resize(frames);
  const auto n = static_cast<std::size_t>(cfg.frame_length);
  for (std::size_t f = 0; f < frames; ++f) {
    std::span<const double> frame(w.samples.data() + f * static_cast<std::size_t>(cfg.hop_length), n);
    const double f0 = yin_frame(frame, w.sample_rate, cfg);
    track.values[f] = f0;
    track.voiced[f] = f0 > 0.0;
  }
  return track;
}

// Per-frame L2 norm of the Hann-windowed magnitude spectrum.
inline EnergyTrack compute_energy(const Waveform& w, const AnalysisConfig& cfg) {
  detail::require_frames(w, cfg);
  EnergyTrack track;
  track.hop_length = cfg.hop_length;
  track.sample_rate = w.sample_rate;
  track.values.resize(frame_count(w.samples.size(), cfg));
  detail::for_each_spectrum(w, cfg, [&](std::size_t f, const std::vector<double>& mag) {
    double acc = 0.0;
    for (double m : mag) acc += m * m;
    track.values[f] = std::sqrt(acc);
  });
  return track;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular HTK-scale filters spanning 0..sample_rate/2, peak weight 1,
// evaluated at the n_fft/2+1 bin centre frequencies.
inline std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  const int bins = n_fft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  std::vector<std::vector<double>> bank(static_cast<std::size_t>(n_mels),
                                        std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / n_fft;
      double weight = 0.0;
      if (hz > lo && hz <= mid) weight = (hz - lo) / (mid - lo);
      else if (hz > mid && hz < hi) weight = (hi - hz) / (hi - mid);
      bank[m][k] = weight;
    }
  }
  return bank;
}

// Orthonormal DCT-II.
inline std::vector<double> dct2_orthonormal(std::span<const double> x, std::size_t n_out) {
  const std::size_t n = x.size();
  std::vector<double> out(n_out, 0.0);
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

inline constexpr double kLogFloor = 1e-10;

// Mel filter outputs -> floored natural log -> first n_cepstra DCT-II terms.
inline std::vector<double> cepstra_from_mel_energies(std::span<const double> mel, int n_cepstra) {
  std::vector<double> logs(mel.size());
  for (std::size_t i = 0; i < mel.size(); ++i) logs[i] = std::log(std::max(mel[i], kLogFloor));
  return dct2_orthonormal(logs, static_cast<std::size_t>(n_cepstra));
}

inline MelCepstraTrack compute_mel_cepstra(const Waveform& w, const AnalysisConfig& cfg) {
  detail::require_frames(w, cfg);
  const auto bank = mel_filterbank(cfg.n_mels, cfg.frame_length, w.sample_rate);
  MelCepstraTrack track;
  track.hop_length = cfg.hop_length;
  track.sample_rate = w.sample_rate;
  track.frames.resize(frame_count(w.samples.size(), cfg));
  std::vector<double> mel(static_cast<std::size_t>(cfg.n_mels));
  detail::for_each_spectrum(w, cfg, [&](std::size_t f, const std::vector<double>& mag) {
    for (std::size_t m = 0; m < mel.size(); ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < mag.size(); ++k) acc += bank[m][k] * mag[k];
      mel[m] = acc;
    }
    track.frames[f] = cepstra_from_mel_energies(mel, cfg.n_cepstra);
  });
  return track;
}

}  // namespace emomix
