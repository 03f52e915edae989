#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/features.hpp"
#include "emomix/track_io.hpp"

namespace emomix {

struct AlignedPhoneme {
  std::string phoneme;
  double start = 0.0;  // seconds
  double end = 0.0;

  bool operator==(const AlignedPhoneme&) const = default;
};

struct PhonemeAlignment {
  std::vector<AlignedPhoneme> entries;
};

inline void validate(const PhonemeAlignment& a) {
  if (a.entries.empty()) throw Error("alignment is empty");
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& e = a.entries[i];
    if (e.phoneme.empty()) throw Error("alignment entry " + std::to_string(i) + " has empty phoneme");
    if (!(std::isfinite(e.start) && std::isfinite(e.end)) || e.start < 0.0)
      throw Error("alignment entry " + std::to_string(i) + " has invalid times");
    if (!(e.start < e.end))
      throw Error("alignment entry " + std::to_string(i) + " (" + e.phoneme + ") has start >= end");
    if (i > 0 && e.start < a.entries[i - 1].end)
      throw Error("alignment entry " + std::to_string(i) + " overlaps or precedes its predecessor");
  }
}

// phoneme<TAB>start<TAB>end per line; '#' lines and blank lines ignored.
inline PhonemeAlignment parse_alignment(const std::string& text) {
  PhonemeAlignment a;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3 || cols[0].empty())
      throw Error("alignment line " + std::to_string(lineno) + " is malformed: '" + line + "'");
    a.entries.push_back({cols[0], parse_double(cols[1], "start time"), parse_double(cols[2], "end time")});
  }
  validate(a);
  return a;
}

inline std::string format_alignment(const PhonemeAlignment& a) {
  std::string out;
  for (const auto& e : a.entries)
    out += e.phoneme + '\t' + format_double(e.start) + '\t' + format_double(e.end) + '\n';
  return out;
}

inline double frame_rate(const AnalysisConfig& cfg, int sample_rate) {
  return static_cast<double>(sample_rate) / cfg.hop_length;
}

inline long time_to_frame(double seconds, double fr) { return std::lround(seconds * fr); }

inline std::vector<int> durations_in_frames(const PhonemeAlignment& a, const AnalysisConfig& cfg,
                                            int sample_rate) {
  const double fr = frame_rate(cfg, sample_rate);
  std::vector<int> d;
  d.reserve(a.entries.size());
  for (const auto& e : a.entries)
    d.push_back(static_cast<int>(std::max(0L, time_to_frame(e.end, fr) - time_to_frame(e.start, fr))));
  return d;
}

struct PhonemeFeatures {
  std::vector<std::string> phonemes;
  std::vector<double> pitch;
  std::vector<int> duration;
  std::vector<double> energy;

  std::size_t size() const { return phonemes.size(); }
  bool operator==(const PhonemeFeatures&) const = default;
};

inline void validate(const PhonemeFeatures& f) {
  const std::size_t n = f.phonemes.size();
  if (n == 0) throw Error("phoneme features are empty");
  if (f.pitch.size() != n || f.duration.size() != n || f.energy.size() != n)
    throw Error("phoneme feature sequences differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f.pitch[i]) || f.pitch[i] < 0.0) throw Error("invalid phoneme pitch");
    if (!std::isfinite(f.energy[i]) || f.energy[i] < 0.0) throw Error("invalid phoneme energy");
    if (f.duration[i] < 0) throw Error("negative phoneme duration");
  }
}

// Linear interpolation across unvoiced gaps; edges take the nearest voiced
// value. An all-unvoiced track becomes all zeros.
inline std::vector<double> continuous_f0(const F0Track& f0) {
  const std::size_t n = f0.size();
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> voiced;
  for (std::size_t i = 0; i < n; ++i)
    if (f0.voiced[i]) voiced.push_back(i);
  if (voiced.empty()) return out;
  for (std::size_t i = 0; i <= voiced.front(); ++i) out[i] = f0.values[voiced.front()];
  for (std::size_t i = voiced.back(); i < n; ++i) out[i] = f0.values[voiced.back()];
  for (std::size_t v = 0; v + 1 < voiced.size(); ++v) {
    const std::size_t a = voiced[v], b = voiced[v + 1];
    const double fa = f0.values[a], fb = f0.values[b];
    for (std::size_t i = a; i <= b; ++i)
      out[i] = fa + (fb - fa) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  return out;
}

inline PhonemeFeatures phoneme_average(const F0Track& f0, const EnergyTrack& energy,
                                       const PhonemeAlignment& a, const AnalysisConfig& cfg) {
  validate(a);
  if (f0.hop_length != energy.hop_length || f0.sample_rate != energy.sample_rate)
    throw Error("F0 and energy tracks use different hop or sample rate");
  if (f0.hop_length != cfg.hop_length) throw Error("track hop differs from analysis hop");
  if (f0.size() != energy.size()) throw Error("F0 and energy tracks differ in length");

  const double fr = frame_rate(cfg, f0.sample_rate);
  const double track_seconds = static_cast<double>(f0.size()) / fr;
  if (a.entries.back().end > track_seconds + 1.0 / fr + 1e-9)
    throw Error("alignment extends past the end of the feature track");

  const auto pitch = continuous_f0(f0);
  const auto durations = durations_in_frames(a, cfg, f0.sample_rate);
  const auto frames = static_cast<long>(f0.size());

  PhonemeFeatures out;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const long lo = time_to_frame(a.entries[i].start, fr);
    const long hi = std::min(time_to_frame(a.entries[i].end, fr), frames);
    double p = 0.0, e = 0.0;
    if (hi > lo) {
      for (long k = lo; k < hi; ++k) {
        p += pitch[static_cast<std::size_t>(k)];
        e += energy.values[static_cast<std::size_t>(k)];
      }
      p /= static_cast<double>(hi - lo);
      e /= static_cast<double>(hi - lo);
    }
    out.phonemes.push_back(a.entries[i].phoneme);
    out.pitch.push_back(p);
    out.duration.push_back(durations[i]);
    out.energy.push_back(e);
  }
  return out;
}

// phoneme<TAB>pitch<TAB>duration<TAB>energy per line, '#' comments allowed.
inline std::string format_phoneme_features(const PhonemeFeatures& f) {
  std::string out = "# phoneme\tpitch_hz\tduration_frames\tenergy\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    out += f.phonemes[i] + '\t' + format_double(f.pitch[i]) + '\t' + std::to_string(f.duration[i]) +
           '\t' + format_double(f.energy[i]) + '\n';
  return out;
}

inline PhonemeFeatures parse_phoneme_features(const std::string& text) {
  PhonemeFeatures f;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw Error("malformed phoneme feature line: '" + line + "'");
    f.phonemes.push_back(cols[0]);
    f.pitch.push_back(parse_double(cols[1], "pitch"));
    const double d = parse_double(cols[2], "duration");
    if (d != std::floor(d)) throw Error("non-integer duration '" + cols[2] + "'");
    f.duration.push_back(static_cast<int>(d));
    f.energy.push_back(parse_double(cols[3], "energy"));
  }
  validate(f);
  return f;
}

}  // namespace emomix
