#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/features.hpp"
#include "emomix/track_io.hpp"

namespace emomix {

struct DtwPath {
  std::vector<std::pair<std::size_t, std::size_t>> steps;  // (ref index, candidate index)

  std::size_t size() const { return steps.size(); }
};

inline constexpr double kMcdScale = 10.0 / std::numbers::ln10;

// Euclidean distance over coefficients 1..n-1 (c0 excluded).
inline double cepstral_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 1; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(acc);
}

namespace detail {

inline void check_comparable(const MelCepstraTrack& ref, const MelCepstraTrack& cand) {
  if (ref.frames.empty() || cand.frames.empty()) throw Error("cannot align an empty track");
  const std::size_t n = ref.order();
  for (const auto& f : ref.frames)
    if (f.size() != n) throw Error("reference track has ragged frames");
  for (const auto& f : cand.frames)
    if (f.size() != n) throw Error("coefficient count differs between tracks");
  if (ref.sample_rate != cand.sample_rate) throw Error("tracks use different sample rates");
}

}  // namespace detail

// Minimum summed-distance alignment with steps (1,0), (0,1), (1,1). On
// backtracking ties the diagonal wins, then (1,0).
inline DtwPath dtw_align(const MelCepstraTrack& ref, const MelCepstraTrack& cand) {
  detail::check_comparable(ref, cand);
  const std::size_t n = ref.size(), m = cand.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = cepstral_distance(ref.frames[i], cand.frames[j]);
      if (i == 0 && j == 0) {
        at(i, j) = c;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = at(i - 1, j - 1);
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = c + best;
    }
  }

  DtwPath path;
  std::size_t i = n - 1, j = m - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

inline double path_cost(const MelCepstraTrack& ref, const MelCepstraTrack& cand, const DtwPath& path) {
  double c = 0.0;
  for (auto [i, j] : path.steps) c += cepstral_distance(ref.frames[i], cand.frames[j]);
  return c;
}

// Mean over the path of (10 / ln 10) * sqrt(2 * sum_k (c_ref,k - c_cand,k)^2), k >= 1.
inline double mcd_along(const MelCepstraTrack& ref, const MelCepstraTrack& cand, const DtwPath& path) {
  if (path.steps.empty()) throw Error("empty alignment path");
  double acc = 0.0;
  for (auto [i, j] : path.steps) {
    if (i >= ref.size() || j >= cand.size()) throw Error("alignment path exceeds track length");
    acc += kMcdScale * std::sqrt(2.0) * cepstral_distance(ref.frames[i], cand.frames[j]);
  }
  return acc / static_cast<double>(path.size());
}

inline double mcd(const MelCepstraTrack& ref, const MelCepstraTrack& cand) {
  return mcd_along(ref, cand, dtw_align(ref, cand));
}

struct F0RmseResult {
  double rmse_hz = 0.0;
  std::size_t voiced_pairs = 0;  // 0 means nothing was compared
};

// RMSE over path steps where both frames are voiced.
inline F0RmseResult f0_rmse(const F0Track& ref, const F0Track& cand, const DtwPath& path) {
  F0RmseResult r;
  double acc = 0.0;
  for (auto [i, j] : path.steps) {
    if (i >= ref.size() || j >= cand.size()) throw Error("F0 track shorter than alignment path");
    if (ref.voiced[i] && cand.voiced[j]) {
      const double d = ref.values[i] - cand.values[j];
      acc += d * d;
      ++r.voiced_pairs;
    }
  }
  if (r.voiced_pairs > 0) r.rmse_hz = std::sqrt(acc / static_cast<double>(r.voiced_pairs));
  return r;
}

inline DtwPath diagonal_path(std::size_t n) {
  DtwPath p;
  for (std::size_t i = 0; i < n; ++i) p.steps.emplace_back(i, i);
  return p;
}

inline double mel_mae(const std::vector<std::vector<double>>& ref, const std::vector<std::vector<double>>& cand) {
  if (ref.size() != cand.size()) throw Error("mel frame counts differ");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    if (ref[t].size() != cand[t].size()) throw Error("mel frame widths differ");
    for (std::size_t k = 0; k < ref[t].size(); ++k) acc += std::abs(ref[t][k] - cand[t][k]);
    n += ref[t].size();
  }
  if (n == 0) throw Error("mel_mae of empty input");
  return acc / static_cast<double>(n);
}

struct MetricReport {
  double mcd_db = 0.0;
  double f0_rmse_hz = 0.0;
  double mel_mae = 0.0;
  std::size_t frames_compared = 0;
  std::size_t voiced_frames_compared = 0;
};

// MCD and F0 RMSE along one DTW path; mel MAE over the path-aligned frames.
inline MetricReport evaluate_utterance(const MelCepstraTrack& ref_cep, const F0Track& ref_f0,
                                       const MelCepstraTrack& cand_cep, const F0Track& cand_f0) {
  const auto path = dtw_align(ref_cep, cand_cep);
  MetricReport m;
  m.mcd_db = mcd_along(ref_cep, cand_cep, path);
  const auto f0 = f0_rmse(ref_f0, cand_f0, path);
  m.f0_rmse_hz = f0.rmse_hz;
  m.voiced_frames_compared = f0.voiced_pairs;
  std::vector<std::vector<double>> a, b;
  for (auto [i, j] : path.steps) {
    a.push_back(ref_cep.frames[i]);
    b.push_back(cand_cep.frames[j]);
  }
  m.mel_mae = mel_mae(a, b);
  m.frames_compared = path.size();
  return m;
}

// ---------------------------------------------------------------------------
// Pitch-contour export: CSV with header label,time_seconds,f0_hz,voiced.

struct LabeledTrack {
  std::string label;
  F0Track track;
};

struct ContourPoint {
  std::string label;
  double time_seconds = 0.0;
  double f0_hz = 0.0;
  bool voiced = false;
};

inline std::string format_pitch_contour(const std::vector<LabeledTrack>& tracks) {
  if (tracks.empty()) throw Error("no pitch tracks to export");
  std::string out = "label,time_seconds,f0_hz,voiced\n";
  for (const auto& t : tracks) {
    if (t.label.empty() || t.label.find_first_of(",\n\r\"") != std::string::npos)
      throw Error("contour label must be non-empty and free of commas, quotes and newlines");
    const double hop = static_cast<double>(t.track.hop_length) / t.track.sample_rate;
    for (std::size_t i = 0; i < t.track.size(); ++i)
      out += t.label + "," + format_double(static_cast<double>(i) * hop) + "," + format_double(t.track.values[i]) +
             "," + (t.track.voiced[i] ? "1" : "0") + "\n";
  }
  return out;
}

inline void export_pitch_contour(const std::vector<LabeledTrack>& tracks, const std::filesystem::path& out) {
  const auto text = format_pitch_contour(tracks);
  try {
    write_file_atomic(out, text);
  } catch (const std::exception& e) {
    throw Error("cannot write pitch contour to " + out.string() + ": " + e.what());
  }
}

inline std::vector<ContourPoint> parse_pitch_contour(const std::string& text) {
  std::vector<ContourPoint> pts;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != "label,time_seconds,f0_hz,voiced") throw Error("unexpected pitch-contour header");
      header = false;
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 4) throw Error("malformed pitch-contour line: '" + line + "'");
    pts.push_back({cols[0], parse_double(cols[1], "time"), parse_double(cols[2], "f0"), cols[3] == "1"});
  }
  return pts;
}

}  // namespace emomix
