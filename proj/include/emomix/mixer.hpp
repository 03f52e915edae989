#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "emomix/alignment.hpp"
#include "emomix/error.hpp"
#include "emomix/rng.hpp"

namespace emomix {

enum class Emotion : int { kNeutral = 0, kHappy = 1, kSad = 2, kAngry = 3, kSurprise = 4 };

inline constexpr int kNumEmotions = 5;
inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::kNeutral, Emotion::kHappy, Emotion::kSad, Emotion::kAngry, Emotion::kSurprise};

inline std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::kNeutral: return "neutral";
    case Emotion::kHappy: return "happy";
    case Emotion::kSad: return "sad";
    case Emotion::kAngry: return "angry";
    case Emotion::kSurprise: return "surprise";
  }
  return "?";
}

// Case-insensitive, so ESD folder names ("Neutral", "Surprise") parse too.
inline Emotion parse_emotion(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Emotion e : kAllEmotions)
    if (lower == to_string(e)) return e;
  throw Error("unknown emotion '" + std::string(s) + "'");
}

struct UtteranceRecord {
  std::string speaker;
  std::string sentence;
  Emotion emotion = Emotion::kNeutral;
  PhonemeFeatures features;
};

using UtteranceKey = std::tuple<std::string, std::string, Emotion>;

// Parallel-corpus index keyed by (speaker, sentence, emotion).
class CorpusIndex {
 public:
  void add(UtteranceRecord r) {
    validate(r.features);
    UtteranceKey key{r.speaker, r.sentence, r.emotion};
    if (records_.count(key))
      throw Error("duplicate corpus record " + r.speaker + "/" + r.sentence + "/" +
                  std::string(to_string(r.emotion)));
    records_.emplace(std::move(key), std::move(r));
  }

  const UtteranceRecord* find(const std::string& speaker, const std::string& sentence, Emotion e) const {
    auto it = records_.find(UtteranceKey{speaker, sentence, e});
    return it == records_.end() ? nullptr : &it->second;
  }

  // Every non-neutral record must have a neutral counterpart.
  void validate_parallel() const {
    for (const auto& [key, rec] : records_) {
      if (rec.emotion != Emotion::kNeutral && !find(rec.speaker, rec.sentence, Emotion::kNeutral))
        throw Error("no neutral counterpart for " + rec.speaker + "/" + rec.sentence + "/" +
                    std::string(to_string(rec.emotion)));
    }
  }

  const std::map<UtteranceKey, UtteranceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

 private:
  std::map<UtteranceKey, UtteranceRecord> records_;
};

enum class LambdaDistribution { kBeta, kUniform, kDiscrete };

inline std::string_view to_string(LambdaDistribution d) {
  switch (d) {
    case LambdaDistribution::kBeta: return "beta";
    case LambdaDistribution::kUniform: return "uniform";
    case LambdaDistribution::kDiscrete: return "discrete";
  }
  return "?";
}

inline LambdaDistribution parse_lambda_distribution(std::string_view s) {
  if (s == "beta") return LambdaDistribution::kBeta;
  if (s == "uniform") return LambdaDistribution::kUniform;
  if (s == "discrete") return LambdaDistribution::kDiscrete;
  throw ConfigError("unknown lambda distribution '" + std::string(s) + "' (beta|uniform|discrete)");
}

// Beta(0.5, 0.5) is drawn by inverting its arcsine CDF: sin^2(pi u / 2).
inline double sample_lambda(LambdaDistribution dist, Rng& rng) {
  switch (dist) {
    case LambdaDistribution::kBeta: {
      const double s = std::sin(std::numbers::pi * rng.uniform() / 2.0);
      return std::clamp(s * s, 0.0, 1.0);
    }
    case LambdaDistribution::kUniform:
      return rng.uniform();
    case LambdaDistribution::kDiscrete: {
      static constexpr double kSupport[] = {0.0, 0.5, 1.0};
      return kSupport[rng.below(3)];
    }
  }
  return 0.0;
}

// An ordered (first, second) pair; exactly one side is neutral.
struct RecordPair {
  const UtteranceRecord* first = nullptr;
  const UtteranceRecord* second = nullptr;
};

// Every (emotional record, neutral counterpart) in index order.
inline std::vector<RecordPair> eligible_pairs(const CorpusIndex& index) {
  std::vector<RecordPair> out;
  for (const auto& [key, rec] : index.records()) {
    if (rec.emotion == Emotion::kNeutral) continue;
    if (const auto* neutral = index.find(rec.speaker, rec.sentence, Emotion::kNeutral))
      out.push_back({neutral, &rec});
  }
  return out;
}

namespace detail {

inline std::pair<const UtteranceRecord*, const UtteranceRecord*> draw_pair(
    const std::vector<RecordPair>& candidates, Rng& rng) {
  const auto& c = candidates[rng.below(candidates.size())];
  if (rng.coin()) return {c.first, c.second};
  return {c.second, c.first};
}

}  // namespace detail

// Draws a neutral/emotional pair of the same speaker and sentence, uniformly
// over emotional records, in random order.
inline std::pair<const UtteranceRecord*, const UtteranceRecord*> sample_pair(const CorpusIndex& index,
                                                                             Rng& rng) {
  const auto candidates = eligible_pairs(index);
  if (candidates.empty()) throw Error("corpus index has no neutral/emotional pair");
  return detail::draw_pair(candidates, rng);
}

struct MixedSequences {
  std::vector<double> pitch;
  std::vector<int> duration;
  std::vector<double> energy;
};

inline bool same_phonemes(const PhonemeFeatures& a, const PhonemeFeatures& b) {
  return a.phonemes == b.phonemes;
}

// lambda * a + (1 - lambda) * b, with durations floored. lambda weights `a`.
inline MixedSequences mix(const PhonemeFeatures& a, const PhonemeFeatures& b, double lambda) {
  if (a.size() != b.size()) throw Error("cannot mix sequences of different length");
  if (!same_phonemes(a, b)) throw Error("cannot mix different phoneme sequences");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda outside [0, 1]");
  const double mu = 1.0 - lambda;
  MixedSequences m;
  m.pitch.resize(a.size());
  m.duration.resize(a.size());
  m.energy.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    m.pitch[k] = lambda * a.pitch[k] + mu * b.pitch[k];
    m.energy[k] = lambda * a.energy[k] + mu * b.energy[k];
    m.duration[k] = static_cast<int>(std::floor(lambda * a.duration[k] + mu * b.duration[k]));
    // Rounding in the affine sum must not escape the source interval.
    m.pitch[k] = std::clamp(m.pitch[k], std::min(a.pitch[k], b.pitch[k]), std::max(a.pitch[k], b.pitch[k]));
    m.energy[k] =
        std::clamp(m.energy[k], std::min(a.energy[k], b.energy[k]), std::max(a.energy[k], b.energy[k]));
    m.duration[k] = std::clamp(m.duration[k], std::min(a.duration[k], b.duration[k]),
                               std::max(a.duration[k], b.duration[k]));
  }
  return m;
}

// Interpolated target. `lambda` weights emo_i; 1 - lambda weights emo_j.
struct PseudoLabel {
  std::string speaker;
  std::string sentence;
  Emotion emo_i = Emotion::kNeutral;
  Emotion emo_j = Emotion::kNeutral;
  double lambda = 0.0;
  std::vector<double> pitch;
  std::vector<int> duration;
  std::vector<double> energy;

  bool operator==(const PseudoLabel&) const = default;
};

struct SkippedPair {
  std::string speaker;
  std::string sentence;
  Emotion emotion = Emotion::kNeutral;
  std::string reason;
};

struct PseudoDataset {
  std::vector<PseudoLabel> labels;
  std::vector<SkippedPair> skipped;
};

inline PseudoLabel make_pseudo_label(const UtteranceRecord& i, const UtteranceRecord& j, double lambda) {
  auto m = mix(i.features, j.features, lambda);
  return {i.speaker, i.sentence, i.emotion, j.emotion, lambda,
          std::move(m.pitch), std::move(m.duration), std::move(m.energy)};
}

// Record r uses its own substream of `seed`, so output does not depend on
// how records are scheduled. Pairs whose phoneme sequences disagree are
// reported in `skipped` and never drawn.
inline PseudoDataset generate_pseudo_dataset(const CorpusIndex& index, std::size_t count,
                                             LambdaDistribution dist, std::uint64_t seed) {
  if (count == 0) throw Error("pseudo-label count must be positive");
  index.validate_parallel();
  PseudoDataset out;
  std::vector<RecordPair> mixable;
  for (const auto& p : eligible_pairs(index)) {
    if (same_phonemes(p.first->features, p.second->features)) {
      mixable.push_back(p);
    } else {
      out.skipped.push_back({p.second->speaker, p.second->sentence, p.second->emotion,
                             "phoneme sequence differs from neutral"});
    }
  }
  if (mixable.empty()) throw Error("corpus index yields no mixable pairs");

  out.labels.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng = substream(seed, r);
    auto [first, second] = detail::draw_pair(mixable, rng);
    const double lambda = sample_lambda(dist, rng);
    out.labels.push_back(make_pseudo_label(*first, *second, lambda));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-label text format, one record per line, tab-separated:
//   speaker sentence emo_i emo_j lambda pitch duration energy
// where the three sequences are comma-separated and lambda weights emo_i.

namespace detail {

template <typename T>
std::string join_values(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, int>) out += std::to_string(v[i]);
    else out += format_double(v[i]);
  }
  return out;
}

}  // namespace detail

inline std::string format_pseudo_labels(const std::vector<PseudoLabel>& labels) {
  std::string out = "# speaker\tsentence\temo_i\temo_j\tlambda(weight on emo_i)\tpitch\tduration\tenergy\n";
  for (const auto& l : labels) {
    out += l.speaker + '\t' + l.sentence + '\t' + std::string(to_string(l.emo_i)) + '\t' +
           std::string(to_string(l.emo_j)) + '\t' + format_double(l.lambda) + '\t' +
           detail::join_values(l.pitch) + '\t' + detail::join_values(l.duration) + '\t' +
           detail::join_values(l.energy) + '\n';
  }
  return out;
}

inline std::vector<PseudoLabel> parse_pseudo_labels(const std::string& text) {
  std::vector<PseudoLabel> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 8) throw Error("malformed pseudo-label line: '" + line + "'");
    PseudoLabel l;
    l.speaker = cols[0];
    l.sentence = cols[1];
    l.emo_i = parse_emotion(cols[2]);
    l.emo_j = parse_emotion(cols[3]);
    l.lambda = parse_double(cols[4], "lambda");
    for (const auto& s : split(cols[5], ',')) l.pitch.push_back(parse_double(s, "pitch"));
    for (const auto& s : split(cols[6], ',')) l.duration.push_back(static_cast<int>(parse_double(s, "duration")));
    for (const auto& s : split(cols[7], ',')) l.energy.push_back(parse_double(s, "energy"));
    if (l.pitch.size() != l.duration.size() || l.pitch.size() != l.energy.size())
      throw Error("pseudo-label sequences differ in length");
    if (!(l.lambda >= 0.0 && l.lambda <= 1.0)) throw Error("pseudo-label lambda outside [0, 1]");
    out.push_back(std::move(l));
  }
  return out;
}

inline std::string format_skip_report(const std::vector<SkippedPair>& skipped) {
  std::string out = "# speaker\tsentence\temotion\treason\n";
  for (const auto& s : skipped)
    out += s.speaker + '\t' + s.sentence + '\t' + std::string(to_string(s.emotion)) + '\t' + s.reason + '\n';
  return out;
}

}  // namespace emomix
