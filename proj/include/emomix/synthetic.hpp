#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "emomix/alignment.hpp"
#include "emomix/mixer.hpp"
#include "emomix/rng.hpp"
#include "emomix/wav.hpp"

namespace emomix {

// Parallel corpus with known prosodic structure. Neutral phoneme pitch is a
// speaker base plus a phoneme offset; emotional renditions shift pitch by
// `pitch_offset_hz`, scale energy by `energy_ratio` and durations by
// `duration_ratio` (rounded).
struct SyntheticCorpusSpec {
  int speakers = 4;
  int sentences = 12;
  int phoneme_inventory = 10;
  int min_length = 5;
  int max_length = 10;
  std::vector<Emotion> emotions = {Emotion::kHappy};
  double pitch_offset_hz = 50.0;
  double energy_ratio = 1.5;
  double duration_ratio = 1.0;
  std::uint64_t seed = 7;
};

inline CorpusIndex synthetic_offset_corpus(const SyntheticCorpusSpec& spec) {
  Rng rng(spec.seed);
  std::vector<double> speaker_pitch, speaker_energy;
  for (int s = 0; s < spec.speakers; ++s) {
    speaker_pitch.push_back(rng.uniform(110.0, 220.0));
    speaker_energy.push_back(rng.uniform(2.0, 6.0));
  }
  std::vector<double> phone_pitch, phone_energy;
  std::vector<int> phone_duration;
  for (int v = 0; v < spec.phoneme_inventory; ++v) {
    phone_pitch.push_back(rng.uniform(-20.0, 20.0));
    phone_energy.push_back(rng.uniform(0.5, 1.5));
    phone_duration.push_back(3 + static_cast<int>(rng.below(10)));
  }

  CorpusIndex index;
  for (int n = 0; n < spec.sentences; ++n) {
    const int len = spec.min_length + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1)));
    std::vector<int> phones;
    for (int k = 0; k < len; ++k) phones.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.phoneme_inventory))));
    for (int s = 0; s < spec.speakers; ++s) {
      PhonemeFeatures neutral;
      for (int v : phones) {
        neutral.phonemes.push_back("P" + std::to_string(v));
        neutral.pitch.push_back(speaker_pitch[s] + phone_pitch[v]);
        neutral.energy.push_back(speaker_energy[s] * phone_energy[v]);
        neutral.duration.push_back(phone_duration[v]);
      }
      const std::string speaker = "spk" + std::to_string(s);
      const std::string sentence = "s" + std::to_string(n);
      for (Emotion e : spec.emotions) {
        PhonemeFeatures emo = neutral;
        for (std::size_t k = 0; k < emo.size(); ++k) {
          emo.pitch[k] += spec.pitch_offset_hz;
          emo.energy[k] *= spec.energy_ratio;
          emo.duration[k] = static_cast<int>(std::lround(emo.duration[k] * spec.duration_ratio));
        }
        index.add({speaker, sentence, e, std::move(emo)});
      }
      index.add({speaker, sentence, Emotion::kNeutral, std::move(neutral)});
    }
  }
  return index;
}

// Renders phoneme-level prosody as audio: each phoneme is a harmonic tone at
// its pitch, `duration` hops long, with amplitude following `energy`, and
// the matching alignment.
struct RenderedUtterance {
  Waveform audio;
  PhonemeAlignment alignment;
};

inline RenderedUtterance render_utterance(const PhonemeFeatures& f, int sample_rate, int hop_length,
                                          double energy_to_amplitude, int lead_frames = 2) {
  RenderedUtterance out;
  out.audio.sample_rate = sample_rate;
  std::size_t pos = static_cast<std::size_t>(lead_frames * hop_length);
  out.audio.samples.assign(pos, 0.0);
  double phase = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const std::size_t n = static_cast<std::size_t>(f.duration[k] * hop_length);
    const double amp = std::min(0.9, f.energy[k] * energy_to_amplitude);
    for (std::size_t i = 0; i < n; ++i) {
      phase += 2.0 * std::numbers::pi * f.pitch[k] / sample_rate;
      const double s = std::sin(phase) + 0.5 * std::sin(2.0 * phase) + 0.25 * std::sin(3.0 * phase);
      out.audio.samples.push_back(amp * s / 1.75);
    }
    const double start = static_cast<double>(pos) / sample_rate;
    pos += n;
    if (n > 0) out.alignment.entries.push_back({f.phonemes[k], start, static_cast<double>(pos) / sample_rate});
  }
  // Trailing silence so the final phoneme is fully covered by analysis frames.
  out.audio.samples.resize(out.audio.samples.size() + static_cast<std::size_t>(6 * hop_length), 0.0);
  return out;
}

}  // namespace emomix
