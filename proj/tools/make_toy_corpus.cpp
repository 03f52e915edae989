// Writes a small parallel toy corpus: rendered reference recordings, a
// candidate set rendered from mixed prosody, and their manifests.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "emomix/emomix.hpp"

namespace {

using namespace emomix;

constexpr int kSampleRate = 22050;
constexpr int kHop = 256;
constexpr double kAmplitudePerEnergy = 0.04;
constexpr double kCandidateLambda = 0.75;

void write_utterance(const fs::path& root, const std::string& speaker, Emotion e, const std::string& sentence,
                     const PhonemeFeatures& f) {
  const auto dir = root / speaker / std::string(to_string(e));
  fs::create_directories(dir);
  const auto r = render_utterance(f, kSampleRate, kHop, kAmplitudePerEnergy);
  save_waveform(r.audio, dir / (sentence + ".wav"));
  write_file_atomic(dir / (sentence + ".tsv"), format_alignment(r.alignment));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled toy corpus"};
  std::string out = "data/toy_corpus";
  SyntheticCorpusSpec spec;
  spec.speakers = 2;
  spec.sentences = 3;
  spec.min_length = 4;
  spec.max_length = 6;
  app.add_option("--out", out, "Output directory");
  app.add_option("--seed", spec.seed, "Corpus seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(out);
    const auto index = synthetic_offset_corpus(spec);
    for (const auto& [key, rec] : index.records()) {
      write_utterance(root / "reference", rec.speaker, rec.emotion, rec.sentence, rec.features);
      PhonemeFeatures cand = rec.features;
      if (rec.emotion == Emotion::kNeutral) {
        for (auto& p : cand.pitch) p *= 1.02;
      } else {
        const auto* neutral = index.find(rec.speaker, rec.sentence, Emotion::kNeutral);
        auto m = mix(rec.features, neutral->features, kCandidateLambda);
        cand.pitch = std::move(m.pitch);
        cand.duration = std::move(m.duration);
        cand.energy = std::move(m.energy);
      }
      write_utterance(root / "candidate", rec.speaker, rec.emotion, rec.sentence, cand);
    }
    write_file_atomic(root / "reference.tsv", format_manifest(build_manifest(root / "reference", root)));
    auto cand = build_manifest(root / "candidate", root);
    for (auto& row : cand.rows)
      if (row.emotion != Emotion::kNeutral) row.lambda = kCandidateLambda;
    write_file_atomic(root / "candidate.tsv", format_manifest(cand));
    write_file_atomic(root / "toy.conf",
                      "# Small settings for the bundled toy corpus\n"
                      "mixer.count = 200\n"
                      "mixer.seed = 3\n"
                      "adaptor.seed = 5\n"
                      "train.steps = 300\n");
    std::cout << "wrote " << index.size() << " reference and candidate utterances under " << root.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
