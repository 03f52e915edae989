#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/mixer.hpp"
#include "emomix/track_io.hpp"

namespace emomix {

namespace fs = std::filesystem;

// One utterance. Relative paths are relative to the manifest's directory;
// "-" marks an absent path. `features` is a stem: the feature files are
// <stem>.track.tsv, <stem>.f0.imx, <stem>.energy.imx, <stem>.mcep.imx and
// <stem>.phon.tsv.
struct ManifestRow {
  std::string speaker;
  std::string sentence;
  Emotion emotion = Emotion::kNeutral;
  std::string audio = "-";
  std::string alignment = "-";
  std::string features = "-";
  double lambda = 1.0;

  std::string id() const { return speaker + "/" + sentence + "/" + std::string(to_string(emotion)); }
};

struct Manifest {
  fs::path base_dir;
  std::vector<ManifestRow> rows;

  fs::path resolve(const std::string& p) const {
    if (p == "-" || p.empty()) throw Error("path is not set");
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

struct FeaturePaths {
  fs::path table, f0, energy, cepstra, phonemes;

  explicit FeaturePaths(const fs::path& stem)
      : table(stem.string() + ".track.tsv"),
        f0(stem.string() + ".f0.imx"),
        energy(stem.string() + ".energy.imx"),
        cepstra(stem.string() + ".mcep.imx"),
        phonemes(stem.string() + ".phon.tsv") {}
};

// speaker<TAB>sentence<TAB>emotion<TAB>audio<TAB>alignment<TAB>features[<TAB>lambda]
inline Manifest parse_manifest(const std::string& text, fs::path base_dir = {}) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split(line, '\t');
    if (cols.size() != 6 && cols.size() != 7)
      throw Error("manifest line " + std::to_string(lineno) + " has " + std::to_string(cols.size()) +
                  " fields (expected 6 or 7)");
    ManifestRow r;
    r.speaker = cols[0];
    r.sentence = cols[1];
    r.emotion = parse_emotion(cols[2]);
    r.audio = cols[3];
    r.alignment = cols[4];
    r.features = cols[5];
    if (cols.size() == 7) r.lambda = parse_double(cols[6], "lambda");
    if (r.speaker.empty() || r.sentence.empty())
      throw Error("manifest line " + std::to_string(lineno) + " lacks speaker or sentence id");
    m.rows.push_back(std::move(r));
  }
  return m;
}

inline Manifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path());
}

inline std::string format_manifest(const Manifest& m) {
  std::string out = "# speaker\tsentence\temotion\taudio\talignment\tfeatures\tlambda\n";
  for (const auto& r : m.rows)
    out += r.speaker + '\t' + r.sentence + '\t' + std::string(to_string(r.emotion)) + '\t' + r.audio + '\t' +
           r.alignment + '\t' + r.features + '\t' + format_double(r.lambda) + '\n';
  return out;
}

// `target` expressed relative to `dir`, falling back to absolute.
inline std::string relative_to(const fs::path& target, const fs::path& dir) {
  const auto abs_target = fs::absolute(target).lexically_normal();
  const auto abs_dir = fs::absolute(dir).lexically_normal();
  auto rel = abs_target.lexically_relative(abs_dir);
  return rel.empty() ? abs_target.generic_string() : rel.generic_string();
}

}  // namespace emomix
