#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "emomix/alignment.hpp"
#include "emomix/checkpoint.hpp"
#include "emomix/config.hpp"
#include "emomix/error.hpp"
#include "emomix/features.hpp"
#include "emomix/manifest.hpp"
#include "emomix/metrics.hpp"
#include "emomix/mixer.hpp"
#include "emomix/track_io.hpp"
#include "emomix/training.hpp"
#include "emomix/wav.hpp"

namespace emomix {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitPartial = 2,
  kExitConfig = 3,
  kExitDiverged = 4,
};

struct RowError {
  std::size_t row = 0;
  std::string id;
  std::string message;
};

inline std::string format_row_errors(const std::vector<RowError>& errors) {
  std::string out = "# row\tutterance\terror\n";
  for (const auto& e : errors) out += std::to_string(e.row) + '\t' + e.id + '\t' + e.message + '\n';
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline void guard_not_input(const fs::path& out, const fs::path& input) {
  std::error_code ec;
  if (fs::exists(out) && fs::exists(input) && fs::equivalent(out, input, ec))
    throw ConfigError("output " + out.string() + " would overwrite input " + input.string());
}

// ---------------------------------------------------------------------------
// extract

struct ExtractedFeatures {
  F0Track f0;
  EnergyTrack energy;
  MelCepstraTrack cepstra;
  PhonemeFeatures phonemes;
};

inline ExtractedFeatures extract_utterance(const Waveform& w, const PhonemeAlignment& a, const AnalysisConfig& cfg) {
  ExtractedFeatures x;
  x.f0 = estimate_f0(w, cfg);
  x.energy = compute_energy(w, cfg);
  x.cepstra = compute_mel_cepstra(w, cfg);
  x.phonemes = phoneme_average(x.f0, x.energy, a, cfg);
  return x;
}

inline void write_features(const FeaturePaths& paths, const ExtractedFeatures& x) {
  write_file_atomic(paths.table, format_track_table(x.f0, x.energy));
  write_file_atomic(paths.f0, encode_track(x.f0));
  write_file_atomic(paths.energy, encode_track(x.energy));
  write_file_atomic(paths.cepstra, encode_track(x.cepstra));
  write_file_atomic(paths.phonemes, format_phoneme_features(x.phonemes));
}

struct ExtractResult {
  Manifest manifest;  // successfully extracted rows, paths relative to the output directory
  std::vector<RowError> errors;
  int exit_code = kExitOk;
};

// Writes features under <out>/features/<speaker>/<emotion>/<sentence>.*, the
// updated manifest to <out>/manifest.tsv and failures to <out>/extract_errors.tsv.
inline ExtractResult cmd_extract(const fs::path& manifest_path, const ToolConfig& cfg, const fs::path& out_dir,
                                 int jobs = 1) {
  validate(cfg);
  const Manifest in = load_manifest(manifest_path);
  if (in.rows.empty()) throw Error("manifest " + manifest_path.string() + " is empty");
  fs::create_directories(out_dir);
  guard_not_input(out_dir / "manifest.tsv", manifest_path);

  std::vector<std::string> failures(in.rows.size());
  std::vector<ManifestRow> done(in.rows.size());
  parallel_for(in.rows.size(), jobs, [&](std::size_t i) {
    const auto& row = in.rows[i];
    try {
      const auto wave = load_waveform(in.resolve(row.audio));
      const auto align = parse_alignment(read_text_file(in.resolve(row.alignment)));
      const auto x = extract_utterance(wave, align, cfg.analysis);
      const fs::path stem_rel = fs::path("features") / row.speaker / std::string(to_string(row.emotion)) / row.sentence;
      write_features(FeaturePaths(out_dir / stem_rel), x);
      ManifestRow r = row;
      r.audio = relative_to(in.resolve(row.audio), out_dir);
      r.alignment = relative_to(in.resolve(row.alignment), out_dir);
      r.features = stem_rel.generic_string();
      done[i] = std::move(r);
    } catch (const std::exception& e) {
      failures[i] = e.what();
      if (failures[i].empty()) failures[i] = "unknown error";
    }
  });

  ExtractResult result;
  result.manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < in.rows.size(); ++i) {
    if (failures[i].empty()) result.manifest.rows.push_back(done[i]);
    else result.errors.push_back({i, in.rows[i].id(), failures[i]});
  }
  write_file_atomic(out_dir / "manifest.tsv", format_manifest(result.manifest));
  write_file_atomic(out_dir / "extract_errors.tsv", format_row_errors(result.errors));
  if (result.manifest.rows.empty()) result.exit_code = kExitFailure;
  else if (!result.errors.empty()) result.exit_code = kExitPartial;
  return result;
}

// ---------------------------------------------------------------------------
// Corpus loading shared by mix and train.

inline CorpusIndex load_corpus(const Manifest& m) {
  CorpusIndex index;
  for (const auto& row : m.rows) {
    if (row.features == "-") throw Error("manifest row " + row.id() + " has no extracted features");
    FeaturePaths paths(m.resolve(row.features));
    index.add({row.speaker, row.sentence, row.emotion, parse_phoneme_features(read_text_file(paths.phonemes))});
  }
  if (index.empty()) throw Error("manifest holds no utterances");
  index.validate_parallel();
  return index;
}

struct MixResult {
  PseudoDataset dataset;
  int exit_code = kExitOk;
};

// Writes <out>/pseudo_labels.tsv and <out>/skip_report.tsv.
inline MixResult cmd_mix(const fs::path& manifest_path, const ToolConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  const auto index = load_corpus(load_manifest(manifest_path));
  MixResult r;
  r.dataset = generate_pseudo_dataset(index, cfg.mixer.count, cfg.mixer.distribution, cfg.mixer.seed);
  fs::create_directories(out_dir);
  guard_not_input(out_dir / "pseudo_labels.tsv", manifest_path);
  write_file_atomic(out_dir / "pseudo_labels.tsv", format_pseudo_labels(r.dataset.labels));
  write_file_atomic(out_dir / "skip_report.tsv", format_skip_report(r.dataset.skipped));
  return r;
}

// ---------------------------------------------------------------------------
// train

inline constexpr double kProbeIntensities[] = {0.0, 0.25, 0.5, 0.75, 1.0};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossReport> trajectory;
  std::vector<IntensityRow> intensity;
  int exit_code = kExitOk;
  std::string divergence;
};

// Writes <out>/checkpoint.bin, <out>/losses.csv and <out>/intensity.csv; on
// divergence, <out>/divergence.txt instead of the checkpoint.
inline TrainResult cmd_train(const fs::path& manifest_path, const fs::path& pseudo_path, const ToolConfig& cfg,
                             const fs::path& out_dir) {
  validate(cfg);
  const auto index = load_corpus(load_manifest(manifest_path));
  const auto labels = parse_pseudo_labels(read_text_file(pseudo_path));
  if (labels.empty()) throw Error("pseudo-label dataset " + pseudo_path.string() + " is empty");

  const auto vocab = Vocabulary::from_corpus(index);
  AdaptorConfig acfg = cfg.adaptor;
  acfg.vocab_size = static_cast<int>(vocab.phonemes.size());
  acfg.speaker_count = static_cast<int>(vocab.speakers.size());

  std::vector<TrainingItem> categorical, intermediate;
  for (const auto& [key, rec] : index.records()) categorical.push_back(resolve(rec, vocab));
  for (const auto& l : labels) intermediate.push_back(resolve(l, vocab, index));

  auto [params, disc] = init_params(acfg, normalization_from(index));
  TrainingRun run{std::move(params), std::move(disc), {}, 0};
  TrainResult result;
  fs::create_directories(out_dir);
  try {
    train(run, categorical, intermediate, acfg, cfg.train_steps);
  } catch (const DivergenceError& e) {
    result.exit_code = kExitDiverged;
    result.divergence = e.what();
    write_file_atomic(out_dir / "divergence.txt", "step\t" + std::to_string(e.step()) + "\nterm\t" + e.term() +
                                                      "\nvalue\t" + format_double(e.value()) + "\n");
  }
  result.trajectory = run.trajectory;
  write_file_atomic(out_dir / "losses.csv", format_loss_csv(run.trajectory, acfg.use_discriminator));
  if (result.exit_code != kExitOk) return result;

  result.checkpoint = {acfg, vocab, run.params, run.disc, run.steps_done};
  write_file_atomic(out_dir / "checkpoint.bin", encode_checkpoint(result.checkpoint));
  result.intensity = intensity_probe(run.params, vocab, index, kProbeIntensities);
  write_file_atomic(out_dir / "intensity.csv", format_intensity_csv(result.intensity));
  return result;
}

// ---------------------------------------------------------------------------
// eval

struct EvalRow {
  std::string id;
  Emotion emotion = Emotion::kNeutral;
  double lambda = 1.0;
  MetricReport metrics;
};

struct EmotionAggregate {
  Emotion emotion = Emotion::kNeutral;
  std::size_t count = 0;
  double mean_mcd_db = 0.0;
  double mean_f0_rmse_hz = 0.0;
  double mean_mel_mae = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  std::vector<RowError> missing;
  std::vector<EmotionAggregate> by_emotion;
  int exit_code = kExitOk;
};

inline std::vector<EmotionAggregate> aggregate_by_emotion(const std::vector<EvalRow>& rows) {
  std::map<Emotion, EmotionAggregate> acc;
  for (const auto& r : rows) {
    auto& a = acc[r.emotion];
    a.emotion = r.emotion;
    ++a.count;
    a.mean_mcd_db += r.metrics.mcd_db;
    a.mean_f0_rmse_hz += r.metrics.f0_rmse_hz;
    a.mean_mel_mae += r.metrics.mel_mae;
  }
  std::vector<EmotionAggregate> out;
  for (auto& [e, a] : acc) {
    const auto n = static_cast<double>(a.count);
    a.mean_mcd_db /= n;
    a.mean_f0_rmse_hz /= n;
    a.mean_mel_mae /= n;
    out.push_back(a);
  }
  return out;
}

inline std::string format_eval_summary(const std::vector<EvalRow>& rows) {
  std::string out = "utterance_id,emotion,lambda,mcd_db,f0_rmse_hz,mel_mae\n";
  for (const auto& r : rows)
    out += r.id + "," + std::string(to_string(r.emotion)) + "," + format_double(r.lambda) + "," +
           format_double(r.metrics.mcd_db) + "," + format_double(r.metrics.f0_rmse_hz) + "," +
           format_double(r.metrics.mel_mae) + "\n";
  return out;
}

inline std::string format_eval_records(const std::vector<EvalRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["utterance_id"] = r.id;
    j["emotion"] = std::string(to_string(r.emotion));
    j["lambda"] = r.lambda;
    j["mcd_db"] = r.metrics.mcd_db;
    j["f0_rmse_hz"] = r.metrics.f0_rmse_hz;
    j["mel_mae"] = r.metrics.mel_mae;
    j["frames_compared"] = r.metrics.frames_compared;
    j["voiced_frames_compared"] = r.metrics.voiced_frames_compared;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string format_emotion_aggregates(const std::vector<EmotionAggregate>& agg) {
  std::string out = "emotion,count,mean_mcd_db,mean_f0_rmse_hz,mean_mel_mae\n";
  for (const auto& a : agg)
    out += std::string(to_string(a.emotion)) + "," + std::to_string(a.count) + "," + format_double(a.mean_mcd_db) +
           "," + format_double(a.mean_f0_rmse_hz) + "," + format_double(a.mean_mel_mae) + "\n";
  return out;
}

// Matches rows by (speaker, sentence, emotion). Writes <out>/metrics.jsonl,
// <out>/metrics_summary.csv, <out>/metrics_by_emotion.csv and <out>/eval_missing.tsv.
inline EvalResult cmd_eval(const fs::path& ref_manifest, const fs::path& cand_manifest, const ToolConfig& cfg,
                           const fs::path& out_dir, int jobs = 1) {
  validate(cfg);
  const auto ref = load_manifest(ref_manifest);
  const auto cand = load_manifest(cand_manifest);
  std::map<std::string, const ManifestRow*> cand_by_id;
  for (const auto& r : cand.rows) cand_by_id[r.id()] = &r;

  struct Job {
    std::size_t ref_row;
    const ManifestRow* ref;
    const ManifestRow* cand;
  };
  std::vector<Job> jobs_list;
  EvalResult result;
  for (std::size_t i = 0; i < ref.rows.size(); ++i) {
    auto it = cand_by_id.find(ref.rows[i].id());
    if (it == cand_by_id.end()) result.missing.push_back({i, ref.rows[i].id(), "no candidate with this id"});
    else jobs_list.push_back({i, &ref.rows[i], it->second});
  }
  if (jobs_list.empty()) throw Error("reference and candidate manifests share no utterance ids");

  std::vector<EvalRow> rows(jobs_list.size());
  std::vector<std::string> failures(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t k) {
    const auto& job = jobs_list[k];
    try {
      FeaturePaths rp(ref.resolve(job.ref->features)), cp(cand.resolve(job.cand->features));
      rows[k].id = job.ref->id();
      rows[k].emotion = job.ref->emotion;
      rows[k].lambda = job.cand->lambda;
      rows[k].metrics = evaluate_utterance(decode_mel_cepstra_track(read_text_file(rp.cepstra)),
                                           decode_f0_track(read_text_file(rp.f0)),
                                           decode_mel_cepstra_track(read_text_file(cp.cepstra)),
                                           decode_f0_track(read_text_file(cp.f0)));
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < jobs_list.size(); ++k) {
    if (failures[k].empty()) result.rows.push_back(rows[k]);
    else result.missing.push_back({jobs_list[k].ref_row, jobs_list[k].ref->id(), failures[k]});
  }
  std::sort(result.missing.begin(), result.missing.end(), [](const auto& a, const auto& b) { return a.row < b.row; });
  result.by_emotion = aggregate_by_emotion(result.rows);

  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "metrics.jsonl", format_eval_records(result.rows));
  write_file_atomic(out_dir / "metrics_summary.csv", format_eval_summary(result.rows));
  write_file_atomic(out_dir / "metrics_by_emotion.csv", format_emotion_aggregates(result.by_emotion));
  write_file_atomic(out_dir / "eval_missing.tsv", format_row_errors(result.missing));
  if (result.rows.empty()) result.exit_code = kExitFailure;
  else if (!result.missing.empty()) result.exit_code = kExitPartial;
  return result;
}

// ---------------------------------------------------------------------------
// plot

// Accepts F0 containers (.imx) or columnar track tables.
inline F0Track load_f0_track(const fs::path& path) {
  const auto bytes = read_text_file(path);
  if (bytes.rfind("IMX1", 0) == 0) return decode_f0_track(bytes);
  return parse_track_table(bytes).first;
}

inline void cmd_plot(const std::vector<std::pair<std::string, fs::path>>& inputs, const fs::path& out) {
  std::vector<LabeledTrack> tracks;
  for (const auto& [label, path] : inputs) tracks.push_back({label, load_f0_track(path)});
  export_pitch_contour(tracks, out);
}

// ---------------------------------------------------------------------------
// manifest

struct ManifestBuildOptions {
  std::string alignment_extension = ".tsv";
  // When > 0, a numeric utterance suffix n maps to sentence ((n - 1) % modulo) + 1,
  // which pairs ESD's per-emotion numbering (350 utterances per emotion).
  int parallel_modulo = 0;
};

// Scans <root>/<speaker>/<emotion>/<utterance>.wav; each alignment sits next
// to its audio with `alignment_extension`.
inline Manifest build_manifest(const fs::path& root, const fs::path& manifest_dir, const ManifestBuildOptions& opts = {}) {
  if (!fs::is_directory(root)) throw Error(root.string() + " is not a directory");
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav") wavs.push_back(entry.path());
  }
  std::sort(wavs.begin(), wavs.end());

  Manifest m;
  m.base_dir = manifest_dir;
  for (const auto& wav : wavs) {
    const auto rel = wav.lexically_relative(root);
    auto it = rel.begin();
    if (std::distance(rel.begin(), rel.end()) != 3) continue;
    const std::string speaker = (it++)->string();
    Emotion emotion;
    try {
      emotion = parse_emotion((it++)->string());
    } catch (const Error&) {
      continue;
    }
    std::string sentence = wav.stem().string();
    if (opts.parallel_modulo > 0) {
      const auto us = sentence.find_last_of('_');
      const std::string digits = us == std::string::npos ? sentence : sentence.substr(us + 1);
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
        const long n = std::stol(digits);
        sentence = std::to_string((n - 1) % opts.parallel_modulo + 1);
        sentence.insert(0, std::max<std::size_t>(0, 6 - std::min<std::size_t>(6, sentence.size())), '0');
      }
    }
    ManifestRow row;
    row.speaker = speaker;
    row.sentence = sentence;
    row.emotion = emotion;
    row.audio = relative_to(wav, manifest_dir);
    auto align = wav;
    align.replace_extension(opts.alignment_extension);
    row.alignment = relative_to(align, manifest_dir);
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) throw Error("no <speaker>/<emotion>/*.wav files under " + root.string());
  return m;
}

}  // namespace emomix
