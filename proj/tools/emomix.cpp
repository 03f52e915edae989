#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emomix/emomix.hpp"

namespace {

using emomix::fs::path;

struct Globals {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string output_dir = ".";
  bool no_discriminator = false;
  std::map<std::string, std::string> overrides;
};

emomix::ToolConfig build_config(const Globals& g) {
  emomix::ToolConfig cfg;
  if (!g.config_file.empty()) {
    std::string text;
    try {
      text = emomix::read_text_file(g.config_file);
    } catch (const std::exception& e) {
      throw emomix::ConfigError(e.what());
    }
    emomix::apply_config_text(cfg, text);
  }
  for (const auto& [key, value] : g.overrides) emomix::set_config_value(cfg, key, value);
  if (g.seed) cfg.mixer.seed = cfg.adaptor.seed = *g.seed;
  if (g.no_discriminator) cfg.adaptor.use_discriminator = false;
  emomix::validate(cfg);
  return cfg;
}

void report(const std::vector<emomix::RowError>& errors, const char* what) {
  for (const auto& e : errors) std::cerr << what << " " << e.id << ": " << e.message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-intensity prosody toolkit: feature extraction, pseudo-label mixing, adaptor training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_file, "Flat key = value configuration file");
  app.add_option("--seed", g.seed, "Seed for the mixer and the adaptor");
  app.add_option("--jobs", g.jobs, "Worker threads for extract and eval")->check(CLI::Range(1, 64));
  app.add_option("--output-dir", g.output_dir, "Directory receiving all artifacts");
  app.add_flag("--no-discriminator", g.no_discriminator, "Train without adversarial terms");
  std::map<std::string, std::string> raw;
  for (const auto& key : emomix::config_keys()) app.add_option("--" + key, raw[key], "Overrides " + key);

  auto* manifest = app.add_subcommand("manifest", "Build a manifest from <root>/<speaker>/<emotion>/*.wav");
  std::string root, manifest_out = "manifest.tsv", align_ext = ".tsv";
  int modulo = 0;
  manifest->add_option("--root", root, "Corpus root")->required();
  manifest->add_option("--out", manifest_out, "Manifest file name inside the output directory");
  manifest->add_option("--alignment-ext", align_ext, "Extension of alignment files next to each wav");
  manifest->add_option("--parallel-modulo", modulo, "Map numeric utterance ids onto shared sentence ids");

  auto* extract = app.add_subcommand("extract", "Extract F0, energy, mel cepstra and phoneme features");
  std::string in_manifest;
  extract->add_option("--manifest", in_manifest, "Input manifest")->required()->check(CLI::ExistingFile);

  auto* mixcmd = app.add_subcommand("mix", "Generate pseudo-labelled intermediate-intensity data");
  mixcmd->add_option("--manifest", in_manifest, "Extracted manifest")->required()->check(CLI::ExistingFile);

  auto* traincmd = app.add_subcommand("train", "Train the prosody adaptor");
  std::string pseudo;
  traincmd->add_option("--manifest", in_manifest, "Extracted manifest")->required()->check(CLI::ExistingFile);
  traincmd->add_option("--pseudo-labels", pseudo, "Output of mix")->required()->check(CLI::ExistingFile);

  auto* evalcmd = app.add_subcommand("eval", "Compare candidate utterances against references");
  std::string reference, candidate;
  evalcmd->add_option("--reference", reference, "Extracted reference manifest")->required()->check(CLI::ExistingFile);
  evalcmd->add_option("--candidate", candidate, "Extracted candidate manifest")->required()->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plot", "Export pitch contours as CSV");
  std::vector<std::string> tracks;
  std::string plot_out = "pitch_contour.csv";
  plot->add_option("--track", tracks, "label=path to an .f0.imx or .track.tsv file")->required();
  plot->add_option("--out", plot_out, "CSV file name inside the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? emomix::kExitOk : emomix::kExitConfig;
  }
  for (const auto& key : emomix::config_keys())
    if (app.count("--" + key) > 0) g.overrides[key] = raw[key];

  try {
    const auto cfg = build_config(g);
    const path out(g.output_dir);
    if (*manifest) {
      emomix::fs::create_directories(out);
      emomix::ManifestBuildOptions opts;
      opts.alignment_extension = align_ext;
      opts.parallel_modulo = modulo;
      const auto m = emomix::build_manifest(root, out, opts);
      emomix::write_file_atomic(out / manifest_out, emomix::format_manifest(m));
      std::cout << "manifest: " << m.rows.size() << " utterances -> " << (out / manifest_out).string() << "\n";
      return emomix::kExitOk;
    }
    if (*extract) {
      const auto r = emomix::cmd_extract(in_manifest, cfg, out, g.jobs);
      report(r.errors, "extract failed for");
      std::cout << "extract: " << r.manifest.rows.size() << " ok, " << r.errors.size() << " failed\n";
      return r.exit_code;
    }
    if (*mixcmd) {
      const auto r = emomix::cmd_mix(in_manifest, cfg, out);
      std::cout << "mix: " << r.dataset.labels.size() << " pseudo-labels, " << r.dataset.skipped.size()
                << " pairs skipped\n";
      return r.exit_code;
    }
    if (*traincmd) {
      const auto r = emomix::cmd_train(in_manifest, pseudo, cfg, out);
      if (r.exit_code == emomix::kExitDiverged) {
        std::cerr << "train diverged: " << r.divergence << "\n";
        return r.exit_code;
      }
      const auto& last = r.trajectory.empty() ? emomix::LossReport{} : r.trajectory.back();
      std::cout << "train: " << r.checkpoint.step << " steps, final L_total " << last.L_total << "\n";
      return r.exit_code;
    }
    if (*evalcmd) {
      const auto r = emomix::cmd_eval(reference, candidate, cfg, out, g.jobs);
      report(r.missing, "eval skipped");
      for (const auto& a : r.by_emotion)
        std::cout << emomix::to_string(a.emotion) << ": n=" << a.count << " mcd_db=" << a.mean_mcd_db
                  << " f0_rmse_hz=" << a.mean_f0_rmse_hz << " mel_mae=" << a.mean_mel_mae << "\n";
      return r.exit_code;
    }
    if (*plot) {
      std::vector<std::pair<std::string, path>> inputs;
      for (const auto& t : tracks) {
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0) throw emomix::ConfigError("--track expects label=path, got '" + t + "'");
        inputs.emplace_back(t.substr(0, eq), t.substr(eq + 1));
      }
      emomix::fs::create_directories(out);
      emomix::cmd_plot(inputs, out / plot_out);
      return emomix::kExitOk;
    }
  } catch (const emomix::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return emomix::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return emomix::kExitFailure;
  }
  return emomix::kExitFailure;
}
