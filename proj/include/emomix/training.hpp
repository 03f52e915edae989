#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "emomix/adaptor.hpp"
#include "emomix/error.hpp"
#include "emomix/mixer.hpp"
#include "emomix/rng.hpp"
#include "emomix/track_io.hpp"

namespace emomix {

// Symbol tables mapping corpus tokens to embedding rows, in sorted order.
struct Vocabulary {
  std::vector<std::string> phonemes;
  std::vector<std::string> speakers;

  static Vocabulary from_corpus(const CorpusIndex& index) {
    std::set<std::string> ph, spk;
    for (const auto& [key, rec] : index.records()) {
      spk.insert(rec.speaker);
      ph.insert(rec.features.phonemes.begin(), rec.features.phonemes.end());
    }
    return {{ph.begin(), ph.end()}, {spk.begin(), spk.end()}};
  }

  int phoneme_id(const std::string& s) const { return lookup(phonemes, s, "phoneme"); }
  int speaker_id(const std::string& s) const { return lookup(speakers, s, "speaker"); }

  bool operator==(const Vocabulary&) const = default;

 private:
  static int lookup(const std::vector<std::string>& table, const std::string& s, const char* what) {
    auto it = std::lower_bound(table.begin(), table.end(), s);
    if (it == table.end() || *it != s) throw Error(std::string("unknown ") + what + " '" + s + "'");
    return static_cast<int>(it - table.begin());
  }
};

// A resolved training example: ids, conditioning, and label-domain targets.
struct TrainingItem {
  std::vector<int> phoneme_ids;
  int speaker = 0;
  EmotionCondition cond;
  ProsodyTarget target;
};

struct Batch {
  std::vector<TrainingItem> categorical;
  std::vector<TrainingItem> intermediate;
};

inline std::vector<int> phoneme_ids(const Vocabulary& vocab, const std::vector<std::string>& phonemes) {
  std::vector<int> ids;
  ids.reserve(phonemes.size());
  for (const auto& p : phonemes) ids.push_back(vocab.phoneme_id(p));
  return ids;
}

inline TrainingItem resolve(const UtteranceRecord& r, const Vocabulary& vocab) {
  return {phoneme_ids(vocab, r.features.phonemes), vocab.speaker_id(r.speaker), EmotionCondition::pure(r.emotion),
          ProsodyTarget::of(r.features)};
}

// Phonemes come from the label's source utterance in `index`.
inline TrainingItem resolve(const PseudoLabel& l, const Vocabulary& vocab, const CorpusIndex& index) {
  const UtteranceRecord* src = index.find(l.speaker, l.sentence, l.emo_i);
  if (!src) src = index.find(l.speaker, l.sentence, l.emo_j);
  if (!src) throw Error("pseudo-label " + l.speaker + "/" + l.sentence + " has no source utterance");
  if (src->features.size() != l.pitch.size())
    throw Error("pseudo-label " + l.speaker + "/" + l.sentence + " length differs from its source phonemes");
  return {phoneme_ids(vocab, src->features.phonemes), vocab.speaker_id(l.speaker),
          EmotionCondition{l.emo_i, l.emo_j, l.lambda}, ProsodyTarget::of(l)};
}

// Pitch/energy standardization statistics over every phoneme of every record.
inline Normalization normalization_from(const CorpusIndex& index) {
  double n = 0, ps = 0, pss = 0, es = 0, ess = 0;
  for (const auto& [key, rec] : index.records()) {
    for (std::size_t k = 0; k < rec.features.size(); ++k) {
      n += 1;
      ps += rec.features.pitch[k];
      pss += rec.features.pitch[k] * rec.features.pitch[k];
      es += rec.features.energy[k];
      ess += rec.features.energy[k] * rec.features.energy[k];
    }
  }
  Normalization norm;
  if (n == 0) return norm;
  norm.pitch_mean = ps / n;
  norm.energy_mean = es / n;
  const double pv = pss / n - norm.pitch_mean * norm.pitch_mean;
  const double ev = ess / n - norm.energy_mean * norm.energy_mean;
  norm.pitch_scale = pv > 1e-12 ? std::sqrt(pv) : 1.0;
  norm.energy_scale = ev > 1e-12 ? std::sqrt(ev) : 1.0;
  return norm;
}

// All loss terms of one step. L_adv_* are the generator-side least-squares
// terms E[(D(fake) - 1)^2]; disc_* are the discriminator objectives. The mel
// reconstruction term is not part of L_categorical here.
struct LossReport {
  long step = 0;
  bool adversarial = true;
  double L_d = 0, L_p = 0, L_e = 0;
  double L_d_tilde = 0, L_p_tilde = 0, L_e_tilde = 0;
  double L_adv_p = 0, L_adv_d = 0, L_adv_e = 0;
  double disc_p = 0, disc_d = 0, disc_e = 0;
  double L_categorical = 0, L_intermediate = 0, L_total = 0;

  double L_adv() const { return L_adv_p + L_adv_d + L_adv_e; }

  // (name, value) in CSV column order; adversarial columns only when enabled.
  std::vector<std::pair<std::string, double>> fields() const {
    std::vector<std::pair<std::string, double>> f = {
        {"L_d", L_d}, {"L_p", L_p}, {"L_e", L_e},
        {"L_d_tilde", L_d_tilde}, {"L_p_tilde", L_p_tilde}, {"L_e_tilde", L_e_tilde}};
    if (adversarial) {
      f.insert(f.end(), {{"L_adv_p", L_adv_p}, {"L_adv_d", L_adv_d}, {"L_adv_e", L_adv_e},
                         {"disc_p", disc_p}, {"disc_d", disc_d}, {"disc_e", disc_e}});
    }
    f.insert(f.end(), {{"L_categorical", L_categorical}, {"L_intermediate", L_intermediate}, {"L_total", L_total}});
    return f;
  }
};

inline void check_finite(const LossReport& r) {
  for (const auto& [name, v] : r.fields())
    if (!std::isfinite(v)) throw DivergenceError(name, v, r.step);
}

namespace detail {

inline std::array<std::vector<double>, 3> model_domain_targets(const ProsodyTarget& t, const Normalization& norm) {
  std::array<std::vector<double>, 3> out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    out[static_cast<std::size_t>(Element::kDuration)].push_back(std::log(t.duration[k] + 1.0));
    out[static_cast<std::size_t>(Element::kPitch)].push_back((t.pitch[k] - norm.pitch_mean) / norm.pitch_scale);
    out[static_cast<std::size_t>(Element::kEnergy)].push_back((t.energy[k] - norm.energy_mean) / norm.energy_scale);
  }
  return out;
}

struct ItemState {
  ForwardCache cache;
  std::array<std::vector<double>, 3> target;
  std::array<std::vector<double>, 3> dout;
};

// Regression pass over one half of the batch: fills per-element pooled MSE,
// and d(MSE)/d(output) into each item's dout.
inline std::array<double, 3> regression_pass(const AdaptorParams& p, const std::vector<TrainingItem>& items,
                                             std::vector<ItemState>& states) {
  std::size_t total = 0;
  for (const auto& it : items) {
    if (it.target.size() != it.phoneme_ids.size() || it.target.duration.size() != it.phoneme_ids.size() ||
        it.target.energy.size() != it.phoneme_ids.size())
      throw Error("training item target length differs from its phoneme sequence");
    total += it.phoneme_ids.size();
  }
  std::array<double, 3> loss{};
  states.clear();
  states.reserve(items.size());
  for (const auto& it : items) {
    ItemState s;
    s.cache = forward_raw(p, it.phoneme_ids, it.speaker, it.cond);
    s.target = model_domain_targets(it.target, p.norm);
    for (std::size_t h = 0; h < 3; ++h) {
      s.dout[h].assign(s.cache.length, 0.0);
      for (std::size_t k = 0; k < s.cache.length; ++k) {
        const double r = s.cache.out[h][k] - s.target[h][k];
        loss[h] += r * r;
        s.dout[h][k] = 2.0 * r / static_cast<double>(total);
      }
    }
    states.push_back(std::move(s));
  }
  for (auto& l : loss) l /= static_cast<double>(total);
  return loss;
}

}  // namespace detail

// Evaluates every loss term. When given, `gen_grad` receives dL_total/dparams
// (discriminator held fixed) and `disc_grad` receives the gradient of the
// summed discriminator objectives (predictions held fixed).
inline LossReport evaluate_objective(const AdaptorParams& p, const DiscriminatorParams& disc, const Batch& batch,
                                     bool adversarial, AdaptorParams* gen_grad, DiscriminatorParams* disc_grad) {
  if (batch.categorical.empty() || batch.intermediate.empty()) throw Error("training batches must be non-empty");
  std::vector<detail::ItemState> cat, inter;
  const auto lc = detail::regression_pass(p, batch.categorical, cat);
  const auto li = detail::regression_pass(p, batch.intermediate, inter);

  LossReport r;
  r.adversarial = adversarial;
  r.L_d = lc[0];
  r.L_p = lc[1];
  r.L_e = lc[2];
  r.L_d_tilde = li[0];
  r.L_p_tilde = li[1];
  r.L_e_tilde = li[2];

  if (adversarial) {
    const auto window = static_cast<std::size_t>(disc.window);
    for (Element e : kElements) {
      const auto h = static_cast<std::size_t>(e);
      const Mlp& net = disc.net(e);
      std::vector<double> real, fake;
      for (const auto& s : cat) real.push_back(detail::score_sequence(net, window, s.target[h]));
      for (const auto& s : inter) fake.push_back(detail::score_sequence(net, window, s.cache.out[h]));
      const auto adv = lsgan_losses(real, fake);
      const double nr = static_cast<double>(real.size()), nf = static_cast<double>(fake.size());
      switch (e) {
        case Element::kDuration: r.L_adv_d = adv.gen_loss; r.disc_d = adv.disc_loss; break;
        case Element::kPitch: r.L_adv_p = adv.gen_loss; r.disc_p = adv.disc_loss; break;
        case Element::kEnergy: r.L_adv_e = adv.gen_loss; r.disc_e = adv.disc_loss; break;
      }
      if (gen_grad) {
        Mlp scratch = net;
        for (std::size_t i = 0; i < inter.size(); ++i)
          detail::score_backward(net, window, inter[i].cache.out[h], 2.0 * (fake[i] - 1.0) / nf, scratch,
                                 inter[i].dout[h]);
      }
      if (disc_grad) {
        for (std::size_t i = 0; i < cat.size(); ++i)
          detail::score_backward(net, window, cat[i].target[h], 2.0 * (real[i] - 1.0) / nr, disc_grad->net(e), {});
        for (std::size_t i = 0; i < inter.size(); ++i)
          detail::score_backward(net, window, inter[i].cache.out[h], 2.0 * fake[i] / nf, disc_grad->net(e), {});
      }
    }
  }

  r.L_categorical = r.L_p + r.L_d + r.L_e;
  r.L_intermediate = r.L_adv() + r.L_p_tilde + r.L_d_tilde + r.L_e_tilde;
  r.L_total = r.L_categorical + r.L_intermediate;

  if (gen_grad) {
    for (const auto& s : cat) detail::backward_raw(p, s.cache, s.dout, *gen_grad);
    for (const auto& s : inter) detail::backward_raw(p, s.cache, s.dout, *gen_grad);
  }
  return r;
}

namespace detail {

template <typename Params>
void apply_update(Params& params, Params& grad, double lr) {
  std::vector<Tensor*> g;
  grad.for_each([&](const std::string&, Tensor& t) { g.push_back(&t); });
  std::size_t i = 0;
  params.for_each([&](const std::string&, Tensor& t) {
    const Tensor& gt = *g[i++];
    for (std::size_t j = 0; j < t.data.size(); ++j) t.data[j] -= lr * gt.data[j];
  });
}

}  // namespace detail

// One discriminator update on the summed LSGAN objectives, then one generator
// update on L_total against the updated discriminator. The report holds the
// pre-update values.
inline LossReport train_step(AdaptorParams& params, DiscriminatorParams& disc, const Batch& batch,
                             const AdaptorConfig& cfg, long step = 0) {
  auto dgrad = disc.zeros_like();
  LossReport report = evaluate_objective(params, disc, batch, cfg.use_discriminator, nullptr,
                                         cfg.use_discriminator ? &dgrad : nullptr);
  report.step = step;
  check_finite(report);
  if (cfg.use_discriminator) detail::apply_update(disc, dgrad, cfg.lr_discriminator);

  auto ggrad = params.zeros_like();
  evaluate_objective(params, disc, batch, cfg.use_discriminator, &ggrad, nullptr);
  detail::apply_update(params, ggrad, cfg.lr_generator);
  return report;
}

inline Batch resolve_batch(std::span<const UtteranceRecord> categorical, std::span<const PseudoLabel> intermediate,
                           const Vocabulary& vocab, const CorpusIndex& index) {
  Batch b;
  for (const auto& r : categorical) b.categorical.push_back(resolve(r, vocab));
  for (const auto& l : intermediate) b.intermediate.push_back(resolve(l, vocab, index));
  return b;
}

inline LossReport train_step(AdaptorParams& params, DiscriminatorParams& disc,
                             std::span<const UtteranceRecord> categorical, std::span<const PseudoLabel> intermediate,
                             const Vocabulary& vocab, const CorpusIndex& index, const AdaptorConfig& cfg,
                             long step = 0) {
  return train_step(params, disc, resolve_batch(categorical, intermediate, vocab, index), cfg, step);
}

// ---------------------------------------------------------------------------
// Finite-difference verification of the handwritten gradients.

struct GradientCheckOptions {
  bool adversarial = true;
  // Applied to the analytic gradients before comparison (mutation testing).
  std::function<void(AdaptorParams&, DiscriminatorParams&)> tamper;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
};

// Compares analytic gradients against central differences
// (f(x + eps) - f(x - eps)) / (2 eps): generator parameters against L_total,
// discriminator parameters against the summed discriminator objectives.
inline GradientCheckResult gradient_check(const AdaptorParams& params, const DiscriminatorParams& disc,
                                          const Batch& batch, double epsilon,
                                          const GradientCheckOptions& opts = {}) {
  auto ggrad = params.zeros_like();
  auto dgrad = disc.zeros_like();
  evaluate_objective(params, disc, batch, opts.adversarial, &ggrad, opts.adversarial ? &dgrad : nullptr);
  if (opts.tamper) opts.tamper(ggrad, dgrad);

  GradientCheckResult result;
  auto compare = [&](double analytic, double numeric, const std::string& name, std::size_t i) {
    if (!std::isfinite(analytic) || !std::isfinite(numeric)) throw Error("non-finite gradient at " + name);
    const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    ++result.parameters_checked;
    if (result.worst_parameter.empty() || rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = name + "[" + std::to_string(i) + "]";
    }
  };

  AdaptorParams probe = params;
  std::vector<Tensor*> gen_tensors;
  ggrad.for_each([&](const std::string&, Tensor& t) { gen_tensors.push_back(&t); });
  std::size_t ti = 0;
  probe.for_each([&](const std::string& name, Tensor& t) {
    const Tensor& g = *gen_tensors[ti++];
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + epsilon;
      const double up = evaluate_objective(probe, disc, batch, opts.adversarial, nullptr, nullptr).L_total;
      t.data[i] = saved - epsilon;
      const double down = evaluate_objective(probe, disc, batch, opts.adversarial, nullptr, nullptr).L_total;
      t.data[i] = saved;
      compare(g.data[i], (up - down) / (2.0 * epsilon), name, i);
    }
  });

  if (opts.adversarial) {
    auto disc_objective = [&](const DiscriminatorParams& d) {
      const auto r = evaluate_objective(params, d, batch, true, nullptr, nullptr);
      return r.disc_p + r.disc_d + r.disc_e;
    };
    DiscriminatorParams dprobe = disc;
    std::vector<Tensor*> disc_tensors;
    dgrad.for_each([&](const std::string&, Tensor& t) { disc_tensors.push_back(&t); });
    ti = 0;
    dprobe.for_each([&](const std::string& name, Tensor& t) {
      const Tensor& g = *disc_tensors[ti++];
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const double saved = t.data[i];
        t.data[i] = saved + epsilon;
        const double up = disc_objective(dprobe);
        t.data[i] = saved - epsilon;
        const double down = disc_objective(dprobe);
        t.data[i] = saved;
        compare(g.data[i], (up - down) / (2.0 * epsilon), name, i);
      }
    });
  }
  return result;
}

inline std::size_t parameter_count(AdaptorParams p) {
  std::size_t n = 0;
  p.for_each([&](const std::string&, Tensor& t) { n += t.data.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainingRun {
  AdaptorParams params;
  DiscriminatorParams disc;
  std::vector<LossReport> trajectory;
  long steps_done = 0;
};

// Batch for `step`: batch_size categorical items and batch_size intermediate
// items drawn with replacement from a per-step substream of cfg.seed.
inline Batch sample_batch(const std::vector<TrainingItem>& categorical, const std::vector<TrainingItem>& intermediate,
                          const AdaptorConfig& cfg, long step) {
  Rng rng = substream(cfg.seed ^ 0xb47c4ULL, static_cast<std::uint64_t>(step));
  Batch b;
  for (int i = 0; i < cfg.batch_size; ++i) b.categorical.push_back(categorical[rng.below(categorical.size())]);
  for (int i = 0; i < cfg.batch_size; ++i) b.intermediate.push_back(intermediate[rng.below(intermediate.size())]);
  return b;
}

inline void train(TrainingRun& run, const std::vector<TrainingItem>& categorical,
                  const std::vector<TrainingItem>& intermediate, const AdaptorConfig& cfg, long steps) {
  if (categorical.empty() || intermediate.empty()) throw Error("training needs categorical and intermediate data");
  for (long s = 0; s < steps; ++s) {
    const long step = run.steps_done;
    auto batch = sample_batch(categorical, intermediate, cfg, step);
    run.trajectory.push_back(train_step(run.params, run.disc, batch, cfg, step));
    ++run.steps_done;
  }
}

inline std::string format_loss_csv(const std::vector<LossReport>& trajectory, bool adversarial) {
  LossReport schema;
  schema.adversarial = adversarial;
  std::string out = "step";
  for (const auto& [name, v] : schema.fields()) out += "," + name;
  out += '\n';
  for (const auto& r : trajectory) {
    out += std::to_string(r.step);
    for (const auto& [name, v] : r.fields()) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Intensity probe: predictions conditioned on (emotion, neutral, t) compared
// against the neutral recording and the mixer's target at the same t.

struct IntensityRow {
  Emotion emotion = Emotion::kHappy;
  double lambda = 0.0;
  double mean_pitch_offset_hz = 0.0;   // mean(predicted pitch - neutral pitch)
  double mean_energy_offset = 0.0;     // mean(predicted energy - neutral energy)
  double mean_log_duration_offset = 0.0;
  double pitch_rmse_hz = 0.0;          // against mix(emotion, neutral, t)
  std::size_t phonemes = 0;
};

inline std::vector<IntensityRow> intensity_probe(const AdaptorParams& params, const Vocabulary& vocab,
                                                 const CorpusIndex& index, std::span<const double> lambdas) {
  std::vector<IntensityRow> rows;
  for (Emotion e : kAllEmotions) {
    if (e == Emotion::kNeutral) continue;
    std::vector<RecordPair> pairs;
    for (const auto& p : eligible_pairs(index))
      if (p.second->emotion == e && same_phonemes(p.first->features, p.second->features)) pairs.push_back(p);
    if (pairs.empty()) continue;
    for (double t : lambdas) {
      IntensityRow row;
      row.emotion = e;
      row.lambda = t;
      double sq = 0.0;
      for (const auto& pair : pairs) {
        const auto& neutral = pair.first->features;
        const auto target = mix(pair.second->features, neutral, t);
        const auto ids = phoneme_ids(vocab, neutral.phonemes);
        const auto pred = forward(params, ids, vocab.speaker_id(pair.first->speaker), EmotionCondition::intensity(e, t));
        for (std::size_t k = 0; k < neutral.size(); ++k) {
          row.mean_pitch_offset_hz += pred.pitch[k] - neutral.pitch[k];
          row.mean_energy_offset += pred.energy[k] - neutral.energy[k];
          row.mean_log_duration_offset += pred.log_duration[k] - std::log(neutral.duration[k] + 1.0);
          sq += (pred.pitch[k] - target.pitch[k]) * (pred.pitch[k] - target.pitch[k]);
          ++row.phonemes;
        }
      }
      const auto n = static_cast<double>(row.phonemes);
      row.mean_pitch_offset_hz /= n;
      row.mean_energy_offset /= n;
      row.mean_log_duration_offset /= n;
      row.pitch_rmse_hz = std::sqrt(sq / n);
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string format_intensity_csv(const std::vector<IntensityRow>& rows) {
  std::string out = "emotion,lambda,mean_pitch_offset_hz,mean_energy_offset,mean_log_duration_offset,pitch_rmse_hz,phonemes\n";
  for (const auto& r : rows)
    out += std::string(to_string(r.emotion)) + "," + format_double(r.lambda) + "," +
           format_double(r.mean_pitch_offset_hz) + "," + format_double(r.mean_energy_offset) + "," +
           format_double(r.mean_log_duration_offset) + "," + format_double(r.pitch_rmse_hz) + "," +
           std::to_string(r.phonemes) + "\n";
  return out;
}

}  // namespace emomix
