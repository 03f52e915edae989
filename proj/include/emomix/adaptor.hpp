#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/mixer.hpp"
#include "emomix/rng.hpp"

namespace emomix {

struct AdaptorConfig {
  int embedding_dim = 8;
  int hidden_dim = 16;
  int vocab_size = 1;
  int speaker_count = 1;
  int disc_window = 4;
  int disc_hidden = 8;
  double lr_generator = 0.05;
  double lr_discriminator = 0.05;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool use_discriminator = true;
};

inline void validate(const AdaptorConfig& c) {
  if (c.embedding_dim < 1 || c.hidden_dim < 1 || c.vocab_size < 1 || c.speaker_count < 1 ||
      c.disc_window < 1 || c.disc_hidden < 1 || c.batch_size < 1)
    throw ConfigError("adaptor dimensions must all be >= 1");
  if (!(c.lr_generator >= 0.0) || !(c.lr_discriminator >= 0.0))
    throw ConfigError("learning rates must be non-negative");
}

// Row-major dense matrix.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Tensor&) const = default;
};

// input -> tanh(hidden) -> scalar.
struct Mlp {
  Tensor w1, b1, w2, b2;

  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden) : w1(hidden, in), b1(hidden, 1), w2(1, hidden), b2(1, 1) {}

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }

  template <typename Fn>
  void for_each(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w1", w1);
    fn(prefix + ".b1", b1);
    fn(prefix + ".w2", w2);
    fn(prefix + ".b2", b2);
  }

  // Writes tanh activations into `hidden` and returns the output.
  double forward(std::span<const double> x, std::span<double> hidden) const {
    double out = b2.data[0];
    for (std::size_t h = 0; h < w1.rows; ++h) {
      double a = b1.data[h];
      const auto wr = w1.row(h);
      for (std::size_t i = 0; i < x.size(); ++i) a += wr[i] * x[i];
      hidden[h] = std::tanh(a);
      out += w2.data[h] * hidden[h];
    }
    return out;
  }

  // Accumulates d(out)*dout into `grad`; adds input gradient into `dx` if non-empty.
  void backward(std::span<const double> x, std::span<const double> hidden, double dout, Mlp& grad,
                std::span<double> dx) const {
    grad.b2.data[0] += dout;
    for (std::size_t h = 0; h < w1.rows; ++h) {
      grad.w2.data[h] += dout * hidden[h];
      const double da = dout * w2.data[h] * (1.0 - hidden[h] * hidden[h]);
      if (da == 0.0) continue;
      grad.b1.data[h] += da;
      auto gr = grad.w1.row(h);
      for (std::size_t i = 0; i < x.size(); ++i) gr[i] += da * x[i];
      if (!dx.empty()) {
        const auto wr = w1.row(h);
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] += da * wr[i];
      }
    }
  }
};

enum class Element : int { kDuration = 0, kPitch = 1, kEnergy = 2 };
inline constexpr std::array<Element, 3> kElements = {Element::kDuration, Element::kPitch, Element::kEnergy};

inline std::string_view to_string(Element e) {
  switch (e) {
    case Element::kDuration: return "duration";
    case Element::kPitch: return "pitch";
    case Element::kEnergy: return "energy";
  }
  return "?";
}

// Fixed affine map between Hz / energy units and the standardized units the
// heads operate in. Not trained.
struct Normalization {
  double pitch_mean = 0.0;
  double pitch_scale = 1.0;
  double energy_mean = 0.0;
  double energy_scale = 1.0;

  bool operator==(const Normalization&) const = default;
};

struct AdaptorParams {
  Tensor phoneme_table;
  Tensor speaker_table;
  Tensor emotion_table;
  std::array<Mlp, 3> heads;  // indexed by Element
  Normalization norm;

  Mlp& head(Element e) { return heads[static_cast<std::size_t>(e)]; }
  const Mlp& head(Element e) const { return heads[static_cast<std::size_t>(e)]; }

  std::size_t embedding_dim() const { return phoneme_table.cols; }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(std::string("phoneme_table"), phoneme_table);
    fn(std::string("speaker_table"), speaker_table);
    fn(std::string("emotion_table"), emotion_table);
    for (Element e : kElements) head(e).for_each("head." + std::string(to_string(e)), fn);
  }

  // Same shapes, all zeros. Used as a gradient accumulator.
  AdaptorParams zeros_like() const {
    AdaptorParams z = *this;
    z.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
    return z;
  }
};

struct DiscriminatorParams {
  int window = 4;
  std::array<Mlp, 3> nets;  // indexed by Element

  Mlp& net(Element e) { return nets[static_cast<std::size_t>(e)]; }
  const Mlp& net(Element e) const { return nets[static_cast<std::size_t>(e)]; }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (Element e : kElements) net(e).for_each("disc." + std::string(to_string(e)), fn);
  }

  DiscriminatorParams zeros_like() const {
    DiscriminatorParams z = *this;
    z.for_each([](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
    return z;
  }
};

namespace detail {

inline void init_uniform(Tensor& t, double fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt(fan_in);
  for (double& v : t.data) v = rng.uniform(-s, s);
}

inline void init_mlp(Mlp& m, Rng& rng) {
  const auto in = static_cast<double>(m.input_dim());
  const auto hidden = static_cast<double>(m.hidden_dim());
  init_uniform(m.w1, in, rng);
  init_uniform(m.b1, in, rng);
  init_uniform(m.w2, hidden, rng);
  init_uniform(m.b2, hidden, rng);
}

}  // namespace detail

// Embedding tables use fan_in = embedding_dim; layer weights and biases use
// the layer's input width.
inline std::pair<AdaptorParams, DiscriminatorParams> init_params(const AdaptorConfig& cfg,
                                                                 const Normalization& norm = {}) {
  validate(cfg);
  const auto dim = static_cast<std::size_t>(cfg.embedding_dim);
  const auto hidden = static_cast<std::size_t>(cfg.hidden_dim);
  AdaptorParams p;
  p.phoneme_table = Tensor(static_cast<std::size_t>(cfg.vocab_size), dim);
  p.speaker_table = Tensor(static_cast<std::size_t>(cfg.speaker_count), dim);
  p.emotion_table = Tensor(kNumEmotions, dim);
  for (auto& h : p.heads) h = Mlp(3 * dim, hidden);
  p.norm = norm;

  Rng rng(cfg.seed);
  detail::init_uniform(p.phoneme_table, static_cast<double>(dim), rng);
  detail::init_uniform(p.speaker_table, static_cast<double>(dim), rng);
  detail::init_uniform(p.emotion_table, static_cast<double>(dim), rng);
  for (auto& h : p.heads) detail::init_mlp(h, rng);

  DiscriminatorParams d;
  d.window = cfg.disc_window;
  Rng drng = substream(cfg.seed, 1);
  for (auto& n : d.nets) {
    n = Mlp(static_cast<std::size_t>(cfg.disc_window), static_cast<std::size_t>(cfg.disc_hidden));
    detail::init_mlp(n, drng);
  }
  return {std::move(p), std::move(d)};
}

// Emotion embedding used for conditioning: lambda * emb(emo_i) + (1 - lambda) * emb(emo_j).
struct EmotionCondition {
  Emotion emo_i = Emotion::kNeutral;
  Emotion emo_j = Emotion::kNeutral;
  double lambda = 1.0;

  static EmotionCondition pure(Emotion e) { return {e, e, 1.0}; }
  // Intensity t of emotion e: weight t on e and 1 - t on neutral.
  static EmotionCondition intensity(Emotion e, double t) { return {e, Emotion::kNeutral, t}; }
};

inline double position_encoding(std::size_t pos, std::size_t i, std::size_t dim) {
  const double rate = std::pow(10000.0, static_cast<double>(i - i % 2) / static_cast<double>(dim));
  const double angle = static_cast<double>(pos) / rate;
  return i % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

// Per-phoneme outputs. Duration is in the log(d + 1) domain; pitch in Hz.
struct Prediction {
  std::vector<double> log_duration;
  std::vector<double> pitch;
  std::vector<double> energy;

  std::size_t size() const { return pitch.size(); }
};

namespace detail {

// Everything backprop needs from a forward pass over one utterance.
struct ForwardCache {
  std::size_t length = 0;
  std::size_t speaker = 0;
  EmotionCondition cond;
  std::vector<int> phoneme_ids;
  std::vector<double> inputs;                // length x 3*dim
  std::array<std::vector<double>, 3> hidden;  // length x hidden, per head
  std::array<std::vector<double>, 3> out;     // raw head outputs, per head
};

inline void check_ids(const AdaptorParams& p, std::span<const int> phonemes, int speaker) {
  if (phonemes.empty()) throw Error("empty phoneme sequence");
  for (int id : phonemes)
    if (id < 0 || static_cast<std::size_t>(id) >= p.phoneme_table.rows)
      throw Error("phoneme id " + std::to_string(id) + " out of range");
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= p.speaker_table.rows)
    throw Error("speaker id " + std::to_string(speaker) + " out of range");
}

inline ForwardCache forward_raw(const AdaptorParams& p, std::span<const int> phonemes, int speaker,
                                const EmotionCondition& cond) {
  check_ids(p, phonemes, speaker);
  if (!(cond.lambda >= 0.0 && cond.lambda <= 1.0)) throw Error("conditioning lambda outside [0, 1]");
  const std::size_t dim = p.embedding_dim();
  const std::size_t in = 3 * dim;
  ForwardCache c;
  c.length = phonemes.size();
  c.speaker = static_cast<std::size_t>(speaker);
  c.cond = cond;
  c.phoneme_ids.assign(phonemes.begin(), phonemes.end());
  c.inputs.assign(c.length * in, 0.0);

  const auto ei = p.emotion_table.row(static_cast<std::size_t>(cond.emo_i));
  const auto ej = p.emotion_table.row(static_cast<std::size_t>(cond.emo_j));
  const auto spk = p.speaker_table.row(c.speaker);
  for (std::size_t k = 0; k < c.length; ++k) {
    double* x = c.inputs.data() + k * in;
    const auto ph = p.phoneme_table.row(static_cast<std::size_t>(phonemes[k]));
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = ph[i] + position_encoding(k, i, dim);
      x[dim + i] = spk[i];
      x[2 * dim + i] = cond.lambda * ei[i] + (1.0 - cond.lambda) * ej[i];
    }
  }
  for (Element e : kElements) {
    const auto h = static_cast<std::size_t>(e);
    const Mlp& net = p.head(e);
    const std::size_t hd = net.hidden_dim();
    c.hidden[h].assign(c.length * hd, 0.0);
    c.out[h].assign(c.length, 0.0);
    for (std::size_t k = 0; k < c.length; ++k)
      c.out[h][k] = net.forward({c.inputs.data() + k * in, in}, {c.hidden[h].data() + k * hd, hd});
  }
  return c;
}

// Backpropagates dL/d(raw head output) for every head into `grad`.
inline void backward_raw(const AdaptorParams& p, const ForwardCache& c,
                         const std::array<std::vector<double>, 3>& dout, AdaptorParams& grad) {
  const std::size_t dim = p.embedding_dim();
  const std::size_t in = 3 * dim;
  std::vector<double> dx(in);
  for (std::size_t k = 0; k < c.length; ++k) {
    std::fill(dx.begin(), dx.end(), 0.0);
    const std::span<const double> x{c.inputs.data() + k * in, in};
    for (Element e : kElements) {
      const auto h = static_cast<std::size_t>(e);
      const double g = dout[h][k];
      if (g == 0.0) continue;
      const std::size_t hd = p.head(e).hidden_dim();
      p.head(e).backward(x, {c.hidden[h].data() + k * hd, hd}, g, grad.head(e), dx);
    }
    auto gph = grad.phoneme_table.row(static_cast<std::size_t>(c.phoneme_ids[k]));
    auto gspk = grad.speaker_table.row(c.speaker);
    auto gei = grad.emotion_table.row(static_cast<std::size_t>(c.cond.emo_i));
    for (std::size_t i = 0; i < dim; ++i) {
      gph[i] += dx[i];
      gspk[i] += dx[dim + i];
      gei[i] += c.cond.lambda * dx[2 * dim + i];
    }
    auto gej = grad.emotion_table.row(static_cast<std::size_t>(c.cond.emo_j));
    for (std::size_t i = 0; i < dim; ++i) gej[i] += (1.0 - c.cond.lambda) * dx[2 * dim + i];
  }
}

}  // namespace detail

inline Prediction forward(const AdaptorParams& p, std::span<const int> phonemes, int speaker,
                          const EmotionCondition& cond) {
  auto c = detail::forward_raw(p, phonemes, speaker, cond);
  Prediction out;
  out.log_duration = c.out[static_cast<std::size_t>(Element::kDuration)];
  out.pitch = c.out[static_cast<std::size_t>(Element::kPitch)];
  out.energy = c.out[static_cast<std::size_t>(Element::kEnergy)];
  for (double& v : out.pitch) v = p.norm.pitch_mean + p.norm.pitch_scale * v;
  for (double& v : out.energy) v = p.norm.energy_mean + p.norm.energy_scale * v;
  return out;
}

// Frame counts implied by a log-domain duration prediction.
inline std::vector<int> predicted_frames(const Prediction& pred) {
  std::vector<int> d;
  for (double v : pred.log_duration) d.push_back(static_cast<int>(std::max(0L, std::lround(std::exp(v) - 1.0))));
  return d;
}

// Regression targets: durations in frames, pitch in Hz, energy.
struct ProsodyTarget {
  std::vector<double> pitch;
  std::vector<int> duration;
  std::vector<double> energy;

  static ProsodyTarget of(const PhonemeFeatures& f) { return {f.pitch, f.duration, f.energy}; }
  static ProsodyTarget of(const PseudoLabel& l) { return {l.pitch, l.duration, l.energy}; }
  std::size_t size() const { return pitch.size(); }
};

struct RegressionLoss {
  double duration = 0.0;
  double pitch = 0.0;
  double energy = 0.0;
};

// Mean squared errors: duration against log(d + 1); pitch and energy in the
// standardized units given by `norm` (identity by default).
inline RegressionLoss loss_regression(const Prediction& pred, const ProsodyTarget& target,
                                      const Normalization& norm = {}) {
  const std::size_t n = target.size();
  if (pred.size() != n || pred.log_duration.size() != n || pred.energy.size() != n ||
      target.duration.size() != n || target.energy.size() != n)
    throw Error("prediction and target lengths differ");
  if (n == 0) throw Error("empty target");
  RegressionLoss l;
  for (std::size_t k = 0; k < n; ++k) {
    const double dd = std::log(target.duration[k] + 1.0) - pred.log_duration[k];
    const double dp = (target.pitch[k] - pred.pitch[k]) / norm.pitch_scale;
    const double de = (target.energy[k] - pred.energy[k]) / norm.energy_scale;
    l.duration += dd * dd;
    l.pitch += dp * dp;
    l.energy += de * de;
  }
  l.duration /= static_cast<double>(n);
  l.pitch /= static_cast<double>(n);
  l.energy /= static_cast<double>(n);
  return l;
}

// ---------------------------------------------------------------------------
// Discriminators. Each scores a sequence as the mean of its MLP over sliding
// windows of width `window`; shorter sequences are extended by repeating the
// last value.

namespace detail {

inline std::vector<double> pad_to_window(std::span<const double> seq, std::size_t window) {
  std::vector<double> padded(seq.begin(), seq.end());
  while (padded.size() < window) padded.push_back(seq.back());
  return padded;
}

inline double score_sequence(const Mlp& net, std::size_t window, std::span<const double> seq) {
  if (seq.empty()) throw Error("cannot score an empty sequence");
  const auto padded = pad_to_window(seq, window);
  const std::size_t windows = padded.size() - window + 1;
  std::vector<double> hidden(net.hidden_dim());
  double acc = 0.0;
  for (std::size_t w = 0; w < windows; ++w) acc += net.forward({padded.data() + w, window}, hidden);
  return acc / static_cast<double>(windows);
}

// Gradient of dscore * score(seq) into `grad`, and into `dseq` when non-empty.
inline void score_backward(const Mlp& net, std::size_t window, std::span<const double> seq, double dscore,
                           Mlp& grad, std::span<double> dseq) {
  const auto padded = pad_to_window(seq, window);
  const std::size_t windows = padded.size() - window + 1;
  const double g = dscore / static_cast<double>(windows);
  std::vector<double> hidden(net.hidden_dim());
  std::vector<double> dpadded(dseq.empty() ? 0 : padded.size(), 0.0);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::span<const double> x{padded.data() + w, window};
    net.forward(x, hidden);
    net.backward(x, hidden, g, grad,
                 dseq.empty() ? std::span<double>{} : std::span<double>{dpadded.data() + w, window});
  }
  if (!dseq.empty()) {
    for (std::size_t i = 0; i < padded.size(); ++i) dseq[std::min(i, seq.size() - 1)] += dpadded[i];
  }
}

}  // namespace detail

// Scores a label-domain sequence. Duration sequences (frames) are mapped to
// log(d + 1) first; pitch and energy are scored as given.
inline double discriminator_score(const DiscriminatorParams& disc, Element element, std::span<const double> seq) {
  if (seq.empty()) throw Error("cannot score an empty sequence");
  if (element == Element::kDuration) {
    std::vector<double> logd(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) logd[i] = std::log(seq[i] + 1.0);
    return detail::score_sequence(disc.net(element), static_cast<std::size_t>(disc.window), logd);
  }
  return detail::score_sequence(disc.net(element), static_cast<std::size_t>(disc.window), seq);
}

struct AdversarialLoss {
  double disc_loss = 0.0;  // E[(D(real) - 1)^2] + E[D(fake)^2]
  double gen_loss = 0.0;   // E[(D(fake) - 1)^2]
};

// Least-squares GAN losses from precomputed discriminator scores.
inline AdversarialLoss lsgan_losses(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw Error("adversarial loss needs real and fake sequences");
  AdversarialLoss l;
  double real = 0.0, fake = 0.0, gen = 0.0;
  for (double s : real_scores) real += (s - 1.0) * (s - 1.0);
  for (double s : fake_scores) {
    fake += s * s;
    gen += (s - 1.0) * (s - 1.0);
  }
  l.disc_loss = real / static_cast<double>(real_scores.size()) + fake / static_cast<double>(fake_scores.size());
  l.gen_loss = gen / static_cast<double>(fake_scores.size());
  return l;
}

// Sequences are given in the discriminator's input domain.
inline AdversarialLoss loss_adversarial(const DiscriminatorParams& disc, Element element,
                                        const std::vector<std::vector<double>>& real_seqs,
                                        const std::vector<std::vector<double>>& fake_seqs) {
  if (real_seqs.empty() || fake_seqs.empty()) throw Error("adversarial loss needs real and fake sequences");
  const auto window = static_cast<std::size_t>(disc.window);
  std::vector<double> real, fake;
  for (const auto& s : real_seqs) real.push_back(detail::score_sequence(disc.net(element), window, s));
  for (const auto& s : fake_seqs) fake.push_back(detail::score_sequence(disc.net(element), window, s));
  return lsgan_losses(real, fake);
}

// One discriminator gradient-descent step on the LSGAN objective; fakes are
// constants. Returns the pre-update losses.
inline AdversarialLoss discriminator_step(DiscriminatorParams& disc, Element element,
                                          const std::vector<std::vector<double>>& real_seqs,
                                          const std::vector<std::vector<double>>& fake_seqs, double lr) {
  const auto loss = loss_adversarial(disc, element, real_seqs, fake_seqs);
  const auto window = static_cast<std::size_t>(disc.window);
  Mlp grad = disc.net(element);
  grad.for_each("", [](const std::string&, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
  const Mlp& net = disc.net(element);
  const double nr = static_cast<double>(real_seqs.size()), nf = static_cast<double>(fake_seqs.size());
  for (const auto& s : real_seqs) {
    const double score = detail::score_sequence(net, window, s);
    detail::score_backward(net, window, s, 2.0 * (score - 1.0) / nr, grad, {});
  }
  for (const auto& s : fake_seqs) {
    const double score = detail::score_sequence(net, window, s);
    detail::score_backward(net, window, s, 2.0 * score / nf, grad, {});
  }
  Mlp& target = disc.net(element);
  std::array<Tensor*, 4> dst = {&target.w1, &target.b1, &target.w2, &target.b2};
  std::array<const Tensor*, 4> src = {&grad.w1, &grad.b1, &grad.w2, &grad.b2};
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t i = 0; i < dst[t]->data.size(); ++i) dst[t]->data[i] -= lr * src[t]->data[i];
  return loss;
}

}  // namespace emomix
