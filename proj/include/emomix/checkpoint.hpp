#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emomix/adaptor.hpp"
#include "emomix/error.hpp"
#include "emomix/track_io.hpp"
#include "emomix/training.hpp"

namespace emomix {

// Binary checkpoint, little-endian:
//   "IMXC", u16 version, u16 reserved,
//   config (u32 embedding_dim, hidden_dim, vocab_size, speaker_count,
//           disc_window, disc_hidden, batch_size; u64 seed; u32 use_discriminator;
//           f64 lr_generator, lr_discriminator),
//   normalization (4 x f64), i64 step,
//   vocabulary (u32 count, then u32 length + bytes per symbol) for phonemes then speakers,
//   u32 tensor count, then per tensor: u32 name length + name, u32 rows, u32 cols, rows*cols f64.
struct Checkpoint {
  AdaptorConfig config;
  Vocabulary vocab;
  AdaptorParams params;
  DiscriminatorParams disc;
  long step = 0;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void put_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

inline std::string get_string(ByteReader& r) { return r.bytes(static_cast<std::size_t>(r.uint(4))); }

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline std::string encode_checkpoint(Checkpoint ck) {
  using namespace detail;
  std::string out = "IMXC";
  put_u16(out, kCheckpointVersion);
  put_u16(out, 0);
  const auto& c = ck.config;
  for (int v : {c.embedding_dim, c.hidden_dim, c.vocab_size, c.speaker_count, c.disc_window, c.disc_hidden,
                c.batch_size})
    put_u32(out, static_cast<std::uint32_t>(v));
  put_u64(out, c.seed);
  put_u32(out, c.use_discriminator ? 1 : 0);
  put_f64(out, c.lr_generator);
  put_f64(out, c.lr_discriminator);
  const auto& n = ck.params.norm;
  for (double v : {n.pitch_mean, n.pitch_scale, n.energy_mean, n.energy_scale}) put_f64(out, v);
  put_u64(out, static_cast<std::uint64_t>(ck.step));
  for (const auto* table : {&ck.vocab.phonemes, &ck.vocab.speakers}) {
    put_u32(out, static_cast<std::uint32_t>(table->size()));
    for (const auto& s : *table) put_string(out, s);
  }
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  ck.params.for_each([&](const std::string& name, Tensor& t) { tensors.emplace_back(name, &t); });
  ck.disc.for_each([&](const std::string& name, Tensor& t) { tensors.emplace_back(name, &t); });
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t->rows));
    put_u32(out, static_cast<std::uint32_t>(t->cols));
    for (double v : t->data) put_f64(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  using namespace detail;
  ByteReader r(bytes);
  if (r.bytes(4) != "IMXC") throw Error("bad checkpoint magic");
  if (r.uint(2) != kCheckpointVersion) throw Error("unsupported checkpoint version");
  r.uint(2);
  Checkpoint ck;
  auto& c = ck.config;
  for (int* v : {&c.embedding_dim, &c.hidden_dim, &c.vocab_size, &c.speaker_count, &c.disc_window, &c.disc_hidden,
                 &c.batch_size})
    *v = static_cast<int>(r.uint(4));
  c.seed = r.uint(8);
  c.use_discriminator = r.uint(4) != 0;
  c.lr_generator = r.f64();
  c.lr_discriminator = r.f64();
  Normalization norm;
  for (double* v : {&norm.pitch_mean, &norm.pitch_scale, &norm.energy_mean, &norm.energy_scale}) *v = r.f64();
  ck.step = static_cast<long>(r.uint(8));
  for (auto* table : {&ck.vocab.phonemes, &ck.vocab.speakers}) {
    const auto count = r.uint(4);
    for (std::uint64_t i = 0; i < count; ++i) table->push_back(get_string(r));
  }

  // Shapes come from the config; stored shapes must agree.
  auto [params, disc] = init_params(c, norm);
  std::vector<std::pair<std::string, Tensor*>> tensors;
  params.for_each([&](const std::string& name, Tensor& t) { tensors.emplace_back(name, &t); });
  disc.for_each([&](const std::string& name, Tensor& t) { tensors.emplace_back(name, &t); });
  if (r.uint(4) != tensors.size()) throw Error("checkpoint tensor count mismatch");
  for (auto& [name, t] : tensors) {
    if (get_string(r) != name) throw Error("checkpoint tensor order mismatch at " + name);
    const auto rows = r.uint(4), cols = r.uint(4);
    if (rows != t->rows || cols != t->cols) throw Error("checkpoint tensor shape mismatch at " + name);
    for (double& v : t->data) v = r.f64();
  }
  if (!r.done()) throw Error("trailing bytes in checkpoint");
  ck.params = std::move(params);
  ck.disc = std::move(disc);
  return ck;
}

}  // namespace emomix
