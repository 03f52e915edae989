#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "emomix/error.hpp"

namespace emomix {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 22050;
};

inline bool is_supported_sample_rate(int sr) {
  return sr == 16000 || sr == 22050 || sr == 44100 || sr == 48000;
}

inline void validate(const Waveform& w) {
  if (w.samples.empty()) throw Error("waveform is empty");
  if (!is_supported_sample_rate(w.sample_rate))
    throw Error("unsupported sample rate " + std::to_string(w.sample_rate));
  for (double s : w.samples) {
    if (!std::isfinite(s) || s < -1.0 || s > 1.0)
      throw Error("waveform sample outside [-1, 1]");
  }
}

namespace detail {

inline std::uint32_t read_le(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void put_le(std::vector<unsigned char>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// Decodes an in-memory RIFF/WAVE image. Multi-channel audio is downmixed by
// averaging; integer PCM is scaled by the type's maximum magnitude
// (128, 32768, 8388608).
inline Waveform decode_wav(std::span<const unsigned char> bytes) {
  using detail::read_le;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error("not a RIFF/WAVE file");

  int format = 0, channels = 0, bits = 0;
  long rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::size_t size = read_le(chunk + 4, 4);
    std::size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > avail) throw Error("truncated fmt chunk");
      format = static_cast<int>(read_le(chunk + 8, 2));
      channels = static_cast<int>(read_le(chunk + 10, 2));
      rate = static_cast<long>(read_le(chunk + 12, 4));
      bits = static_cast<int>(read_le(chunk + 22, 2));
      if (format == 0xFFFE) {
        if (size < 40) throw Error("truncated WAVE_FORMAT_EXTENSIBLE header");
        format = static_cast<int>(read_le(chunk + 8 + 24, 2));
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min(size, avail);
    }
    pos += 8 + size + (size & 1);
  }
  if (format == 0) throw Error("missing fmt chunk");
  if (data == nullptr) throw Error("missing data chunk");
  if (channels < 1) throw Error("invalid channel count");

  const bool pcm = format == 1 && (bits == 8 || bits == 16 || bits == 24);
  const bool flt = format == 3 && bits == 32;
  if (!pcm && !flt)
    throw Error("unsupported codec (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits)");
  if (!is_supported_sample_rate(static_cast<int>(rate)))
    throw Error("unsupported sample rate " + std::to_string(rate));

  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t frame_bytes = width * static_cast<std::size_t>(channels);
  const std::size_t frames = data_size / frame_bytes;

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * frame_bytes + static_cast<std::size_t>(c) * width;
      double v = 0.0;
      switch (bits) {
        case 8:
          v = (static_cast<int>(p[0]) - 128) / 128.0;
          break;
        case 16:
          v = static_cast<std::int16_t>(read_le(p, 2)) / 32768.0;
          break;
        case 24: {
          std::int32_t s = static_cast<std::int32_t>(read_le(p, 3) << 8) >> 8;
          v = s / 8388608.0;
          break;
        }
        case 32: {
          std::uint32_t u = read_le(p, 4);
          float fv;
          std::memcpy(&fv, &u, 4);
          v = fv;
          break;
        }
      }
      acc += v;
    }
    w.samples[f] = acc / channels;
  }
  validate(w);
  return w;
}

inline Waveform load_waveform(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// 16-bit mono PCM encoding. Samples are clipped to [-1, 1] and scaled by 32767.
inline std::vector<unsigned char> encode_wav16(const Waveform& w) {
  using detail::put_le;
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_le(out, 36 + 2 * n, 4);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_le(out, 16, 4);
  put_le(out, 1, 2);
  put_le(out, 1, 2);
  put_le(out, static_cast<std::uint32_t>(w.sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(w.sample_rate) * 2, 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_le(out, 2 * n, 4);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_le(out, static_cast<std::uint16_t>(v), 2);
  }
  return out;
}

inline void save_waveform(const Waveform& w, const std::filesystem::path& path) {
  auto bytes = encode_wav16(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace emomix
