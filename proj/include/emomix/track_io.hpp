#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "emomix/error.hpp"
#include "emomix/features.hpp"

namespace emomix {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(std::string("malformed ") + what + ": '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a sibling temp file and renames it into place, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Columnar text format:
//
//   # emomix-track sample_rate=<Hz> hop_length=<samples>
//   # index<TAB>f0<TAB>voiced<TAB>energy
//   0<TAB>219.87<TAB>1<TAB>3.25
//   ...

inline std::string format_track_table(const F0Track& f0, const EnergyTrack& energy) {
  if (f0.size() != energy.size() || f0.hop_length != energy.hop_length ||
      f0.sample_rate != energy.sample_rate)
    throw Error("F0 and energy tracks are not frame-parallel");
  std::ostringstream out;
  out << "# emomix-track sample_rate=" << f0.sample_rate << " hop_length=" << f0.hop_length << "\n";
  out << "# index\tf0\tvoiced\tenergy\n";
  for (std::size_t i = 0; i < f0.size(); ++i)
    out << i << '\t' << format_double(f0.values[i]) << '\t' << (f0.voiced[i] ? 1 : 0) << '\t'
        << format_double(energy.values[i]) << '\n';
  return out.str();
}

inline std::pair<F0Track, EnergyTrack> parse_track_table(const std::string& text) {
  F0Track f0;
  EnergyTrack energy;
  bool have_header = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      int sr = 0, hop = 0;
      if (std::sscanf(line.c_str(), "# emomix-track sample_rate=%d hop_length=%d", &sr, &hop) == 2) {
        f0.sample_rate = energy.sample_rate = sr;
        f0.hop_length = energy.hop_length = hop;
        have_header = true;
      }
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw Error("malformed track line: '" + line + "'");
    if (static_cast<std::size_t>(parse_double(cols[0], "frame index")) != f0.size())
      throw Error("track frame indices are not consecutive");
    const double v = parse_double(cols[1], "f0");
    const bool voiced = cols[2] == "1";
    if (!voiced && cols[2] != "0") throw Error("malformed voiced flag: '" + cols[2] + "'");
    if (voiced != (v > 0.0)) throw Error("voiced flag inconsistent with f0 value");
    f0.values.push_back(v);
    f0.voiced.push_back(voiced);
    energy.values.push_back(parse_double(cols[3], "energy"));
  }
  if (!have_header) throw Error("track table lacks emomix-track header");
  return {std::move(f0), std::move(energy)};
}

// ---------------------------------------------------------------------------
// Binary container, little-endian throughout:
//
//   bytes 0..3   magic "IMX1"
//   bytes 4..5   version (u16, currently 1)
//   bytes 6..7   track type (u16): 1 = F0, 2 = energy, 3 = mel cepstra
//   bytes 8..11  frame count (u32)
//   bytes 12..15 values per frame (u32)
//   then u32 sample_rate, u32 hop_length, then frames * width f64 values.
//   F0 frames hold (f0, voiced ? 1 : 0).

enum class TrackType : std::uint16_t { kF0 = 1, kEnergy = 2, kMelCepstra = 3 };

inline constexpr std::uint16_t kTrackContainerVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t uint(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  double f64() {
    std::uint64_t bits = uint(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("truncated binary container");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline std::string encode_container(TrackType type, const std::vector<std::vector<double>>& frames,
                                    std::size_t width, int sample_rate, int hop_length) {
  std::string out = "IMX1";
  put_u16(out, kTrackContainerVersion);
  put_u16(out, static_cast<std::uint16_t>(type));
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(hop_length));
  for (const auto& f : frames) {
    if (f.size() != width) throw Error("ragged frames in track container");
    for (double v : f) put_f64(out, v);
  }
  return out;
}

struct DecodedContainer {
  TrackType type;
  int sample_rate;
  int hop_length;
  std::size_t width;
  std::vector<std::vector<double>> frames;
};

inline DecodedContainer decode_container(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "IMX1") throw Error("bad container magic");
  if (r.uint(2) != kTrackContainerVersion) throw Error("unsupported container version");
  DecodedContainer c;
  c.type = static_cast<TrackType>(r.uint(2));
  const auto frames = static_cast<std::size_t>(r.uint(4));
  c.width = static_cast<std::size_t>(r.uint(4));
  c.sample_rate = static_cast<int>(r.uint(4));
  c.hop_length = static_cast<int>(r.uint(4));
  c.frames.assign(frames, std::vector<double>(c.width));
  for (auto& f : c.frames)
    for (auto& v : f) v = r.f64();
  if (!r.done()) throw Error("trailing bytes in container");
  return c;
}

}  // namespace detail

inline std::string encode_track(const F0Track& t) {
  std::vector<std::vector<double>> frames(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) frames[i] = {t.values[i], t.voiced[i] ? 1.0 : 0.0};
  return detail::encode_container(TrackType::kF0, frames, 2, t.sample_rate, t.hop_length);
}

inline std::string encode_track(const EnergyTrack& t) {
  std::vector<std::vector<double>> frames(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) frames[i] = {t.values[i]};
  return detail::encode_container(TrackType::kEnergy, frames, 1, t.sample_rate, t.hop_length);
}

inline std::string encode_track(const MelCepstraTrack& t) {
  return detail::encode_container(TrackType::kMelCepstra, t.frames, t.order(), t.sample_rate,
                                  t.hop_length);
}

inline F0Track decode_f0_track(const std::string& bytes) {
  auto c = detail::decode_container(bytes);
  if (c.type != TrackType::kF0 || c.width != 2) throw Error("container does not hold an F0 track");
  F0Track t;
  t.sample_rate = c.sample_rate;
  t.hop_length = c.hop_length;
  for (const auto& f : c.frames) {
    t.values.push_back(f[0]);
    t.voiced.push_back(f[1] != 0.0);
  }
  return t;
}

inline EnergyTrack decode_energy_track(const std::string& bytes) {
  auto c = detail::decode_container(bytes);
  if (c.type != TrackType::kEnergy || c.width != 1) throw Error("container does not hold an energy track");
  EnergyTrack t;
  t.sample_rate = c.sample_rate;
  t.hop_length = c.hop_length;
  for (const auto& f : c.frames) t.values.push_back(f[0]);
  return t;
}

inline MelCepstraTrack decode_mel_cepstra_track(const std::string& bytes) {
  auto c = detail::decode_container(bytes);
  if (c.type != TrackType::kMelCepstra) throw Error("container does not hold a mel-cepstra track");
  MelCepstraTrack t;
  t.sample_rate = c.sample_rate;
  t.hop_length = c.hop_length;
  t.frames = std::move(c.frames);
  return t;
}

}  // namespace emomix
