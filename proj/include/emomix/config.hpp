#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emomix/adaptor.hpp"
#include "emomix/error.hpp"
#include "emomix/features.hpp"
#include "emomix/mixer.hpp"
#include "emomix/track_io.hpp"

namespace emomix {

struct MixerSettings {
  LambdaDistribution distribution = LambdaDistribution::kBeta;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
};

struct ToolConfig {
  AnalysisConfig analysis;
  MixerSettings mixer;
  AdaptorConfig adaptor;
  long train_steps = 2000;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(v, &used));
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError("invalid value for " + key + ": '" + v + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ConfigError("invalid value for " + key + ": '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

using Setter = std::function<void(ToolConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = [] {
    std::map<std::string, Setter> s;
    auto add = [&](const std::string& key, auto member) {
      s[key] = [member, key](ToolConfig& c, const std::string& v) {
        auto& field = member(c);
        field = parse_number<std::remove_reference_t<decltype(field)>>(key, v);
      };
    };
    add("analysis.frame_length", [](ToolConfig& c) -> int& { return c.analysis.frame_length; });
    add("analysis.hop_length", [](ToolConfig& c) -> int& { return c.analysis.hop_length; });
    add("analysis.f0_min", [](ToolConfig& c) -> double& { return c.analysis.f0_min; });
    add("analysis.f0_max", [](ToolConfig& c) -> double& { return c.analysis.f0_max; });
    add("analysis.yin_threshold", [](ToolConfig& c) -> double& { return c.analysis.yin_threshold; });
    add("analysis.n_mels", [](ToolConfig& c) -> int& { return c.analysis.n_mels; });
    add("analysis.n_cepstra", [](ToolConfig& c) -> int& { return c.analysis.n_cepstra; });
    add("mixer.count", [](ToolConfig& c) -> std::size_t& { return c.mixer.count; });
    add("mixer.seed", [](ToolConfig& c) -> std::uint64_t& { return c.mixer.seed; });
    add("adaptor.embedding_dim", [](ToolConfig& c) -> int& { return c.adaptor.embedding_dim; });
    add("adaptor.hidden_dim", [](ToolConfig& c) -> int& { return c.adaptor.hidden_dim; });
    add("adaptor.disc_window", [](ToolConfig& c) -> int& { return c.adaptor.disc_window; });
    add("adaptor.disc_hidden", [](ToolConfig& c) -> int& { return c.adaptor.disc_hidden; });
    add("adaptor.lr_generator", [](ToolConfig& c) -> double& { return c.adaptor.lr_generator; });
    add("adaptor.lr_discriminator", [](ToolConfig& c) -> double& { return c.adaptor.lr_discriminator; });
    add("adaptor.batch_size", [](ToolConfig& c) -> int& { return c.adaptor.batch_size; });
    add("adaptor.seed", [](ToolConfig& c) -> std::uint64_t& { return c.adaptor.seed; });
    add("train.steps", [](ToolConfig& c) -> long& { return c.train_steps; });
    s["mixer.distribution"] = [](ToolConfig& c, const std::string& v) {
      c.mixer.distribution = parse_lambda_distribution(v);
    };
    s["adaptor.use_discriminator"] = [](ToolConfig& c, const std::string& v) {
      c.adaptor.use_discriminator = parse_bool("adaptor.use_discriminator", v);
    };
    return s;
  }();
  return setters;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : detail::config_setters()) keys.push_back(k);
  return keys;
}

inline void set_config_value(ToolConfig& cfg, const std::string& key, const std::string& value) {
  const auto& setters = detail::config_setters();
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(cfg, value);
}

// Flat `section.key = value` lines; '#' starts a comment line.
inline void apply_config_text(ToolConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " lacks '=': '" + line + "'");
    set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void validate(const ToolConfig& cfg) {
  if (cfg.analysis.frame_length < 2 || cfg.analysis.hop_length < 1 ||
      cfg.analysis.hop_length > cfg.analysis.frame_length)
    throw ConfigError("analysis frame/hop lengths are invalid");
  if (cfg.analysis.n_cepstra < 1 || cfg.analysis.n_cepstra > cfg.analysis.n_mels)
    throw ConfigError("analysis.n_cepstra must lie in [1, n_mels]");
  if (!(cfg.analysis.yin_threshold > 0.0 && cfg.analysis.yin_threshold < 1.0))
    throw ConfigError("analysis.yin_threshold must lie in (0, 1)");
  if (!(cfg.analysis.f0_min > 0.0 && cfg.analysis.f0_min < cfg.analysis.f0_max))
    throw ConfigError("analysis f0 band is invalid");
  if (cfg.mixer.count < 1) throw ConfigError("mixer.count must be >= 1");
  if (cfg.train_steps < 0) throw ConfigError("train.steps must be >= 0");
  AdaptorConfig a = cfg.adaptor;
  a.vocab_size = a.speaker_count = 1;
  validate(a);
}

}  // namespace emomix
