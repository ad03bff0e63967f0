#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "dmtn/scorers.hpp"

namespace dmtn {

enum class ModelKind { kDmn, kDmtn, kMemN2N };

ModelKind parse_model(std::string_view name);
std::string to_string(ModelKind kind);

/// Architecture and training settings. Defaults follow the published DMTN setup
/// (hidden 40, 40 slices, 5 hops, embedding 50, 150 epochs, L2 1e-4, no dropout);
/// learning rate, batch size and clipping are not given there.
struct ModelConfig {
  ModelKind model = ModelKind::kDmtn;
  nn::ScorerKind scorer = nn::ScorerKind::kNtn2;
  std::size_t hidden = 40;
  std::size_t slices = 40;
  std::size_t hops = 5;
  std::size_t embed = 50;
  std::size_t gate_hidden = 0;  // DMN gate width; 0 means `hidden`
  std::size_t epochs = 150;
  double l2 = 1e-4;
  double dropout = 0.0;
  double lr = 1e-3;
  std::size_t batch = 32;
  double clip_norm = 40.0;  // global gradient norm; 0 disables clipping
  bool tied = true;         // MemN2N adjacent weight tying
  std::uint64_t seed = 1;

  std::size_t effective_gate_hidden() const { return gate_hidden ? gate_hidden : hidden; }

  /// Throws ConfigError on an inconsistent or out-of-range setting.
  void validate() const;

  /// Flat key=value form used by config files and checkpoints.
  std::map<std::string, std::string> to_map() const;
  /// Applies known keys over the current values; unknown keys are a ConfigError.
  void apply(const std::map<std::string, std::string>& values);
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Flat `key=value` lines; blank lines and `#` comments are skipped, whitespace
/// around keys and values is trimmed.
std::map<std::string, std::string> parse_key_values(std::string_view text);

}  // namespace dmtn
