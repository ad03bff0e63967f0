#include "dmtn/config.hpp"

#include <charconv>
#include <sstream>

#include "dmtn/errors.hpp"

namespace dmtn {

ModelKind parse_model(std::string_view name) {
  if (name == "dmn") return ModelKind::kDmn;
  if (name == "dmtn") return ModelKind::kDmtn;
  if (name == "memn2n") return ModelKind::kMemN2N;
  throw ConfigError("unknown model '" + std::string(name) + "' (expected dmn, dmtn or memn2n)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDmn: return "dmn";
    case ModelKind::kDmtn: return "dmtn";
    case ModelKind::kMemN2N: return "memn2n";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(hidden, "hidden");
  positive(hops, "hops");
  positive(embed, "embed");
  positive(batch, "batch");
  if (model != ModelKind::kMemN2N && scorer != nn::ScorerKind::kDmn) positive(slices, "slices");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  if (model == ModelKind::kDmn && scorer != nn::ScorerKind::kDmn) {
    throw ConfigError("model 'dmn' uses the dmn scorer, got '" + nn::to_string(scorer) + "'");
  }
  if (model == ModelKind::kDmtn && scorer == nn::ScorerKind::kDmn) {
    throw ConfigError("model 'dmtn' needs a tensor scorer (ntn2, ntn3 or xntn)");
  }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {
      {"model", to_string(model)},
      {"scorer", nn::to_string(scorer)},
      {"hidden", std::to_string(hidden)},
      {"slices", std::to_string(slices)},
      {"hops", std::to_string(hops)},
      {"embed", std::to_string(embed)},
      {"gate_hidden", std::to_string(gate_hidden)},
      {"epochs", std::to_string(epochs)},
      {"l2", num(l2)},
      {"dropout", num(dropout)},
      {"lr", num(lr)},
      {"batch", std::to_string(batch)},
      {"clip_norm", num(clip_norm)},
      {"tied", tied ? "true" : "false"},
      {"seed", std::to_string(seed)},
  };
}

namespace {

template <typename T>
T parse_integer(const std::string& key, const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("bad integer for '" + key + "': '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad number for '" + key + "': '" + s + "'");
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + s + "'");
}

}  // namespace

void ModelConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) {
    if (k == "model") model = parse_model(v);
    else if (k == "scorer") scorer = nn::parse_scorer(v);
    else if (k == "hidden") hidden = parse_integer<std::size_t>(k, v);
    else if (k == "slices") slices = parse_integer<std::size_t>(k, v);
    else if (k == "hops") hops = parse_integer<std::size_t>(k, v);
    else if (k == "embed") embed = parse_integer<std::size_t>(k, v);
    else if (k == "gate_hidden") gate_hidden = parse_integer<std::size_t>(k, v);
    else if (k == "epochs") epochs = parse_integer<std::size_t>(k, v);
    else if (k == "l2") l2 = parse_real(k, v);
    else if (k == "dropout") dropout = parse_real(k, v);
    else if (k == "lr") lr = parse_real(k, v);
    else if (k == "batch") batch = parse_integer<std::size_t>(k, v);
    else if (k == "clip_norm") clip_norm = parse_real(k, v);
    else if (k == "tied") tied = parse_bool(k, v);
    else if (k == "seed") seed = parse_integer<std::uint64_t>(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
}

std::string ModelConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + "=" + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::map<std::string, std::string> values;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key in '" + line + "'");
    values[key] = trim(line.substr(eq + 1));
  }
  return values;
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig cfg;
  cfg.apply(parse_key_values(text));
  return cfg;
}

}  // namespace dmtn
