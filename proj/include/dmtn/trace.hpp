#pragma once

// Gate trace CSV:
//   # question: <tokens>
//   # predicted: <answer>
//   # gold: <answer>
//   # fact_<t>: <sentence>        one line per fact
//   fact_1,...,fact_T
//   <hop 1 gates>                 one row per hop, 6 decimals
//   ...

#include <filesystem>
#include <string>
#include <vector>

#include "dmtn/babi.hpp"
#include "dmtn/config.hpp"
#include "dmtn/episodic.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn {

struct TraceRecord {
  std::string question;
  std::string predicted;
  std::string gold;
  std::vector<std::string> facts;
  nn::GateTrace gates;
};

TraceRecord make_trace(const babi::Story& story, const babi::QASample& qa,
                       const babi::Vocabulary& vocab, const ParameterStore& params,
                       const ModelConfig& cfg);

/// Values that would print as exactly 0 or 1 at 6 decimals are shown as
/// 0.000001 / 0.999999 so every printed gate stays inside (0, 1).
std::string render_trace_csv(const TraceRecord& record);

void write_trace_csv(const std::filesystem::path& path, const TraceRecord& record);

}  // namespace dmtn
