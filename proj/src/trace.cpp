#include "dmtn/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "dmtn/errors.hpp"
#include "dmtn/model.hpp"

namespace dmtn {

TraceRecord make_trace(const babi::Story& story, const babi::QASample& qa,
                       const babi::Vocabulary& vocab, const ParameterStore& params,
                       const ModelConfig& cfg) {
  const babi::EncodedSample sample = babi::encode_sample(story, qa, vocab);
  const Prediction p = predict(sample, params, cfg);
  TraceRecord r;
  r.question = babi::join(qa.question);
  r.predicted = vocab.token(p.answer);
  r.gold = qa.answer;
  for (std::size_t idx : qa.context) r.facts.push_back(babi::join(story.sentences[idx].tokens));
  r.gates = p.trace;
  return r;
}

std::string render_trace_csv(const TraceRecord& record) {
  const nn::GateTrace& g = record.gates;
  if (g.values.size() != g.hops * g.facts) throw DimensionError("trace: value count does not match hops x facts");
  std::string out;
  out += "# question: " + record.question + "\n";
  out += "# predicted: " + record.predicted + "\n";
  out += "# gold: " + record.gold + "\n";
  for (std::size_t t = 0; t < record.facts.size(); ++t) {
    out += "# fact_" + std::to_string(t + 1) + ": " + record.facts[t] + "\n";
  }
  for (std::size_t t = 0; t < g.facts; ++t) {
    if (t) out += ',';
    out += "fact_" + std::to_string(t + 1);
  }
  out += '\n';
  char buf[32];
  for (std::size_t h = 0; h < g.hops; ++h) {
    for (std::size_t t = 0; t < g.facts; ++t) {
      const double v = std::clamp(g.at(h, t), 1e-6, 1.0 - 1e-6);
      std::snprintf(buf, sizeof buf, "%.6f", v);
      if (t) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const TraceRecord& record) {
  const std::string text = render_trace_csv(record);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dmtn
