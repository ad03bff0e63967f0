// dmtn: train, evaluate and inspect episodic-memory QA models on bAbI.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmtn/babi.hpp"
#include "dmtn/checkpoint.hpp"
#include "dmtn/checks.hpp"
#include "dmtn/config.hpp"
#include "dmtn/errors.hpp"
#include "dmtn/gru.hpp"
#include "dmtn/model.hpp"
#include "dmtn/trace.hpp"
#include "dmtn/train.hpp"

namespace fs = std::filesystem;
using namespace dmtn;

namespace {

constexpr const char* kDataEnv = "BABI_DATA_ROOT";
constexpr std::size_t kMemN2NDefaultHops = 3;

// Model flags, kept as strings so "given on the command line" is observable.
struct ModelFlags {
  std::map<std::string, std::string> given;
  CLI::App* app = nullptr;

  void add(CLI::App& sub) {
    app = &sub;
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
      sub.add_option_function<std::string>(flag, [this, key](const std::string& v) { given[key] = v; }, help);
    };
    opt("--model", "model", "dmn | dmtn | memn2n");
    opt("--scorer", "scorer", "dmn | ntn2 | ntn3 | xntn");
    opt("--hops", "hops", "memory hops (5; MemN2N 3)");
    opt("--hidden", "hidden", "hidden size d (40)");
    opt("--slices", "slices", "tensor slices k (40)");
    opt("--embed", "embed", "embedding size (50)");
    opt("--gate-hidden", "gate_hidden", "DMN gate hidden size (0 = hidden)");
    opt("--epochs", "epochs", "training epochs (150)");
    opt("--l2", "l2", "L2 coefficient on weights (1e-4)");
    opt("--dropout", "dropout", "inverted dropout on facts (0)");
    opt("--lr", "lr", "Adam learning rate (1e-3)");
    opt("--batch", "batch", "minibatch size (32)");
    opt("--clip-norm", "clip_norm", "global gradient norm clip, 0 = off (40)");
    opt("--tied", "tied", "MemN2N adjacent weight tying (true)");
    opt("--seed", "seed", "RNG seed (1)");
  }

  ModelConfig resolve(const std::string& config_file, std::map<std::string, std::string>& extra) const {
    std::map<std::string, std::string> values;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw IoError("cannot read config file " + config_file);
      std::stringstream ss;
      ss << in.rdbuf();
      values = parse_key_values(ss.str());
    }
    for (const auto& [k, v] : given) values[k] = v;
    // Harness keys may live in the same file.
    for (const char* key : {"data", "task", "out"}) {
      if (auto it = values.find(key); it != values.end()) {
        if (!extra.count(key)) extra[key] = it->second;
        values.erase(it);
      }
    }
    ModelConfig cfg;
    cfg.apply(values);
    if (cfg.model == ModelKind::kMemN2N && !values.count("hops")) cfg.hops = kMemN2NDefaultHops;
    if (cfg.model == ModelKind::kDmn && !values.count("scorer")) cfg.scorer = nn::ScorerKind::kDmn;
    cfg.validate();
    return cfg;
  }
};

std::vector<int> parse_tasks(const std::string& text) {
  std::vector<int> tasks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const int t = std::stoi(part, &used);
      if (used != part.size() || t < 1 || t > 20) throw std::invalid_argument(part);
      tasks.push_back(t);
    } catch (const std::exception&) {
      throw ArgumentError("bad task '" + part + "' (expected 1..20)");
    }
  }
  if (tasks.empty()) throw ArgumentError("no task given");
  return tasks;
}

std::string data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kDataEnv); env && *env) return env;
  throw ArgumentError(std::string("no data root: pass --data or set ") + kDataEnv);
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"task", r.task}, {"count", r.count}, {"correct", r.correct}, {"accuracy", r.accuracy}, {"passed", r.passed}};
}

bool log_epoch(const EpochStats& s, const ParameterStore&) {
  std::fprintf(stderr, "epoch %zu step %zu loss %.6f train_acc %.2f\n", s.epoch, s.step, s.loss, s.accuracy);
  return true;
}

int cmd_train(const ModelFlags& flags, const std::string& config_file, std::string data, std::string task_list,
              std::string out, const std::string& embeddings, std::size_t max_steps) {
  std::map<std::string, std::string> extra;
  if (!data.empty()) extra["data"] = data;
  if (!task_list.empty()) extra["task"] = task_list;
  if (!out.empty()) extra["out"] = out;
  const ModelConfig cfg = flags.resolve(config_file, extra);
  if (!extra.count("out")) throw ArgumentError("train needs --out");
  if (!extra.count("task")) throw ArgumentError("train needs --task");
  const std::string root = data_root(extra.count("data") ? extra["data"] : "");
  const std::vector<int> tasks = parse_tasks(extra["task"]);

  std::vector<babi::TaskData> loaded;
  std::vector<babi::Story> all_train, all_test;
  for (int t : tasks) {
    loaded.push_back(babi::load_task(root, t));
    all_train.insert(all_train.end(), loaded.back().train.begin(), loaded.back().train.end());
    all_test.insert(all_test.end(), loaded.back().test.begin(), loaded.back().test.end());
  }
  const babi::Vocabulary vocab = babi::build_vocabulary(all_train, all_test);
  const auto corpus = babi::encode_all(all_train, vocab);
  std::fprintf(stderr, "config: %s; %zu training samples, vocabulary %zu\n", cfg.to_text().c_str(), corpus.size(),
               vocab.size());

  ParameterStore params = init_parameters(cfg, vocab.size());
  if (!embeddings.empty()) {
    if (cfg.model == ModelKind::kMemN2N) throw ArgumentError("--embeddings applies to dmn/dmtn models only");
    const std::size_t rows = nn::load_pretrained_embeddings(embeddings, vocab, params.get("embed"));
    std::fprintf(stderr, "loaded %zu pretrained embedding rows\n", rows);
  }
  TrainOptions options;
  options.max_steps = max_steps;
  options.on_epoch = log_epoch;
  TrainResult result = train(cfg, corpus, std::move(params), options);
  save_checkpoint(extra["out"], Checkpoint{cfg, vocab, result.params});
  for (const auto& td : loaded) {
    const auto test = babi::encode_all(td.test, vocab);
    std::cout << to_json(evaluate(td.task, test, result.params, cfg)).dump() << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& task_list, bool on_train) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const std::string root = data_root(data);
  bool all_passed = true;
  for (int t : parse_tasks(task_list)) {
    const babi::TaskData td = babi::load_task(root, t);
    const auto samples = babi::encode_all(on_train ? td.train : td.test, ckpt.vocab);
    const EvalReport r = evaluate(t, samples, ckpt.params, ckpt.config);
    all_passed = all_passed && r.passed;
    std::cout << to_json(r).dump() << std::endl;
  }
  return all_passed ? 0 : 1;
}

int cmd_inspect(const std::string& ckpt_path, const std::string& data, int task, std::size_t index, bool on_train,
                const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const babi::TaskData td = babi::load_task(data_root(data), task);
  const auto& stories = on_train ? td.train : td.test;
  const auto refs = babi::sample_refs(stories);
  if (index >= refs.size()) {
    throw ArgumentError("index " + std::to_string(index) + " out of range (" + std::to_string(refs.size()) +
                        " samples)");
  }
  const babi::Story& story = stories[refs[index].story];
  const TraceRecord record = make_trace(story, story.qas[refs[index].qa], ckpt.vocab, ckpt.params, ckpt.config);
  if (out.empty() || out == "-") {
    std::cout << render_trace_csv(record);
  } else {
    write_trace_csv(out, record);
  }
  return 0;
}

int cmd_gradcheck(const std::string& scorer_name, bool three_way, const std::string& target, double eps,
                  std::uint64_t seed) {
  nn::ScorerKind kind = nn::parse_scorer(scorer_name);
  if (three_way) {
    if (kind != nn::ScorerKind::kNtn2 && kind != nn::ScorerKind::kNtn3) {
      throw ConfigError("--three-way applies to the ntn scorers only");
    }
    kind = nn::ScorerKind::kNtn3;
  }
  const GradCheckResult r = checks::run(target, kind, seed, eps);
  const bool ok = r.max_rel_error <= checks::kTolerance;
  std::printf("%s %s max_rel_error=%.3e worst=%s[%zu] analytic=%.9g numeric=%.9g entries=%zu %s\n", target.c_str(),
              nn::to_string(kind).c_str(), r.max_rel_error, r.worst_parameter.c_str(), r.worst_index, r.analytic,
              r.numeric, r.entries_checked, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic memory networks with tensor attention gates on bAbI"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (default: runtime choice)");

  std::string config_file, data, task_list, out, embeddings, ckpt;
  std::size_t max_steps = 0;
  ModelFlags flags;

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", config_file, "key=value file; flags override it");
  train_cmd->add_option("--data", data, std::string("bAbI root (fallback: $") + kDataEnv + ")");
  train_cmd->add_option("--task", task_list, "task number, or a comma list for joint training");
  train_cmd->add_option("--out", out, "checkpoint path");
  train_cmd->add_option("--embeddings", embeddings, "pretrained word vectors (text)");
  train_cmd->add_option("--max-steps", max_steps, "stop after this many optimizer steps");
  flags.add(*train_cmd);

  bool on_train = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint; exit 0 iff every task passes");
  eval_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", data, std::string("bAbI root (fallback: $") + kDataEnv + ")");
  eval_cmd->add_option("--task", task_list, "task number or comma list")->required();
  eval_cmd->add_flag("--train-split", on_train, "evaluate on the training split");

  int task = 0;
  std::size_t index = 0;
  auto* inspect_cmd = app.add_subcommand("inspect", "export the gate trace of one test sample as CSV");
  inspect_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  inspect_cmd->add_option("--data", data, std::string("bAbI root (fallback: $") + kDataEnv + ")");
  inspect_cmd->add_option("--task", task, "task number")->required()->check(CLI::Range(1, 20));
  inspect_cmd->add_option("--index", index, "0-based sample index in the split")->required();
  inspect_cmd->add_flag("--train-split", on_train, "index into the training split");
  inspect_cmd->add_option("--out", out, "CSV path (default: stdout)");

  std::string scorer = "ntn2", target = "gate";
  bool three_way = false;
  double eps = checks::kEps;
  std::uint64_t seed = checks::kDefaultSeed;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of analytic gradients");
  grad_cmd->add_option("--scorer", scorer, "dmn | ntn2 | ntn3 | xntn");
  grad_cmd->add_flag("--three-way", three_way, "include the trilinear ntn term");
  grad_cmd->add_option("--target", target, "gate | gru | dmtn | memn2n | memn2n-untied");
  grad_cmd->add_option("--eps", eps, "central-difference step");
  grad_cmd->add_option("--seed", seed, "toy instance seed");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*train_cmd) return cmd_train(flags, config_file, data, task_list, out, embeddings, max_steps);
    if (*eval_cmd) return cmd_eval(ckpt, data, task_list, on_train);
    if (*inspect_cmd) return cmd_inspect(ckpt, data, task, index, on_train, out);
    if (*grad_cmd) return cmd_gradcheck(scorer, three_way, target, eps, seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
