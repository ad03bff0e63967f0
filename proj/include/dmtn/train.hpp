#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "dmtn/babi.hpp"
#include "dmtn/config.hpp"
#include "dmtn/parameters.hpp"

namespace dmtn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;  // steps taken
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// One bias-corrected Adam update. Parameters absent from `grads` are left untouched.
void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state);

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(GradientMap& grads, double max_norm);

/// Loss and gradient of one sample (cross-entropy plus L2 on weights).
struct SampleGradient {
  double loss = 0.0;
  bool correct = false;
  GradientMap grads;
};

SampleGradient sample_gradient(const babi::EncodedSample& sample, const ParameterStore& params,
                               const ModelConfig& cfg, std::mt19937_64* dropout_rng = nullptr);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  std::size_t step = 0;   // optimizer steps so far
  double loss = 0.0;      // mean per-sample training loss
  double accuracy = 0.0;  // training accuracy in percent, before each batch's update
};

struct TrainOptions {
  std::size_t max_steps = 0;  // 0: run cfg.epochs full epochs
  /// Called after every epoch with the current parameters; return false to stop.
  std::function<bool(const EpochStats&, const ParameterStore&)> on_epoch;
  bool parallel = true;
};

struct TrainResult {
  ParameterStore params;
  std::vector<EpochStats> log;
  std::size_t steps = 0;
};

/// Minibatch Adam on `corpus` from fresh parameters of cfg.seed.
TrainResult train(const ModelConfig& cfg, std::span<const babi::EncodedSample> corpus,
                  std::size_t vocab_size, const TrainOptions& options = {});

/// Same, continuing from `initial` (e.g. with pretrained embeddings loaded).
TrainResult train(const ModelConfig& cfg, std::span<const babi::EncodedSample> corpus,
                  ParameterStore initial, const TrainOptions& options = {});

struct EvalReport {
  int task = 0;
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  // percent
  bool passed = false;    // accuracy >= 95.0

  static constexpr double kPassThreshold = 95.0;
  static EvalReport from_counts(int task, std::size_t correct, std::size_t count);
};

EvalReport evaluate(int task, std::span<const babi::EncodedSample> samples,
                    const ParameterStore& params, const ModelConfig& cfg, bool parallel = true);

}  // namespace dmtn
