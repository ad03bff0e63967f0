#include "dmtn/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <omp.h>

#include "dmtn/autodiff.hpp"
#include "dmtn/episodic.hpp"
#include "dmtn/errors.hpp"
#include "dmtn/model.hpp"

namespace dmtn {

void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw ArgumentError("adam_step: gradient for unknown parameter '" + name + "'");
    require_same_shape(params.get(name).shape(), g.shape(), "adam_step");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    Tensor& w = params.get(name);
    auto [mit, m_new] = state.m.try_emplace(name, Tensor::zeros_like(w));
    auto [vit, v_new] = state.v.try_emplace(name, Tensor::zeros_like(w));
    auto m = mit->second.data();
    auto v = vit->second.data();
    auto wd = w.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gd[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gd[i] * gd[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      wd[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_global_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double x : g.data()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& x : g.data()) x *= s;
    }
  }
  return norm;
}

SampleGradient sample_gradient(const babi::EncodedSample& sample, const ParameterStore& params,
                               const ModelConfig& cfg, std::mt19937_64* dropout_rng) {
  ad::Tape tape;
  ad::Var logits = forward_logits(tape, sample, params, cfg, nullptr, dropout_rng);
  ad::Var loss = nn::loss(logits, sample.answer_id, params, cfg.l2);
  SampleGradient out;
  out.loss = loss.item();
  out.correct = argmax(logits.value().data()) == sample.answer_id;
  out.grads = tape.backward(loss);
  return out;
}

namespace {

void accumulate(GradientMap& sum, const GradientMap& g) {
  for (const auto& [name, t] : g) {
    auto it = sum.find(name);
    if (it == sum.end()) {
      sum.emplace(name, t);
      continue;
    }
    auto dst = it->second.data();
    auto src = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace

TrainResult train(const ModelConfig& cfg, std::span<const babi::EncodedSample> corpus,
                  std::size_t vocab_size, const TrainOptions& options) {
  return train(cfg, corpus, init_parameters(cfg, vocab_size), options);
}

TrainResult train(const ModelConfig& cfg, std::span<const babi::EncodedSample> corpus,
                  ParameterStore initial, const TrainOptions& options) {
  cfg.validate();
  if (corpus.empty()) throw ArgumentError("train: empty corpus");
  TrainResult result;
  result.params = std::move(initial);
  AdamState adam;
  adam.lr = cfg.lr;

  std::seed_seq shuffle_seq{cfg.seed, std::uint64_t{2}};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::vector<std::size_t> order(corpus.size());

  const std::size_t chunk =
      options.parallel ? static_cast<std::size_t>(std::max(1, omp_get_max_threads())) : 1;
  const std::size_t epochs = options.max_steps ? std::numeric_limits<std::size_t>::max() : cfg.epochs;

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    bool stop = false;

    for (std::size_t start = 0, batch = 1; start < order.size(); start += cfg.batch, ++batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      GradientMap sum;
      double batch_loss = 0.0;
      for (std::size_t c0 = start; c0 < end; c0 += chunk) {
        const std::size_t c1 = std::min(end, c0 + chunk);
        std::vector<SampleGradient> parts(c1 - c0);
        std::vector<std::exception_ptr> errors(c1 - c0);
#pragma omp parallel for schedule(dynamic) if (chunk > 1)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(c1 - c0); ++j) {
          const std::size_t idx = order[c0 + static_cast<std::size_t>(j)];
          try {
            std::seed_seq drop_seq{cfg.seed, std::uint64_t{3}, std::uint64_t{epoch}, std::uint64_t{idx}};
            std::mt19937_64 drop_rng(drop_seq);
            parts[static_cast<std::size_t>(j)] =
                sample_gradient(corpus[idx], result.params, cfg, cfg.dropout > 0.0 ? &drop_rng : nullptr);
          } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
          }
        }
        for (std::size_t j = 0; j < parts.size(); ++j) {
          if (errors[j]) {
            try {
              std::rethrow_exception(errors[j]);
            } catch (const NumericError& e) {
              throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                                 ": " + e.what());
            }
          }
          batch_loss += parts[j].loss;
          correct += parts[j].correct ? 1 : 0;
          accumulate(sum, parts[j].grads);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : sum) {
        for (double& x : g.data()) x *= inv;
      }
      clip_global_norm(sum, cfg.clip_norm);
      adam_step(result.params, sum, adam);
      loss_sum += batch_loss;
      seen += end - start;
      ++result.steps;
      if (options.max_steps && result.steps >= options.max_steps) {
        stop = true;
        break;
      }
    }

    EpochStats stats{epoch, result.steps, loss_sum / static_cast<double>(seen),
                     100.0 * static_cast<double>(correct) / static_cast<double>(seen)};
    result.log.push_back(stats);
    if (options.on_epoch && !options.on_epoch(stats, result.params)) break;
    if (stop) break;
  }
  return result;
}

EvalReport EvalReport::from_counts(int task, std::size_t correct, std::size_t count) {
  if (count == 0) throw ArgumentError("evaluate: no samples");
  if (correct > count) throw ArgumentError("evaluate: more correct answers than samples");
  EvalReport r;
  r.task = task;
  r.count = count;
  r.correct = correct;
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(count);
  r.passed = r.accuracy >= kPassThreshold;
  return r;
}

EvalReport evaluate(int task, std::span<const babi::EncodedSample> samples,
                    const ParameterStore& params, const ModelConfig& cfg, bool parallel) {
  if (samples.empty()) throw ArgumentError("evaluate: no samples");
  std::vector<unsigned char> hit(samples.size(), 0);
  std::vector<std::exception_ptr> errors(samples.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      hit[k] = predict(samples[k], params, cfg).answer == samples[k].answer_id;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const auto correct = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  return EvalReport::from_counts(task, correct, samples.size());
}

}  // namespace dmtn
