#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xlingua/error.hpp"
#include "xlingua/model.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/rng.hpp"

namespace xlingua {

/// AdamW settings for one training stage.
struct OptimizerConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;
  std::size_t epochs = 5;

  /// Source-training and multitask-training defaults.
  static OptimizerConfig source_training() { return {5e-5, 0.9, 0.999, 1e-8, 0.0, 8, 5}; }
  /// Target-adapting defaults.
  static OptimizerConfig target_adapting() { return {1e-4, 0.9, 0.999, 1e-8, 0.0, 4, 6}; }

  void validate() const {
    if (!(learning_rate > 0.0)) fail(ErrorCategory::config, "learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      fail(ErrorCategory::config, "beta1 and beta2 must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) fail(ErrorCategory::config, "epsilon must be positive");
    if (weight_decay < 0.0) fail(ErrorCategory::config, "weight decay must be non-negative");
    if (batch_size == 0) fail(ErrorCategory::config, "batch size must be positive");
  }

  std::size_t steps_for(std::size_t examples) const {
    return epochs * ((examples + batch_size - 1) / batch_size);
  }

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Adam moments with decoupled weight decay.
class AdamW {
 public:
  AdamW(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * params[i]);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct Checkpoint {
  std::size_t step = 0;
  std::vector<double> parameters;
  double validation_loss = 0.0;
};

/// Minimum validation loss; the earliest step wins ties.
inline const Checkpoint& select_best_checkpoint(const std::vector<Checkpoint>& history) {
  if (history.empty()) fail(ErrorCategory::precondition, "cannot select from an empty checkpoint history");
  const Checkpoint* best = &history.front();
  for (const auto& c : history) {
    if (c.validation_loss < best->validation_loss ||
        (c.validation_loss == best->validation_loss && c.step < best->step)) {
      best = &c;
    }
  }
  return *best;
}

struct TrainOptions {
  /// Validation cadence in optimizer steps; 0 means once per epoch. The final
  /// step is always evaluated.
  std::size_t eval_every = 0;
  /// Reshuffle the training data each epoch. Off by default so that an
  /// interleaved schedule is consumed in the order it was built.
  bool shuffle = false;
  /// Called after each optimizer step with (step, batch loss).
  std::function<void(std::size_t, double)> on_step;
};

namespace detail {

/// Runs the optimizer loop; `on_eval(step)` is invoked on the evaluation
/// cadence when `eval_every` is non-zero.
template <Seq2SeqModel M, typename OnEval>
void optimize(M& model, const std::vector<EncodedExample>& data, const OptimizerConfig& cfg, const TrainOptions& opts,
              std::uint64_t seed, std::size_t eval_every, OnEval&& on_eval) {
  cfg.validate();
  const std::size_t n = data.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.epochs * per_epoch;
  AdamW opt(cfg, model.parameters().size());
  std::vector<double> grad(model.parameters().size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<EncodedExample> batch;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (opts.shuffle) rng.shuffle(order);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * cfg.batch_size; i < std::min(n, (b + 1) * cfg.batch_size); ++i) {
        batch.push_back(data[order[i]]);
      }
      double loss = 0.0;
      try {
        loss = model.loss_and_gradient(std::span<const EncodedExample>(batch), grad);
      } catch (const Error& e) {
        if (e.category() != ErrorCategory::numeric) throw;
        fail(ErrorCategory::numeric, "non-finite training loss at step " + std::to_string(step + 1));
      }
      opt.step(model.mutable_parameters(), grad);
      ++step;
      if (opts.on_step) opts.on_step(step, loss);
      if (eval_every && (step % eval_every == 0 || step == total)) on_eval(step);
    }
  }
}

}  // namespace detail

struct TrainResult {
  std::vector<Checkpoint> history;
  std::size_t steps = 0;
};

/// Trains in place for epochs * ceil(|data| / batch_size) AdamW steps and
/// records a validation checkpoint on the cadence and at the final step. The
/// model is left at its final parameters; use select_best_checkpoint to
/// recover the selected ones.
template <Seq2SeqModel M>
TrainResult train(M& model, const std::vector<FormattedExample>& data, const std::vector<FormattedExample>& valid,
                  const OptimizerConfig& cfg, std::uint64_t seed, const TrainOptions& opts = {}) {
  if (data.empty()) fail(ErrorCategory::precondition, "training data is empty");
  if (valid.empty()) fail(ErrorCategory::precondition, "validation data is empty");
  if (cfg.epochs == 0) fail(ErrorCategory::config, "epochs must be positive");
  const auto train_enc = encode_examples(model.vocabulary(), data);
  const auto valid_enc = encode_examples(model.vocabulary(), valid);
  const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t eval_every = opts.eval_every ? opts.eval_every : per_epoch;
  TrainResult result;
  detail::optimize(model, train_enc, cfg, opts, seed, eval_every, [&](std::size_t step) {
    double vl = 0.0;
    try {
      vl = model.loss(std::span<const EncodedExample>(valid_enc));
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::numeric) throw;
      fail(ErrorCategory::numeric, "non-finite validation loss at step " + std::to_string(step));
    }
    auto p = model.parameters();
    result.history.push_back(Checkpoint{step, std::vector<double>(p.begin(), p.end()), vl});
  });
  result.steps = cfg.steps_for(data.size());
  return result;
}

struct CorruptionConfig {
  double corruption_rate = 0.15;
  double mean_span_length = 3.0;
  bool joined_documents = false;
};

/// Span-corruption examples from every context and response with at least two
/// tokens across all corpora, mixed into one uniformly shuffled stream.
template <typename Corpora>
std::vector<FormattedExample> span_corruption_examples(const Corpora& corpora, const CorruptionConfig& cc,
                                                       const PromptTemplate& tmpl, std::uint64_t seed) {
  std::vector<FormattedExample> out;
  Rng rng(seed);
  for (const auto& corpus : corpora) {
    for (const auto& pair : corpus) {
      std::vector<std::string> docs;
      if (cc.joined_documents) {
        docs.push_back(pair.context() + " " + pair.response());
      } else {
        docs = {pair.context(), pair.response()};
      }
      for (const auto& text : docs) {
        if (split_whitespace(text).size() < 2) continue;
        auto sc = corrupt_spans(text, cc.corruption_rate, cc.mean_span_length, tmpl, rng.next_u64());
        if (!sc.identity) out.push_back(std::move(sc.example));
      }
    }
  }
  rng.shuffle(out);
  return out;
}

/// Unsupervised span-corruption pretraining over at least two languages.
/// epochs = 0 leaves the model untouched.
template <Seq2SeqModel M, typename Corpora>
std::size_t pretrain_span_corruption(M& model, const Corpora& corpora, const CorruptionConfig& cc,
                                     const OptimizerConfig& cfg, const PromptTemplate& tmpl, std::uint64_t seed) {
  std::set<std::string> languages;
  for (const auto& c : corpora) languages.insert(c.language());
  if (languages.size() < 2) fail(ErrorCategory::precondition, "pretraining needs corpora in at least two languages");
  auto examples = span_corruption_examples(corpora, cc, tmpl, seed);
  if (examples.empty()) fail(ErrorCategory::precondition, "no span-corruption examples could be built");
  if (cfg.epochs == 0) return 0;
  const auto enc = encode_examples(model.vocabulary(), examples);
  detail::optimize(model, enc, cfg, TrainOptions{}, seed, 0, [](std::size_t) {});
  return cfg.steps_for(enc.size());
}

/// Compares the analytic gradient against central differences at the given
/// parameter indices. The per-probe error is |a - n| / max(|a|, |n|, floor);
/// the floor keeps finite-difference roundoff on near-zero components (around
/// 1e-12 at eps = 1e-4) from reading as relative error. Returns the maximum
/// over probes.
template <Seq2SeqModel M>
double check_gradient(M& model, std::span<const EncodedExample> batch, std::span<const double> analytic,
                      const std::vector<std::size_t>& probes, double eps, double floor = 1e-6) {
  double worst = 0.0;
  auto params = model.mutable_parameters();
  for (auto i : probes) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = model.loss(batch);
    params[i] = saved - eps;
    const double down = model.loss(batch);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

/// Finite-difference check of nll_loss at `probe_count` parameters drawn
/// uniformly from those with a non-zero analytic gradient (parameters the
/// batch cannot reach, such as embeddings of absent tokens, are skipped).
template <Seq2SeqModel M>
double gradient_check(M& model, const std::vector<FormattedExample>& batch, std::size_t probe_count, double eps,
                      std::uint64_t seed = 0) {
  if (batch.empty()) fail(ErrorCategory::precondition, "gradient check needs a non-empty batch");
  if (probe_count == 0) fail(ErrorCategory::precondition, "probe_count must be at least 1");
  const auto enc = encode_examples(model.vocabulary(), batch);
  std::vector<double> grad(model.parameters().size());
  model.loss_and_gradient(std::span<const EncodedExample>(enc), grad);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (grad[i] != 0.0) active.push_back(i);
  }
  if (active.empty()) fail(ErrorCategory::precondition, "gradient is identically zero");
  Rng rng(seed);
  std::vector<std::size_t> probes;
  for (auto k : rng.sample_indices(active.size(), std::min(probe_count, active.size()))) probes.push_back(active[k]);
  return check_gradient(model, std::span<const EncodedExample>(enc), grad, probes, eps);
}

}  // namespace xlingua
