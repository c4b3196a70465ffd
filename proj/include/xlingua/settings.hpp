#pragma once

#include <charconv>
#include <map>
#include <set>
#include <string>

#include "xlingua/config.hpp"
#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"
#include "xlingua/experiment.hpp"
#include "xlingua/metrics.hpp"
#include "xlingua/model.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/training.hpp"

namespace xlingua {

// Flat config keys and their defaults, grouped the way subcommands pull them
// in. Stage-prefixed keys look like `adapt.lr`.

using KeyDefaults = std::map<std::string, std::string>;

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::size_t get_size(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  auto v = cfg.get_int(key, static_cast<long long>(fallback));
  if (v < 0) fail(ErrorCategory::config, "key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

inline std::uint64_t get_seed(const KeyValueConfig& cfg, const std::string& key) {
  auto v = cfg.get_int(key, 0);
  if (v < 0) fail(ErrorCategory::config, "key '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

inline void add_defaults(KeyDefaults& into, const KeyDefaults& from) { into.insert(from.begin(), from.end()); }

inline KeyDefaults optimizer_keys(const std::string& prefix, const OptimizerConfig& d) {
  using detail::num;
  return {{prefix + ".lr", num(d.learning_rate)},     {prefix + ".beta1", num(d.beta1)},
          {prefix + ".beta2", num(d.beta2)},          {prefix + ".epsilon", num(d.epsilon)},
          {prefix + ".weight_decay", num(d.weight_decay)}, {prefix + ".batch", std::to_string(d.batch_size)},
          {prefix + ".epochs", std::to_string(d.epochs)}};
}

inline OptimizerConfig optimizer_from(const KeyValueConfig& cfg, const std::string& prefix,
                                      const OptimizerConfig& fallback = {}) {
  OptimizerConfig c = fallback;
  c.learning_rate = cfg.get_double(prefix + ".lr", c.learning_rate);
  c.beta1 = cfg.get_double(prefix + ".beta1", c.beta1);
  c.beta2 = cfg.get_double(prefix + ".beta2", c.beta2);
  c.epsilon = cfg.get_double(prefix + ".epsilon", c.epsilon);
  c.weight_decay = cfg.get_double(prefix + ".weight_decay", c.weight_decay);
  c.batch_size = detail::get_size(cfg, prefix + ".batch", c.batch_size);
  c.epochs = detail::get_size(cfg, prefix + ".epochs", c.epochs);
  c.validate();
  return c;
}

inline KeyDefaults model_keys(const ModelConfig& d = {}) {
  return {{"model.embedding_size", std::to_string(d.embedding_size)},
          {"model.hidden_size", std::to_string(d.hidden_size)},
          {"model.init_scale", detail::num(d.init_scale)}};
}

/// The model seed is the run seed.
inline ModelConfig model_from(const KeyValueConfig& cfg, ModelConfig c = {}) {
  c.embedding_size = static_cast<int>(cfg.get_int("model.embedding_size", c.embedding_size));
  c.hidden_size = static_cast<int>(cfg.get_int("model.hidden_size", c.hidden_size));
  c.init_scale = cfg.get_double("model.init_scale", c.init_scale);
  c.seed = detail::get_seed(cfg, "seed");
  if (c.embedding_size <= 0 || c.hidden_size <= 0) fail(ErrorCategory::config, "model sizes must be positive");
  if (!(c.init_scale > 0.0)) fail(ErrorCategory::config, "model.init_scale must be positive");
  return c;
}

inline KeyDefaults template_keys(const PromptTemplate& d = {}) {
  return {{"template.context_prefix", d.context_prefix},
          {"template.response_prefix", d.response_prefix},
          {"template.sentinel0", d.sentinel0},
          {"template.sentinel1", d.sentinel1}};
}

inline PromptTemplate template_from(const KeyValueConfig& cfg) {
  PromptTemplate t;
  t.context_prefix = cfg.get_string("template.context_prefix", t.context_prefix);
  t.response_prefix = cfg.get_string("template.response_prefix", t.response_prefix);
  t.sentinel0 = cfg.get_string("template.sentinel0", t.sentinel0);
  t.sentinel1 = cfg.get_string("template.sentinel1", t.sentinel1);
  t.validate();
  return t;
}

inline KeyDefaults corruption_keys(const CorruptionConfig& d = {}) {
  return {{"corruption.rate", detail::num(d.corruption_rate)},
          {"corruption.mean_span", detail::num(d.mean_span_length)},
          {"corruption.joined", d.joined_documents ? "true" : "false"}};
}

inline CorruptionConfig corruption_from(const KeyValueConfig& cfg, CorruptionConfig c = {}) {
  c.corruption_rate = cfg.get_double("corruption.rate", c.corruption_rate);
  c.mean_span_length = cfg.get_double("corruption.mean_span", c.mean_span_length);
  c.joined_documents = cfg.get_bool("corruption.joined", c.joined_documents);
  if (!(c.corruption_rate > 0.0 && c.corruption_rate < 1.0)) {
    fail(ErrorCategory::config, "corruption.rate must lie in (0, 1)");
  }
  if (!(c.mean_span_length > 0.0)) fail(ErrorCategory::config, "corruption.mean_span must be positive");
  return c;
}

inline KeyDefaults synthetic_keys(const SyntheticSpec& d = {}) {
  return {{"vocab_size", std::to_string(d.vocab_size)},   {"n_train_aux", std::to_string(d.n_train_aux)},
          {"n_fewshot_tgt", std::to_string(d.n_fewshot_tgt)}, {"n_valid", std::to_string(d.n_valid)},
          {"n_test", std::to_string(d.n_test)},           {"n_pretrain", std::to_string(d.n_pretrain)},
          {"templates", std::to_string(d.template_count)}, {"aux_language", d.aux_language},
          {"tgt_language", d.tgt_language}};
}

inline SyntheticSpec synthetic_from(const KeyValueConfig& cfg, SyntheticSpec s = {}) {
  using detail::get_size;
  s.vocab_size = get_size(cfg, "vocab_size", s.vocab_size);
  s.n_train_aux = get_size(cfg, "n_train_aux", s.n_train_aux);
  s.n_fewshot_tgt = get_size(cfg, "n_fewshot_tgt", s.n_fewshot_tgt);
  s.n_valid = get_size(cfg, "n_valid", s.n_valid);
  s.n_test = get_size(cfg, "n_test", s.n_test);
  s.n_pretrain = get_size(cfg, "n_pretrain", s.n_pretrain);
  s.template_count = get_size(cfg, "templates", s.template_count);
  s.aux_language = cfg.get_string("aux_language", s.aux_language);
  s.tgt_language = cfg.get_string("tgt_language", s.tgt_language);
  s.seed = detail::get_seed(cfg, "seed");
  for (const auto* lang : {&s.aux_language, &s.tgt_language}) {
    if (!is_known_language(*lang)) fail(ErrorCategory::config, "unknown language code '" + *lang + "'");
  }
  validate(s);
  return s;
}

inline KeyDefaults bleu_keys(const BleuOptions& d = {}) {
  return {{"bleu.max_order", std::to_string(d.max_order)},
          {"bleu.smoothing", std::string(smoothing_name(d.smoothing))},
          {"bleu.epsilon", detail::num(d.floor_epsilon)}};
}

inline BleuOptions bleu_from(const KeyValueConfig& cfg) {
  BleuOptions o;
  o.max_order = static_cast<int>(cfg.get_int("bleu.max_order", o.max_order));
  o.smoothing = parse_smoothing(cfg.get_string("bleu.smoothing", std::string(smoothing_name(o.smoothing))));
  o.floor_epsilon = cfg.get_double("bleu.epsilon", o.floor_epsilon);
  if (o.max_order < 1) fail(ErrorCategory::config, "bleu.max_order must be at least 1");
  if (!(o.floor_epsilon > 0.0)) fail(ErrorCategory::config, "bleu.epsilon must be positive");
  return o;
}

/// Keys of an experiment spec file.
inline KeyDefaults experiment_keys() {
  ExperimentSpec d;
  KeyDefaults k{{"scenario", std::string(scenario_name(d.scenario))},
                {"prompted", "false"},
                {"prompt_stage2_only", "false"},
                {"source_language", d.source_language},
                {"target_language", d.target_language},
                {"seed", "0"},
                {"eval_every", std::to_string(d.eval_every)},
                {"max_tokens", std::to_string(d.max_tokens)},
                {"max_generate", std::to_string(d.max_generate)}};
  add_defaults(k, optimizer_keys("train", d.train));
  add_defaults(k, optimizer_keys("adapt", d.adapt));
  add_defaults(k, template_keys(d.prompt));
  return k;
}

inline ExperimentSpec experiment_from(const KeyValueConfig& cfg) {
  ExperimentSpec s;
  s.scenario = parse_scenario(cfg.get_string("scenario", std::string(scenario_name(s.scenario))));
  s.prompted = cfg.get_bool("prompted", s.prompted);
  s.prompt_stage2_only = cfg.get_bool("prompt_stage2_only", s.prompt_stage2_only);
  s.source_language = cfg.get_string("source_language", s.source_language);
  s.target_language = cfg.get_string("target_language", s.target_language);
  s.train = optimizer_from(cfg, "train", s.train);
  s.adapt = optimizer_from(cfg, "adapt", s.adapt);
  s.seed = detail::get_seed(cfg, "seed");
  s.eval_every = detail::get_size(cfg, "eval_every", s.eval_every);
  s.max_tokens = detail::get_size(cfg, "max_tokens", s.max_tokens);
  s.max_generate = detail::get_size(cfg, "max_generate", s.max_generate);
  s.prompt = template_from(cfg);
  if (s.max_tokens == 0 || s.max_generate == 0) {
    fail(ErrorCategory::config, "max_tokens and max_generate must be positive");
  }
  if (s.prompt_stage2_only && s.scenario != Scenario::fs_xlt) {
    fail(ErrorCategory::config, "prompt_stage2_only only applies to FS-XLT");
  }
  return s;
}

/// Keys of a study config. `seed` fixes the synthetic data; model seeds are
/// the study seeds.
inline KeyDefaults study_keys(const StudyConfig& d = {}) {
  KeyDefaults k{{"seed", std::to_string(d.synthetic.seed)},
                {"eval_every", std::to_string(d.eval_every)},
                {"sample_count", std::to_string(d.sample_count)}};
  add_defaults(k, synthetic_keys(d.synthetic));
  add_defaults(k, model_keys(d.model));
  add_defaults(k, corruption_keys(d.corruption));
  add_defaults(k, optimizer_keys("pretrain", d.pretrain));
  add_defaults(k, optimizer_keys("train", d.train));
  add_defaults(k, optimizer_keys("adapt", d.adapt));
  add_defaults(k, template_keys(d.prompt));
  return k;
}

inline StudyConfig study_from(const KeyValueConfig& cfg) {
  StudyConfig s;
  s.synthetic = synthetic_from(cfg, s.synthetic);
  s.model = model_from(cfg, s.model);
  s.corruption = corruption_from(cfg, s.corruption);
  s.pretrain = optimizer_from(cfg, "pretrain", s.pretrain);
  s.train = optimizer_from(cfg, "train", s.train);
  s.adapt = optimizer_from(cfg, "adapt", s.adapt);
  s.eval_every = detail::get_size(cfg, "eval_every", s.eval_every);
  s.sample_count = detail::get_size(cfg, "sample_count", s.sample_count);
  s.prompt = template_from(cfg);
  return s;
}

/// Layers `defaults` under `cfg`, rejecting keys outside the default set.
inline KeyValueConfig resolve(const KeyValueConfig& cfg, const KeyDefaults& defaults,
                              const std::set<std::string>& extra_keys = {}) {
  std::set<std::string> known(extra_keys);
  for (const auto& [k, v] : defaults) known.insert(k);
  cfg.require_known(known);
  KeyValueConfig out;
  for (const auto& [k, v] : defaults) out.set(k, v);
  for (const auto& [k, v] : cfg.entries()) out.set(k, v);
  return out;
}

}  // namespace xlingua
