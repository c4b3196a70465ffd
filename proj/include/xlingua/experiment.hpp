#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"
#include "xlingua/interleave.hpp"
#include "xlingua/metrics.hpp"
#include "xlingua/model.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/training.hpp"

namespace xlingua {

enum class Scenario { ft, fs_xlt, mtl };

inline std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::ft: return "FT";
    case Scenario::fs_xlt: return "FS-XLT";
    case Scenario::mtl: return "MTL";
  }
  return "?";
}

inline Scenario parse_scenario(std::string_view name) {
  if (name == "FT" || name == "ft") return Scenario::ft;
  if (name == "FS-XLT" || name == "fs-xlt") return Scenario::fs_xlt;
  if (name == "MTL" || name == "mtl") return Scenario::mtl;
  fail(ErrorCategory::config, "unknown scenario '" + std::string(name) + "' (expected FT, FS-XLT or MTL)");
}

struct ExperimentSpec {
  Scenario scenario = Scenario::ft;
  bool prompted = false;
  /// FS-XLT ablation: plain source-training, prompted target-adapting.
  bool prompt_stage2_only = false;
  std::string source_language = "en";  // source (FS-XLT) or auxiliary (MTL) language
  std::string target_language = "da";
  OptimizerConfig train = OptimizerConfig::source_training();
  OptimizerConfig adapt = OptimizerConfig::target_adapting();
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0: once per epoch
  std::size_t max_tokens = 64;
  std::size_t max_generate = 64;
  PromptTemplate prompt;

  /// Table-style setting label, e.g. "FS-XLT_pmpt".
  std::string setting() const {
    std::string s(scenario_name(scenario));
    return prompted ? s + "_pmpt" : s;
  }
};

inline nlohmann::ordered_json to_json(const OptimizerConfig& c) {
  return {{"lr", c.learning_rate}, {"beta1", c.beta1},          {"beta2", c.beta2}, {"epsilon", c.epsilon},
          {"weight_decay", c.weight_decay}, {"batch", c.batch_size}, {"epochs", c.epochs}};
}

inline nlohmann::ordered_json to_json(const ExperimentSpec& s) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario_name(s.scenario);
  j["prompted"] = s.prompted;
  j["prompt_stage2_only"] = s.prompt_stage2_only;
  j["source_language"] = s.source_language;
  j["target_language"] = s.target_language;
  j["train"] = to_json(s.train);
  j["adapt"] = to_json(s.adapt);
  j["seed"] = s.seed;
  j["eval_every"] = s.eval_every;
  j["max_tokens"] = s.max_tokens;
  j["max_generate"] = s.max_generate;
  j["template"] = {{"context_prefix", s.prompt.context_prefix},
                   {"response_prefix", s.prompt.response_prefix},
                   {"sentinel0", s.prompt.sentinel0},
                   {"sentinel1", s.prompt.sentinel1}};
  return j;
}

/// One training stage as it happened.
struct StageRecord {
  std::string name;
  std::string validation_language;  // the language whose validation loss drove selection
  bool prompted = false;
  std::size_t train_examples = 0;
  std::size_t steps = 0;
  std::vector<std::pair<std::size_t, double>> validation_losses;  // (step, loss)
  std::size_t selected_step = 0;
  double selected_loss = 0.0;
  std::vector<double> selected_parameters;
};

struct RunReport {
  ExperimentSpec spec;
  std::vector<StageRecord> stages;
  std::vector<std::string> contexts;     // evaluated test contexts
  std::vector<std::string> references;
  std::vector<std::string> hypotheses;   // after extract_response
  MetricReport metrics;
  double wall_seconds = 0.0;
};

inline nlohmann::ordered_json to_json(const StageRecord& s) {
  nlohmann::ordered_json st;
  st["name"] = s.name;
  st["validation_language"] = s.validation_language;
  st["prompted"] = s.prompted;
  st["train_examples"] = s.train_examples;
  st["steps"] = s.steps;
  st["validation_losses"] = nlohmann::ordered_json::array();
  for (const auto& [step, loss] : s.validation_losses) st["validation_losses"].push_back({step, loss});
  st["selected_step"] = s.selected_step;
  st["selected_loss"] = s.selected_loss;
  return st;
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["setting"] = r.spec.setting();
  j["spec"] = to_json(r.spec);
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : r.stages) j["stages"].push_back(to_json(s));
  j["metrics"] = to_json(r.metrics);
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

/// The three splits a stage draws from.
struct StageCorpora {
  const Corpus& train;
  const Corpus& valid;
  const Corpus& test;
};

namespace detail {

template <typename Pairs>
std::vector<FormattedExample> prepare(const Pairs& pairs, bool prompted, const ExperimentSpec& spec) {
  std::vector<FormattedExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(format_pair(truncate_pair(p, spec.max_tokens), prompted, spec.prompt));
  return out;
}

}  // namespace detail

/// Trains `model` in place on one stage and leaves it at the checkpoint with
/// the lowest validation loss.
template <typename Pairs>
StageRecord run_stage(AttentionSeq2Seq& model, const std::string& name, const Pairs& train_pairs, const Corpus& valid,
                      bool prompted, const OptimizerConfig& cfg, const ExperimentSpec& spec, std::uint64_t seed) {
  auto data = detail::prepare(train_pairs, prompted, spec);
  auto val = detail::prepare(valid.pairs(), prompted, spec);
  TrainOptions opts;
  opts.eval_every = spec.eval_every;
  auto result = train(model, data, val, cfg, seed, opts);
  const Checkpoint& best = select_best_checkpoint(result.history);
  model.set_parameters(best.parameters);
  StageRecord rec;
  rec.name = name;
  rec.validation_language = valid.language();
  rec.prompted = prompted;
  rec.train_examples = data.size();
  rec.steps = result.steps;
  for (const auto& c : result.history) rec.validation_losses.emplace_back(c.step, c.validation_loss);
  rec.selected_step = best.step;
  rec.selected_loss = best.validation_loss;
  rec.selected_parameters = best.parameters;
  return rec;
}

/// Greedy generation over a test corpus; every output goes through
/// extract_response, which is the identity on sentinel-free text.
inline void generate_hypotheses(const AttentionSeq2Seq& model, const Corpus& test, bool prompted,
                                const ExperimentSpec& spec, RunReport& report) {
  for (const auto& pair : test) {
    auto p = truncate_pair(pair, spec.max_tokens);
    auto ex = format_pair(p, prompted, spec.prompt);
    report.contexts.push_back(p.context());
    report.references.push_back(p.response());
    report.hypotheses.push_back(
        strip_sentinels(extract_response(generate_greedy(model, ex.source, spec.max_generate), spec.prompt), spec.prompt));
  }
}

inline void finish_report(RunReport& report, const std::unordered_set<std::string>* target_vocabulary,
                          std::chrono::steady_clock::time_point start) {
  report.metrics = evaluate_hypotheses(report.spec.setting(), report.hypotheses, report.references, target_vocabulary);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Single-stage fine-tuning on the source language, evaluated on its test set.
inline RunReport run_finetune(const AttentionSeq2Seq& init, StageCorpora source, const ExperimentSpec& spec,
                              const std::unordered_set<std::string>* eval_vocabulary = nullptr) {
  if (spec.scenario != Scenario::ft) fail(ErrorCategory::precondition, "run_finetune expects scenario FT");
  const auto start = std::chrono::steady_clock::now();
  AttentionSeq2Seq model = init;
  RunReport report;
  report.spec = spec;
  report.stages.push_back(run_stage(model, "source-training", source.train.pairs(), source.valid, spec.prompted,
                                    spec.train, spec, spec.seed));
  generate_hypotheses(model, source.test, spec.prompted, spec, report);
  finish_report(report, eval_vocabulary, start);
  return report;
}

/// Source-training on the full source data, then target-adapting on the
/// few-shot target examples, starting from the stage-1 selected checkpoint.
inline RunReport run_fs_xlt(const AttentionSeq2Seq& init, StageCorpora source, StageCorpora target,
                            const ExperimentSpec& spec, const std::unordered_set<std::string>* target_vocabulary = nullptr) {
  if (spec.scenario != Scenario::fs_xlt) fail(ErrorCategory::precondition, "run_fs_xlt expects scenario FS-XLT");
  if (target.train.empty()) fail(ErrorCategory::precondition, "FS-XLT needs a non-empty few-shot target corpus");
  const auto start = std::chrono::steady_clock::now();
  AttentionSeq2Seq model = init;
  RunReport report;
  report.spec = spec;
  const bool stage1_prompted = spec.prompted && !spec.prompt_stage2_only;
  report.stages.push_back(run_stage(model, "source-training", source.train.pairs(), source.valid, stage1_prompted,
                                    spec.train, spec, spec.seed));
  report.stages.push_back(run_stage(model, "target-adapting", target.train.pairs(), target.valid, spec.prompted,
                                    spec.adapt, spec, spec.seed + 1));
  generate_hypotheses(model, target.test, spec.prompted, spec, report);
  finish_report(report, target_vocabulary, start);
  return report;
}

/// Multitask training on the evenly interleaved auxiliary + few-shot stream.
/// Selection reads the auxiliary validation loss; evaluation is on the target
/// test set.
inline RunReport run_mtl(const AttentionSeq2Seq& init, StageCorpora aux, StageCorpora target, const ExperimentSpec& spec,
                         const std::unordered_set<std::string>* target_vocabulary = nullptr) {
  if (spec.scenario != Scenario::mtl) fail(ErrorCategory::precondition, "run_mtl expects scenario MTL");
  const auto start = std::chrono::steady_clock::now();
  auto mixed = interleave_even(aux.train, target.train);
  AttentionSeq2Seq model = init;
  RunReport report;
  report.spec = spec;
  report.stages.push_back(
      run_stage(model, "multitask-training", mixed.pairs, aux.valid, spec.prompted, spec.train, spec, spec.seed));
  generate_hypotheses(model, target.test, spec.prompted, spec, report);
  finish_report(report, target_vocabulary, start);
  return report;
}

// ---------------------------------------------------------------------------
// Desk-scale forgetting study.

/// 10000 auxiliary pairs against 10 few-shot target pairs; pretraining uses
/// 2000 documents per language to stay within the desk time budget.
inline SyntheticSpec reference_synthetic() {
  SyntheticSpec s;
  s.n_train_aux = 10000;
  s.n_pretrain = 2000;
  return s;
}

/// Defaults are the reference desk-scale configuration. Learning rates are
/// larger than the full-scale ones because the model starts from a short
/// pretraining run rather than a converged multilingual checkpoint.
struct StudyConfig {
  SyntheticSpec synthetic = reference_synthetic();
  ModelConfig model;
  CorruptionConfig corruption{0.4, 3.0, true};
  OptimizerConfig pretrain{3e-3, 0.9, 0.999, 1e-8, 0.0, 16, 10};
  OptimizerConfig train{1e-3, 0.9, 0.999, 1e-8, 0.0, 8, 5};
  OptimizerConfig adapt{1e-3, 0.9, 0.999, 1e-8, 0.0, 4, 6};
  std::size_t eval_every = 0;
  std::size_t sample_count = 3;  // test contexts dumped per seed
  PromptTemplate prompt;
};

struct StudyRun {
  std::uint64_t seed = 0;
  RunReport report;
};

struct StudySample {
  std::uint64_t seed = 0;
  std::string context;
  std::string setting;
  std::string response;
};

struct SettingSummary {
  std::string setting;
  std::size_t runs = 0;
  double legality = 0.0;  // medians across seeds
  double b1 = 0.0, b2 = 0.0, score = 0.0, bp = 0.0;
  double d1 = 0.0, d2 = 0.0;
};

struct StudyReport {
  std::vector<std::uint64_t> seeds;
  std::vector<StudyRun> runs;
  std::vector<SettingSummary> summary;  // FS-XLT, FS-XLT_pmpt, MTL, MTL_pmpt
  std::vector<StudySample> samples;
  std::vector<double> pretrain_legality;  // per seed, on prompted-free span-corruption probes
  double wall_seconds = 0.0;

  const SettingSummary& setting(const std::string& name) const {
    for (const auto& s : summary) {
      if (s.setting == name) return s;
    }
    fail(ErrorCategory::precondition, "no setting '" + name + "' in study");
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorCategory::precondition, "median of an empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Builds the model vocabulary for a synthetic study: both languages plus the
/// prompt words and reserved entries.
inline Vocabulary study_vocabulary(const SyntheticBilingual& data, const PromptTemplate& prompt) {
  std::vector<std::string> texts;
  for (const auto* lang : {&data.aux, &data.tgt}) {
    texts.insert(texts.end(), lang->vocabulary.begin(), lang->vocabulary.end());
  }
  return Vocabulary::build(texts, prompt);
}

/// Percent of target-vocabulary tokens the model fills into span-corrupted
/// target-language text.
inline double span_fill_legality(const AttentionSeq2Seq& model, const Corpus& corpus,
                                 const std::unordered_set<std::string>& vocabulary, const CorruptionConfig& cc,
                                 const PromptTemplate& prompt, std::uint64_t seed, std::size_t limit = 100) {
  Rng rng(seed);
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < std::min(limit, corpus.size()); ++i) {
    auto sc = corrupt_spans(corpus[i].context(), cc.corruption_rate, cc.mean_span_length, prompt, rng.next_u64());
    if (sc.identity) continue;
    outputs.push_back(extract_response(generate_greedy(model, sc.example.source, 16), prompt));
  }
  bool any = std::any_of(outputs.begin(), outputs.end(), [](const auto& s) { return !trim(s).empty(); });
  return any ? language_legality(outputs, vocabulary).legality : 0.0;
}

/// For each seed: pretrain one model with span corruption on both synthetic
/// languages, then run FS-XLT, FS-XLT_pmpt, MTL and MTL_pmpt from it.
inline StudyReport run_forgetting_study(const StudyConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                        const std::function<void(const std::string&)>& progress = {}) {
  if (seeds.empty()) fail(ErrorCategory::precondition, "the study needs at least one seed");
  const auto start = std::chrono::steady_clock::now();
  const auto data = generate_synthetic_bilingual(cfg.synthetic);
  const auto vocab = study_vocabulary(data, cfg.prompt);
  const std::unordered_set<std::string> tgt_vocab(data.tgt.vocabulary.begin(), data.tgt.vocabulary.end());
  StageCorpora aux{data.aux.train, data.aux.valid, data.aux.test};
  StageCorpora tgt{data.tgt.train, data.tgt.valid, data.tgt.test};

  StudyReport report;
  report.seeds = seeds;
  for (auto seed : seeds) {
    ModelConfig mc = cfg.model;
    mc.seed = seed;
    AttentionSeq2Seq base(vocab, mc);
    std::vector<Corpus> pool{data.aux.pretrain, data.tgt.pretrain};
    pretrain_span_corruption(base, pool, cfg.corruption, cfg.pretrain, cfg.prompt, seed);
    report.pretrain_legality.push_back(
        span_fill_legality(base, data.tgt.test, tgt_vocab, cfg.corruption, cfg.prompt, seed));
    if (progress) progress("seed " + std::to_string(seed) + ": pretrained");

    for (auto scenario : {Scenario::fs_xlt, Scenario::mtl}) {
      for (bool prompted : {false, true}) {
        ExperimentSpec spec;
        spec.scenario = scenario;
        spec.prompted = prompted;
        spec.source_language = data.aux.language;
        spec.target_language = data.tgt.language;
        spec.train = cfg.train;
        spec.adapt = cfg.adapt;
        spec.seed = seed;
        spec.eval_every = cfg.eval_every;
        spec.prompt = cfg.prompt;
        RunReport run = scenario == Scenario::fs_xlt ? run_fs_xlt(base, aux, tgt, spec, &tgt_vocab)
                                                     : run_mtl(base, aux, tgt, spec, &tgt_vocab);
        for (std::size_t i = 0; i < std::min(cfg.sample_count, run.hypotheses.size()); ++i) {
          report.samples.push_back(StudySample{seed, run.contexts[i], spec.setting(), run.hypotheses[i]});
        }
        for (auto& st : run.stages) st.selected_parameters.clear();
        if (progress) {
          progress("seed " + std::to_string(seed) + ": " + spec.setting() + " legality " +
                   std::to_string(run.metrics.legality ? run.metrics.legality->legality : 0.0));
        }
        report.runs.push_back(StudyRun{seed, std::move(run)});
      }
    }
  }

  for (const char* name : {"FS-XLT", "FS-XLT_pmpt", "MTL", "MTL_pmpt"}) {
    SettingSummary s;
    s.setting = name;
    std::vector<double> leg, b1, b2, score, bp, d1, d2;
    for (const auto& r : report.runs) {
      if (r.report.spec.setting() != name) continue;
      const auto& m = r.report.metrics;
      ++s.runs;
      leg.push_back(m.legality ? m.legality->legality : 0.0);
      b1.push_back(m.bleu.b1());
      b2.push_back(m.bleu.b2());
      score.push_back(m.bleu.score);
      bp.push_back(m.bleu.bp);
      d1.push_back(m.distinct ? m.distinct->d1 : 0.0);
      d2.push_back(m.distinct ? m.distinct->d2 : 0.0);
    }
    s.legality = median(leg);
    s.b1 = median(b1);
    s.b2 = median(b2);
    s.score = median(score);
    s.bp = median(bp);
    s.d1 = median(d1);
    s.d2 = median(d2);
    report.summary.push_back(s);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline nlohmann::ordered_json to_json(const StudyReport& r) {
  nlohmann::ordered_json j;
  j["seeds"] = r.seeds;
  j["pretrain_legality"] = r.pretrain_legality;
  j["summary"] = nlohmann::ordered_json::array();
  for (const auto& s : r.summary) {
    j["summary"].push_back({{"setting", s.setting},
                            {"runs", s.runs},
                            {"legality", s.legality},
                            {"b1", s.b1},
                            {"b2", s.b2},
                            {"score", s.score},
                            {"bp", s.bp},
                            {"d1", s.d1},
                            {"d2", s.d2}});
  }
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    j["samples"].push_back({{"seed", s.seed}, {"context", s.context}, {"setting", s.setting}, {"response", s.response}});
  }
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : r.runs) {
    auto rj = to_json(run.report);
    rj.erase("wall_seconds");
    j["runs"].push_back({{"seed", run.seed}, {"report", rj}});
  }
  return j;
}

}  // namespace xlingua
