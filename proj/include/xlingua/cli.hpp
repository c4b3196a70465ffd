#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xlingua/checkpoint.hpp"
#include "xlingua/config.hpp"
#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"
#include "xlingua/experiment.hpp"
#include "xlingua/humaneval.hpp"
#include "xlingua/interleave.hpp"
#include "xlingua/metrics.hpp"
#include "xlingua/model.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/settings.hpp"
#include "xlingua/training.hpp"
#include "xlingua/vocabulary.hpp"

namespace xlingua::cli {

// Every option is a flat config key. A command resolves, in increasing
// priority: built-in defaults, the --config file, positional key=value
// overrides, then flags. The fully resolved config is echoed next to the
// outputs (`<out>.config` for file outputs, `<out>/config.resolved` for
// directories) and can be passed back with --config to repeat the run.

inline constexpr std::array<std::string_view, 12> kSubcommands = {
    "gen-synthetic", "sample-fewshot", "interleave", "format",   "pretrain",         "train",
    "adapt",         "generate",       "evaluate",   "study",    "humaneval-export", "humaneval-aggregate"};

inline int exit_code(ErrorCategory c) {
  return c == ErrorCategory::usage || c == ErrorCategory::config ? 2 : 1;
}

inline std::string usage() {
  std::string s = "usage: xlingua <subcommand> [--config FILE] [--seed N] [--out PATH] [--strict] [key=value ...]\n"
                  "subcommands:\n";
  for (auto name : kSubcommands) s += "  " + std::string(name) + "\n";
  s += "run 'xlingua <subcommand> --help' for the options of one subcommand\n";
  return s;
}

/// Flag name -> config key.
struct FlagSpec {
  std::string flag;
  std::string key;
  std::string help;
};

struct Context {
  std::string command;
  KeyValueConfig cfg;  // resolved
  bool strict = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  std::string get(const std::string& key) const { return cfg.get_string(key, ""); }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (v.empty()) fail(ErrorCategory::usage, command + ": missing required option '" + key + "'");
    return v;
  }

  LoadOptions load_options() const {
    LoadOptions o;
    o.strict = strict;
    auto* e = err;
    o.on_warning = [e](const std::string& msg) { *e << "warning: " << msg << "\n"; };
    return o;
  }
};

// ---- file helpers -------------------------------------------------------------

inline void ensure_parent(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

inline void write_file(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCategory::io, "cannot write '" + path + "'");
  f << text;
  if (!f) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCategory::io, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string> list_value(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : split(s, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::string lines_text(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

/// A corpus file whose language is taken from its records.
inline Corpus read_corpus(const std::string& path, Split split, const LoadOptions& opts) {
  auto pairs = load_pairs(path, opts);
  if (pairs.empty()) fail(ErrorCategory::data, path + ": no usable records");
  auto lang = pairs.front().language();
  try {
    return Corpus(lang, split, std::move(pairs));
  } catch (const Error& e) {
    fail(e.category(), path + ": " + e.what());
  }
}

inline void echo_config(const Context& ctx, const std::string& path) { write_file(path, ctx.cfg.to_string()); }

/// Path of `name` inside `dir`, creating `dir` on first use.
inline std::string dir_file(const std::string& dir, const std::string& name) {
  auto p = std::filesystem::path(dir) / name;
  std::filesystem::create_directories(p.parent_path());
  return p.string();
}

inline Vocabulary vocabulary_for(const Context& ctx, const std::vector<std::string>& corpus_files,
                                 const PromptTemplate& tmpl) {
  std::vector<std::string> texts;
  auto files = corpus_files;
  for (const auto& f : list_value(ctx.get("vocab_from"))) files.push_back(f);
  for (const auto& f : files) {
    for (const auto& p : load_pairs(f, ctx.load_options())) {
      texts.push_back(p.context());
      texts.push_back(p.response());
    }
  }
  return Vocabulary::build(texts, tmpl);
}

/// Loads --init when given, otherwise builds a fresh model over the corpora.
inline AttentionSeq2Seq initial_model(const Context& ctx, const std::vector<std::string>& corpus_files,
                                      const PromptTemplate& tmpl) {
  auto init = ctx.get("init");
  if (!init.empty()) return load_checkpoint(init);
  return AttentionSeq2Seq(vocabulary_for(ctx, corpus_files, tmpl), model_from(ctx.cfg));
}

// ---- subcommands --------------------------------------------------------------

inline KeyDefaults io_keys(std::initializer_list<std::string> keys) {
  KeyDefaults k;
  for (const auto& key : keys) k[key] = "";
  return k;
}

inline void cmd_gen_synthetic(const Context& ctx) {
  const auto dir = ctx.require("out");
  const auto spec = synthetic_from(ctx.cfg);
  const auto data = generate_synthetic_bilingual(spec);
  for (const auto* lang : {&data.aux, &data.tgt}) {
    const auto& l = lang->language;
    save_corpus(dir_file(dir, l + ".train.jsonl"), lang->train);
    save_corpus(dir_file(dir, l + ".valid.jsonl"), lang->valid);
    save_corpus(dir_file(dir, l + ".test.jsonl"), lang->test);
    save_corpus(dir_file(dir, l + ".pretrain.jsonl"), lang->pretrain);
    write_file(dir_file(dir, l + ".vocab.txt"), lines_text(lang->vocabulary));
  }
  echo_config(ctx, dir_file(dir, "config.resolved"));
  *ctx.err << "wrote synthetic corpora for " << spec.aux_language << " and " << spec.tgt_language << " to " << dir
           << "\n";
}

inline void cmd_sample_fewshot(const Context& ctx) {
  const auto in = ctx.require("in");
  const auto out = ctx.require("out");
  auto corpus = read_corpus(in, Split::train, ctx.load_options());
  const auto lang = ctx.get("lang");
  if (!lang.empty() && lang != corpus.language()) {
    fail(ErrorCategory::data, in + ": corpus language is '" + corpus.language() + "', expected '" + lang + "'");
  }
  const auto k = detail::get_size(ctx.cfg, "k", 10);
  auto few = sample_few_shot(corpus, k, detail::get_seed(ctx.cfg, "seed"));
  ensure_parent(out);
  save_corpus(out, few);
  echo_config(ctx, out + ".config");
}

inline void cmd_interleave(const Context& ctx) {
  auto aux = read_corpus(ctx.require("aux"), Split::train, ctx.load_options());
  auto tgt = read_corpus(ctx.require("tgt"), Split::train, ctx.load_options());
  const auto out = ctx.require("out");
  auto mixed = interleave_even(aux, tgt);
  ensure_parent(out);
  save_pairs(out, mixed.pairs);
  echo_config(ctx, out + ".config");
  *ctx.err << "interleaved " << tgt.size() << " target pairs into " << aux.size() << " auxiliary pairs (block size "
           << mixed.block_size << ")\n";
}

inline void cmd_format(const Context& ctx) {
  const auto in = ctx.require("in");
  const auto out = ctx.require("out");
  const bool prompted = ctx.cfg.get_bool("prompted", false);
  const auto tmpl = template_from(ctx.cfg);
  const auto max_tokens = detail::get_size(ctx.cfg, "max_tokens", 64);
  std::string text;
  for (const auto& p : load_pairs(in, ctx.load_options())) {
    auto ex = format_pair(truncate_pair(p, max_tokens), prompted, tmpl);
    nlohmann::ordered_json j{{"source", ex.source}, {"target", ex.target}, {"lang", p.language()}};
    text += j.dump() + "\n";
  }
  write_file(out, text);
  echo_config(ctx, out + ".config");
}

inline void cmd_pretrain(const Context& ctx) {
  const auto inputs = list_value(ctx.require("inputs"));
  const auto dir = ctx.require("out");
  const auto tmpl = template_from(ctx.cfg);
  std::vector<Corpus> corpora;
  for (const auto& f : inputs) corpora.push_back(read_corpus(f, Split::train, ctx.load_options()));
  auto model = initial_model(ctx, inputs, tmpl);
  const auto steps = pretrain_span_corruption(model, corpora, corruption_from(ctx.cfg),
                                              optimizer_from(ctx.cfg, "pretrain"), tmpl,
                                              detail::get_seed(ctx.cfg, "seed"));
  save_checkpoint(dir_file(dir, "model.ckpt"), model, CheckpointMeta{steps, std::nullopt});
  echo_config(ctx, dir_file(dir, "config.resolved"));
  *ctx.err << "pretrained for " << steps << " steps\n";
}

/// Writes the selected checkpoint, the stage history and a copy of the spec.
inline void write_stage(const Context& ctx, const std::string& dir, const AttentionSeq2Seq& model,
                        const StageRecord& rec, const ExperimentSpec& spec) {
  save_checkpoint(dir_file(dir, "model.ckpt"), model, CheckpointMeta{rec.selected_step, rec.selected_loss});
  write_file(dir_file(dir, "history.json"), to_json(rec).dump(2) + "\n");
  write_file(dir_file(dir, "spec.json"), to_json(spec).dump(2) + "\n");
  echo_config(ctx, dir_file(dir, "config.resolved"));
  *ctx.err << rec.name << ": " << rec.steps << " steps, selected step " << rec.selected_step << " (validation loss "
           << rec.selected_loss << " on " << rec.validation_language << ")\n";
}

inline void cmd_train(const Context& ctx) {
  const auto spec = experiment_from(ctx.cfg);
  const auto train_path = ctx.require("train");
  const auto valid_path = ctx.require("valid");
  const auto dir = ctx.require("out");
  auto train = read_corpus(train_path, Split::train, ctx.load_options());
  auto valid = read_corpus(valid_path, Split::valid, ctx.load_options());
  std::vector<std::string> files{train_path, valid_path};
  StageRecord rec;
  if (spec.scenario == Scenario::mtl) {
    const auto few_path = ctx.require("fewshot");
    files.push_back(few_path);
    auto few = read_corpus(few_path, Split::train, ctx.load_options());
    auto model = initial_model(ctx, files, spec.prompt);
    auto mixed = interleave_even(train, few);
    rec = run_stage(model, "multitask-training", mixed.pairs, valid, spec.prompted, spec.train, spec, spec.seed);
    write_stage(ctx, dir, model, rec, spec);
  } else {
    if (!ctx.get("fewshot").empty()) fail(ErrorCategory::config, "'fewshot' only applies to MTL");
    auto model = initial_model(ctx, files, spec.prompt);
    const bool prompted = spec.prompted && !spec.prompt_stage2_only;
    rec = run_stage(model, "source-training", train.pairs(), valid, prompted, spec.train, spec, spec.seed);
    write_stage(ctx, dir, model, rec, spec);
  }
}

/// Second FS-XLT stage. It draws from seed + 1, as run_fs_xlt does, so a
/// train/adapt pipeline with one --seed matches the in-process run.
inline void cmd_adapt(const Context& ctx) {
  const auto spec = experiment_from(ctx.cfg);
  if (spec.scenario != Scenario::fs_xlt) fail(ErrorCategory::config, "adapt only applies to scenario FS-XLT");
  auto model = load_checkpoint(ctx.require("init"));
  auto few = read_corpus(ctx.require("train"), Split::train, ctx.load_options());
  auto valid = read_corpus(ctx.require("valid"), Split::valid, ctx.load_options());
  const auto dir = ctx.require("out");
  auto rec = run_stage(model, "target-adapting", few.pairs(), valid, spec.prompted, spec.adapt, spec, spec.seed + 1);
  write_stage(ctx, dir, model, rec, spec);
}

inline void cmd_generate(const Context& ctx) {
  const auto spec = experiment_from(ctx.cfg);
  auto model = load_checkpoint(ctx.require("model"));
  auto test = read_corpus(ctx.require("test"), Split::test, ctx.load_options());
  const auto out = ctx.require("out");
  RunReport report;
  generate_hypotheses(model, test, spec.prompted, spec, report);
  write_file(out, lines_text(report.hypotheses));
  echo_config(ctx, out + ".config");
}

inline void cmd_evaluate(const Context& ctx) {
  auto hyps = read_lines(ctx.require("hyp"));
  auto refs_corpus = read_corpus(ctx.require("ref"), Split::test, ctx.load_options());
  const auto out = ctx.require("out");
  std::vector<std::string> refs;
  for (const auto& p : refs_corpus) refs.push_back(p.response());
  if (hyps.size() != refs.size()) {
    fail(ErrorCategory::data, "hypothesis file has " + std::to_string(hyps.size()) + " lines for " +
                                  std::to_string(refs.size()) + " references");
  }
  std::unordered_set<std::string> vocab;
  const auto vocab_path = ctx.get("vocab");
  if (!vocab_path.empty()) {
    for (const auto& line : read_lines(vocab_path)) {
      auto t = trim(line);
      if (!t.empty()) vocab.emplace(t);
    }
  }
  auto report = evaluate_hypotheses(ctx.require("system"), hyps, refs, vocab_path.empty() ? nullptr : &vocab,
                                    bleu_from(ctx.cfg));
  write_file(out, to_json(report).dump() + "\n");
  echo_config(ctx, out + ".config");
  *ctx.out << report.system << ": B-1 " << report.bleu.b1() << " B-2 " << report.bleu.b2() << " score "
           << report.bleu.score << " bp " << report.bleu.bp;
  if (report.legality) *ctx.out << " legality " << report.legality->legality;
  *ctx.out << "\n";
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : list_value(s)) {
    KeyValueConfig one;
    one.set("seeds", part);
    auto v = one.get_int("seeds", 0);
    if (v < 0) fail(ErrorCategory::config, "seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) fail(ErrorCategory::config, "seeds must list at least one seed");
  return seeds;
}

inline std::string tsv_row(const std::vector<std::string>& cells) {
  std::vector<std::string> esc;
  for (const auto& c : cells) esc.push_back(tsv_escape(c));
  return join(esc, "\t") + "\n";
}

inline void cmd_study(const Context& ctx) {
  const auto cfg = study_from(ctx.cfg);
  const auto seeds = parse_seeds(ctx.require("seeds"));
  const auto dir = ctx.require("out");
  auto* err = ctx.err;
  auto report = run_forgetting_study(cfg, seeds, [err](const std::string& msg) { *err << msg << "\n"; });
  write_file(dir_file(dir, "study.json"), to_json(report).dump(2) + "\n");
  std::string summary = tsv_row({"setting", "runs", "legality", "b1", "b2", "score", "bp", "d1", "d2"});
  for (const auto& s : report.summary) {
    summary += tsv_row({s.setting, std::to_string(s.runs), detail::num(s.legality), detail::num(s.b1),
                        detail::num(s.b2), detail::num(s.score), detail::num(s.bp), detail::num(s.d1),
                        detail::num(s.d2)});
  }
  write_file(dir_file(dir, "summary.tsv"), summary);
  std::string samples = tsv_row({"seed", "context", "setting", "response"});
  for (const auto& s : report.samples) samples += tsv_row({std::to_string(s.seed), s.context, s.setting, s.response});
  write_file(dir_file(dir, "samples.tsv"), samples);
  for (const auto& run : report.runs) {
    write_file(dir_file(dir, "hyp/seed" + std::to_string(run.seed) + "." + run.report.spec.setting() + ".txt"),
               lines_text(run.report.hypotheses));
  }
  echo_config(ctx, dir_file(dir, "config.resolved"));
  *ctx.out << summary;
  *ctx.err << "study finished in " << report.wall_seconds << " s\n";
}

inline void cmd_humaneval_export(const Context& ctx) {
  auto hyps_a = read_lines(ctx.require("hyp_a"));
  auto hyps_b = read_lines(ctx.require("hyp_b"));
  auto test = read_corpus(ctx.require("test"), Split::test, ctx.load_options());
  const auto dir = ctx.require("out");
  auto samples = export_pairs(hyps_a, ctx.require("system_a"), hyps_b, ctx.require("system_b"), test,
                              detail::get_size(ctx.cfg, "n", 100), detail::get_seed(ctx.cfg, "seed"),
                              ctx.cfg.get_bool("allow_cross_family", false));
  write_sheet(dir_file(dir, "sheet.tsv"), samples);
  write_key(dir_file(dir, "key.tsv"), samples);
  echo_config(ctx, dir_file(dir, "config.resolved"));
}

inline void cmd_humaneval_aggregate(const Context& ctx) {
  auto sheets = list_value(ctx.require("sheets"));
  auto keys = list_value(ctx.require("keys"));
  if (sheets.size() != keys.size()) {
    fail(ErrorCategory::usage, "each sheet needs its own key file (" + std::to_string(sheets.size()) + " sheets, " +
                                   std::to_string(keys.size()) + " keys)");
  }
  std::vector<AnnotatedSheet> annotated;
  for (std::size_t i = 0; i < sheets.size(); ++i) annotated.push_back({read_sheet(sheets[i]), read_key(keys[i])});
  auto rep = aggregate_votes(annotated, ctx.strict);
  for (const auto& s : rep.skipped) *ctx.err << "warning: skipped " << s << "\n";
  const auto table = render_win_rates(rep);
  *ctx.out << table;
  const auto out = ctx.get("out");
  if (!out.empty()) {
    nlohmann::ordered_json j;
    j["total"] = rep.total;
    j["neutral"] = {{"count", rep.neutral}, {"percent", format_percent(rep.neutral, rep.total)}};
    j["systems"] = nlohmann::ordered_json::array();
    for (const auto& s : rep.systems) {
      j["systems"].push_back(
          {{"system", s}, {"count", rep.wins.at(s)}, {"percent", format_percent(rep.wins.at(s), rep.total)}});
    }
    j["skipped"] = rep.skipped;
    write_file(out, j.dump(2) + "\n");
    echo_config(ctx, out + ".config");
  }
}

// ---- command table ------------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  KeyDefaults defaults;
  std::vector<FlagSpec> flags;
  void (*run)(const Context&);
};

inline std::vector<Command> commands() {
  const FlagSpec in{"in", "in", "input corpus file"};
  const FlagSpec prompted{"prompted", "prompted", "true to use the prompt template"};
  const FlagSpec init{"init", "init", "checkpoint to start from"};
  std::vector<Command> cmds;

  KeyDefaults gen{{"seed", "0"}};
  add_defaults(gen, synthetic_keys());
  add_defaults(gen, io_keys({"out"}));
  cmds.push_back({"gen-synthetic", "write a synthetic bilingual corpus set", gen, {}, cmd_gen_synthetic});

  KeyDefaults fs{{"seed", "0"}, {"k", "10"}, {"lang", ""}};
  add_defaults(fs, io_keys({"in", "out"}));
  cmds.push_back({"sample-fewshot",
                  "draw k training pairs",
                  fs,
                  {in, {"k", "k", "number of pairs"}, {"lang", "lang", "expected language code"}},
                  cmd_sample_fewshot});

  KeyDefaults il{{"seed", "0"}};
  add_defaults(il, io_keys({"aux", "tgt", "out"}));
  cmds.push_back({"interleave",
                  "spread target pairs evenly through the auxiliary corpus",
                  il,
                  {{"aux", "aux", "auxiliary corpus"}, {"tgt", "tgt", "target few-shot corpus"}},
                  cmd_interleave});

  KeyDefaults fm{{"seed", "0"}, {"prompted", "false"}, {"max_tokens", "64"}};
  add_defaults(fm, template_keys());
  add_defaults(fm, io_keys({"in", "out"}));
  cmds.push_back({"format", "format pairs as model source/target text", fm, {in, prompted}, cmd_format});

  KeyDefaults pt{{"seed", "0"}};
  add_defaults(pt, optimizer_keys("pretrain", OptimizerConfig::source_training()));
  add_defaults(pt, corruption_keys());
  add_defaults(pt, model_keys());
  add_defaults(pt, template_keys());
  add_defaults(pt, io_keys({"inputs", "out", "init", "vocab_from"}));
  cmds.push_back({"pretrain",
                  "span-corruption pretraining on corpora in two or more languages",
                  pt,
                  {{"inputs", "inputs", "comma-separated corpus files"}, init,
                   {"vocab-from", "vocab_from", "extra corpora for the vocabulary"}},
                  cmd_pretrain});

  KeyDefaults tr = experiment_keys();
  add_defaults(tr, model_keys());
  add_defaults(tr, io_keys({"train", "valid", "fewshot", "init", "vocab_from", "out"}));
  cmds.push_back({"train",
                  "source-training (FT, FS-XLT) or multitask training (MTL)",
                  tr,
                  {{"train", "train", "training corpus (auxiliary corpus for MTL)"},
                   {"valid", "valid", "validation corpus used for selection"},
                   {"fewshot", "fewshot", "target few-shot corpus (MTL)"},
                   init,
                   {"vocab-from", "vocab_from", "extra corpora for the vocabulary"},
                   {"scenario", "scenario", "FT, FS-XLT or MTL"},
                   prompted},
                  cmd_train});

  KeyDefaults ad = experiment_keys();
  ad["scenario"] = "FS-XLT";
  add_defaults(ad, io_keys({"init", "train", "valid", "out"}));
  cmds.push_back({"adapt",
                  "target-adapting on few-shot target pairs",
                  ad,
                  {init, {"train", "train", "few-shot target corpus"}, {"valid", "valid", "target validation corpus"},
                   prompted},
                  cmd_adapt});

  KeyDefaults ge = experiment_keys();
  add_defaults(ge, io_keys({"model", "test", "out"}));
  cmds.push_back({"generate",
                  "greedy responses for a test corpus, one per line",
                  ge,
                  {{"model", "model", "checkpoint"}, {"test", "test", "test corpus"}, prompted},
                  cmd_generate});

  KeyDefaults ev{{"seed", "0"}, {"system", "system"}};
  add_defaults(ev, bleu_keys());
  add_defaults(ev, io_keys({"hyp", "ref", "vocab", "out"}));
  cmds.push_back({"evaluate",
                  "BLEU, Distinct-N and language legality for a hypothesis file",
                  ev,
                  {{"hyp", "hyp", "hypothesis file"},
                   {"ref", "ref", "reference corpus"},
                   {"vocab", "vocab", "target vocabulary file, one token per line"},
                   {"system", "system", "system name for the report"},
                   {"report", "out", "report file (same as --out)"}},
                  cmd_evaluate});

  KeyDefaults st = study_keys();
  st["seeds"] = "0,1,2";
  add_defaults(st, io_keys({"out"}));
  cmds.push_back({"study",
                  "desk-scale forgetting study over four settings",
                  st,
                  {{"seeds", "seeds", "comma-separated model seeds"}, {"spec", "", "same as --config"}},
                  cmd_study});

  KeyDefaults he{{"seed", "0"}, {"n", "100"}, {"allow_cross_family", "false"}};
  add_defaults(he, io_keys({"hyp_a", "system_a", "hyp_b", "system_b", "test", "out"}));
  cmds.push_back({"humaneval-export",
                  "blinded pairwise sheet plus key file",
                  he,
                  {{"hyp-a", "hyp_a", "hypotheses of system A"},
                   {"system-a", "system_a", "name of system A"},
                   {"hyp-b", "hyp_b", "hypotheses of system B"},
                   {"system-b", "system_b", "name of system B"},
                   {"test", "test", "test corpus the hypotheses align with"},
                   {"n", "n", "number of samples"}},
                  cmd_humaneval_export});

  KeyDefaults ha{{"seed", "0"}};
  add_defaults(ha, io_keys({"sheets", "keys", "out"}));
  cmds.push_back({"humaneval-aggregate",
                  "unblind annotated sheets and count votes",
                  ha,
                  {{"sheets", "sheets", "comma-separated annotated sheets"},
                   {"keys", "keys", "comma-separated key files, one per sheet"}},
                  cmd_humaneval_aggregate});
  return cmds;
}

/// Parses and runs one invocation. Returns the process exit status; errors
/// are reported on `err` as a single `error[category]: message` line.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  if (args.empty()) {
    err << "error[usage]: no subcommand given\n" << usage();
    return 2;
  }
  if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    out << usage();
    return 0;
  }
  const auto cmds = commands();
  auto it = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == args[0]; });
  if (it == cmds.end()) {
    err << "error[usage]: unknown subcommand '" << args[0] << "'\n" << usage();
    return 2;
  }
  const Command& cmd = *it;

  CLI::App app("xlingua " + cmd.name + ": " + cmd.help, "xlingua " + cmd.name);
  std::string config_path;
  std::map<std::string, std::string> flag_values;
  std::vector<std::string> overrides;
  bool strict = false;
  app.add_option("--config", config_path, "flat key = value config file");
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;
  flag_options.emplace_back("seed", app.add_option("--seed", flag_values["seed"], "random seed"));
  flag_options.emplace_back("out", app.add_option("--out", flag_values["out"], "output path"));
  for (const auto& f : cmd.flags) {
    if (f.key.empty()) {
      app.add_option("--" + f.flag, config_path, f.help);
      continue;
    }
    flag_options.emplace_back(f.key, app.add_option("--" + f.flag, flag_values[f.key], f.help));
  }
  app.add_flag("--strict", strict, "reject bad input records instead of skipping them");
  app.add_option("overrides", overrides, "key=value overrides");

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) cfg.set(key, flag_values[key]);
    }
    if (strict) cfg.set("strict", "true");
    if (cfg.contains("command") && cfg.get_string("command", "") != cmd.name) {
      fail(ErrorCategory::config, "config was written for '" + cfg.get_string("command", "") + "', not '" +
                                      cmd.name + "'");
    }
    KeyDefaults defaults = cmd.defaults;
    defaults["command"] = cmd.name;
    defaults["strict"] = "false";
    Context ctx;
    ctx.command = cmd.name;
    ctx.cfg = resolve(cfg, defaults);
    ctx.cfg.set("command", cmd.name);
    ctx.strict = ctx.cfg.get_bool("strict", false);
    ctx.out = &out;
    ctx.err = &err;
    cmd.run(ctx);
    return 0;
  } catch (const Error& e) {
    err << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error[io]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace xlingua::cli
