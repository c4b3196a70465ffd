#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "xlingua/error.hpp"
#include "xlingua/rng.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

inline bool is_known_language(std::string_view code) {
  // ISO 639-1.
  static constexpr std::string_view kCodes =
      "aa ab ae af ak am an ar as av ay az ba be bg bh bi bm bn bo br bs ca ce ch co cr cs cu cv "
      "cy da de dv dz ee el en eo es et eu fa ff fi fj fo fr fy ga gd gl gn gu gv ha he hi ho hr "
      "ht hu hy hz ia id ie ig ii ik io is it iu ja jv ka kg ki kj kk kl km kn ko kr ks ku kv kw "
      "ky la lb lg li ln lo lt lu lv mg mh mi mk ml mn mr ms mt my na nb nd ne ng nl nn no nr nv "
      "ny oc oj om or os pa pi pl ps pt qu rm rn ro ru rw sa sc sd se sg si sk sl sm sn so sq sr "
      "ss st su sv sw ta te tg th ti tk tl tn to tr ts tt tw ty ug uk ur uz ve vi vo wa wo xh yi "
      "yo za zh zu";
  if (code.size() != 2) return false;
  for (std::size_t i = 0; i + 1 < kCodes.size(); i += 3) {
    if (kCodes.substr(i, 2) == code) return true;
  }
  return false;
}

/// One context/response exchange tagged with its language.
class DialoguePair {
 public:
  DialoguePair(std::string context, std::string response, std::string language)
      : context_(std::move(context)), response_(std::move(response)), language_(std::move(language)) {
    if (trim(context_).empty()) fail(ErrorCategory::data, "dialogue pair has an empty context");
    if (trim(response_).empty()) fail(ErrorCategory::data, "dialogue pair has an empty response");
    if (!is_known_language(language_)) {
      fail(ErrorCategory::data, "unknown language code '" + language_ + "'");
    }
  }

  const std::string& context() const { return context_; }
  const std::string& response() const { return response_; }
  const std::string& language() const { return language_; }

  friend bool operator==(const DialoguePair&, const DialoguePair&) = default;

 private:
  std::string context_;
  std::string response_;
  std::string language_;
};

enum class Split { train, valid, test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  fail(ErrorCategory::usage, "unknown split '" + std::string(name) + "' (expected train, valid or test)");
}

/// An ordered, single-language, split-labelled collection of pairs.
class Corpus {
 public:
  Corpus(std::string language, Split split, std::vector<DialoguePair> pairs = {})
      : language_(std::move(language)), split_(split), pairs_(std::move(pairs)) {
    if (!is_known_language(language_)) {
      fail(ErrorCategory::data, "unknown language code '" + language_ + "'");
    }
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      if (pairs_[i].language() != language_) {
        fail(ErrorCategory::data, "pair " + std::to_string(i + 1) + " has language '" +
                                      pairs_[i].language() + "' in a '" + language_ + "' corpus");
      }
    }
  }

  const std::string& language() const { return language_; }
  Split split() const { return split_; }
  const std::vector<DialoguePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const DialoguePair& operator[](std::size_t i) const { return pairs_[i]; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::string language_;
  Split split_;
  std::vector<DialoguePair> pairs_;
};

struct LoadOptions {
  /// Reject the whole file on the first empty context or response instead of
  /// skipping the record.
  bool strict = false;
  std::function<void(const std::string&)> on_warning = [](const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
  };
};

// Corpus files are JSON Lines: {"context": ..., "response": ..., "lang": ...}.

inline std::string pair_to_json_line(const DialoguePair& p) {
  nlohmann::ordered_json j;
  j["context"] = p.context();
  j["response"] = p.response();
  j["lang"] = p.language();
  return j.dump();
}

/// Reads every record of a corpus file regardless of language. Records with an
/// empty context or response are skipped with a warning (or rejected in strict
/// mode); structural problems always fail, naming the line.
inline std::vector<DialoguePair> load_pairs(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open corpus file '" + path + "'");
  std::vector<DialoguePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCategory::data, where + ": malformed record (not valid JSON)");
    }
    for (const char* field : {"context", "response", "lang"}) {
      if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
        fail(ErrorCategory::data, where + ": malformed record (missing string field '" +
                                      std::string(field) + "')");
      }
    }
    auto context = j["context"].get<std::string>();
    auto response = j["response"].get<std::string>();
    auto lang = j["lang"].get<std::string>();
    if (trim(context).empty() || trim(response).empty()) {
      const std::string msg = where + ": empty " + (trim(context).empty() ? "context" : "response");
      if (opts.strict) fail(ErrorCategory::data, msg);
      if (opts.on_warning) opts.on_warning(msg + ", record skipped");
      continue;
    }
    try {
      pairs.emplace_back(std::move(context), std::move(response), std::move(lang));
    } catch (const Error& e) {
      fail(ErrorCategory::data, where + ": " + e.what());
    }
  }
  return pairs;
}

inline Corpus load_corpus(const std::string& path, const std::string& language, Split split,
                          const LoadOptions& opts = {}) {
  auto pairs = load_pairs(path, opts);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].language() != language) {
      fail(ErrorCategory::data, path + ": record " + std::to_string(i + 1) + " has lang '" +
                                    pairs[i].language() + "', expected '" + language + "'");
    }
  }
  return Corpus(language, split, std::move(pairs));
}

template <typename Pairs>
void save_pairs(const std::string& path, const Pairs& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write corpus file '" + path + "'");
  for (const auto& p : pairs) out << pair_to_json_line(p) << '\n';
  if (!out) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

inline void save_corpus(const std::string& path, const Corpus& corpus) { save_pairs(path, corpus.pairs()); }

/// Uniform k-subset without replacement, returned in original corpus order.
inline Corpus sample_few_shot(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (corpus.split() != Split::train) {
    fail(ErrorCategory::precondition, "few-shot sampling expects a train split, got " +
                                          std::string(split_name(corpus.split())));
  }
  if (k > corpus.size()) {
    fail(ErrorCategory::precondition, "cannot sample k=" + std::to_string(k) + " from a corpus of " +
                                          std::to_string(corpus.size()));
  }
  Rng rng(seed);
  std::vector<DialoguePair> picked;
  picked.reserve(k);
  for (auto i : rng.sample_indices(corpus.size(), k)) picked.push_back(corpus[i]);
  return Corpus(corpus.language(), Split::train, std::move(picked));
}

/// Keeps at most the first `max_tokens` tokens of the context and of the
/// response. Sides already within the limit are returned untouched;
/// truncated sides are re-joined with single spaces.
inline DialoguePair truncate_pair(const DialoguePair& pair, std::size_t max_tokens,
                                  Tokenizer tokenizer = &split_whitespace) {
  if (max_tokens == 0) fail(ErrorCategory::precondition, "max_tokens must be at least 1");
  auto cut = [&](const std::string& text) {
    auto toks = tokenizer(text);
    if (toks.size() <= max_tokens) return text;
    toks.resize(max_tokens);
    return join(toks, " ");
  };
  return DialoguePair(cut(pair.context()), cut(pair.response()), pair.language());
}

// ---------------------------------------------------------------------------
// Synthetic bilingual corpora.
//
// Each language has `vocab_size` tokens named <prefix>000, <prefix>001, ...
// The first `templates` ids are template heads, the next `templates` ids are
// template markers, and the rest are content tokens. A context is
//   head_k c_1 .. c_L          (L = 2 + k % 3)
// and its response is
//   c_L .. c_1 marker_k
// so the mapping is the same in both languages up to the token bijection.

struct SyntheticSpec {
  std::size_t vocab_size = 40;
  std::size_t n_train_aux = 1000;
  std::size_t n_fewshot_tgt = 10;
  std::size_t n_valid = 100;
  std::size_t n_test = 100;
  std::size_t n_pretrain = 0;  // 0 means "same as n_train_aux"
  std::size_t template_count = 6;
  std::uint64_t seed = 0;
  std::string aux_language = "en";
  std::string tgt_language = "da";
  char aux_prefix = 'a';
  char tgt_prefix = 'b';

  std::size_t pretrain_size() const { return n_pretrain ? n_pretrain : n_train_aux; }
};

struct SyntheticLanguageData {
  std::string language;
  Corpus train;     // aux: full training data; tgt: the few-shot examples
  Corpus valid;
  Corpus test;
  Corpus pretrain;  // unlabelled text pool for span-corruption pretraining
  std::vector<std::string> vocabulary;
};

struct SyntheticBilingual {
  SyntheticLanguageData aux;
  SyntheticLanguageData tgt;
};

inline std::string synthetic_token(char prefix, std::size_t id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03zu", prefix, id);
  return buf;
}

inline void validate(const SyntheticSpec& spec) {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) fail(ErrorCategory::config, std::string(name) + " must be positive");
  };
  positive(spec.vocab_size, "vocab_size");
  positive(spec.n_train_aux, "n_train_aux");
  positive(spec.n_fewshot_tgt, "n_fewshot_tgt");
  positive(spec.n_valid, "n_valid");
  positive(spec.n_test, "n_test");
  positive(spec.template_count, "templates");
  if (spec.vocab_size > 1000) fail(ErrorCategory::config, "vocab_size must be at most 1000");
  if (spec.vocab_size < 2 * spec.template_count + 4) {
    fail(ErrorCategory::config, "vocab_size " + std::to_string(spec.vocab_size) + " is too small for " +
                                    std::to_string(spec.template_count) +
                                    " templates (need at least 2*templates + 4)");
  }
  if (spec.aux_prefix == spec.tgt_prefix) {
    fail(ErrorCategory::config, "synthetic languages need distinct token prefixes");
  }
  if (spec.aux_language == spec.tgt_language) {
    fail(ErrorCategory::config, "synthetic languages need distinct language codes");
  }
}

namespace detail {

struct SyntheticDraw {
  std::size_t tmpl;
  std::vector<std::size_t> content;
};

inline SyntheticDraw draw_synthetic(const SyntheticSpec& spec, Rng& rng) {
  SyntheticDraw d;
  d.tmpl = static_cast<std::size_t>(rng.below(spec.template_count));
  const std::size_t length = 2 + d.tmpl % 3;
  const std::size_t first_content = 2 * spec.template_count;
  const std::size_t n_content = spec.vocab_size - first_content;
  for (std::size_t i = 0; i < length; ++i) {
    d.content.push_back(first_content + static_cast<std::size_t>(rng.below(n_content)));
  }
  return d;
}

inline DialoguePair realize(const SyntheticSpec& spec, const SyntheticDraw& d, char prefix,
                            const std::string& lang) {
  std::vector<std::string> ctx{synthetic_token(prefix, d.tmpl)};
  for (auto id : d.content) ctx.push_back(synthetic_token(prefix, id));
  std::vector<std::string> rsp;
  for (auto it = d.content.rbegin(); it != d.content.rend(); ++it) rsp.push_back(synthetic_token(prefix, *it));
  rsp.push_back(synthetic_token(prefix, spec.template_count + d.tmpl));
  return DialoguePair(join(ctx, " "), join(rsp, " "), lang);
}

inline Corpus synthetic_corpus(const SyntheticSpec& spec, Rng& rng, std::size_t n, char prefix,
                               const std::string& lang, Split split) {
  std::vector<DialoguePair> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(realize(spec, draw_synthetic(spec, rng), prefix, lang));
  return Corpus(lang, split, std::move(pairs));
}

}  // namespace detail

inline std::vector<std::string> synthetic_vocabulary(const SyntheticSpec& spec, char prefix) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) v.push_back(synthetic_token(prefix, i));
  return v;
}

/// Deterministic for a fixed spec. Every corpus is drawn from one generator in
/// a fixed order, so changing a size changes all later draws.
inline SyntheticBilingual generate_synthetic_bilingual(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  using detail::synthetic_corpus;
  const auto& al = spec.aux_language;
  const auto& tl = spec.tgt_language;
  const char ap = spec.aux_prefix, tp = spec.tgt_prefix;
  auto aux_train = synthetic_corpus(spec, rng, spec.n_train_aux, ap, al, Split::train);
  auto aux_valid = synthetic_corpus(spec, rng, spec.n_valid, ap, al, Split::valid);
  auto aux_test = synthetic_corpus(spec, rng, spec.n_test, ap, al, Split::test);
  auto tgt_few = synthetic_corpus(spec, rng, spec.n_fewshot_tgt, tp, tl, Split::train);
  auto tgt_valid = synthetic_corpus(spec, rng, spec.n_valid, tp, tl, Split::valid);
  auto tgt_test = synthetic_corpus(spec, rng, spec.n_test, tp, tl, Split::test);
  auto aux_pre = synthetic_corpus(spec, rng, spec.pretrain_size(), ap, al, Split::train);
  auto tgt_pre = synthetic_corpus(spec, rng, spec.pretrain_size(), tp, tl, Split::train);
  return SyntheticBilingual{
      SyntheticLanguageData{al, std::move(aux_train), std::move(aux_valid), std::move(aux_test),
                            std::move(aux_pre), synthetic_vocabulary(spec, ap)},
      SyntheticLanguageData{tl, std::move(tgt_few), std::move(tgt_valid), std::move(tgt_test),
                            std::move(tgt_pre), synthetic_vocabulary(spec, tp)},
  };
}

}  // namespace xlingua
