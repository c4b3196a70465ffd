#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "xlingua/config.hpp"
#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"
#include "xlingua/rng.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

/// Hand-written prompt strings plus the two span-corruption sentinels.
struct PromptTemplate {
  std::string context_prefix = "Context:";
  std::string response_prefix = "Response:";
  std::string sentinel0 = "<extra_id_0>";
  std::string sentinel1 = "<extra_id_1>";

  void validate() const {
    for (const auto* f : {&context_prefix, &response_prefix, &sentinel0, &sentinel1}) {
      if (f->empty()) fail(ErrorCategory::config, "prompt template fields must be non-empty");
    }
    for (const auto* s : {&sentinel0, &sentinel1}) {
      if (std::any_of(s->begin(), s->end(), is_space)) {
        fail(ErrorCategory::config, "sentinel '" + *s + "' contains whitespace");
      }
    }
    if (sentinel0 == sentinel1) fail(ErrorCategory::config, "the two sentinels must differ");
  }

  static PromptTemplate from_config(const KeyValueConfig& cfg) {
    cfg.require_known({"context_prefix", "response_prefix", "sentinel0", "sentinel1"});
    PromptTemplate t;
    t.context_prefix = cfg.get_string("context_prefix", t.context_prefix);
    t.response_prefix = cfg.get_string("response_prefix", t.response_prefix);
    t.sentinel0 = cfg.get_string("sentinel0", t.sentinel0);
    t.sentinel1 = cfg.get_string("sentinel1", t.sentinel1);
    t.validate();
    return t;
  }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// A (source, target) training pair after formatting.
struct FormattedExample {
  std::string source;
  std::string target;
  bool prompted = false;

  friend bool operator==(const FormattedExample&, const FormattedExample&) = default;
};

/// Context side:  `<context_prefix> X <response_prefix> <sentinel0>`
/// Response side: `<sentinel0> Y <sentinel1>`
inline FormattedExample format_prompted(const DialoguePair& pair, const PromptTemplate& tmpl = {}) {
  for (const auto* text : {&pair.context(), &pair.response()}) {
    for (const auto* s : {&tmpl.sentinel0, &tmpl.sentinel1}) {
      if (text->find(*s) != std::string::npos) {
        fail(ErrorCategory::data, "dialogue text contains the sentinel '" + *s + "'");
      }
    }
  }
  FormattedExample ex;
  ex.source = tmpl.context_prefix + " " + pair.context() + " " + tmpl.response_prefix + " " + tmpl.sentinel0;
  ex.target = tmpl.sentinel0 + " " + pair.response() + " " + tmpl.sentinel1;
  ex.prompted = true;
  return ex;
}

/// Baseline layout: raw context in, raw response out.
inline FormattedExample format_plain(const DialoguePair& pair) {
  return FormattedExample{pair.context(), pair.response(), false};
}

inline FormattedExample format_pair(const DialoguePair& pair, bool prompted, const PromptTemplate& tmpl = {}) {
  return prompted ? format_prompted(pair, tmpl) : format_plain(pair);
}

template <typename Pairs>
std::vector<FormattedExample> format_all(const Pairs& pairs, bool prompted, const PromptTemplate& tmpl = {}) {
  std::vector<FormattedExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(format_pair(p, prompted, tmpl));
  return out;
}

/// Recovers the response from generated text. Total: falls back to the whole
/// input when sentinel0 is missing and to the tail when sentinel1 is missing.
inline std::string extract_response(std::string_view generated, const PromptTemplate& tmpl = {}) {
  auto open = generated.find(tmpl.sentinel0);
  if (open == std::string_view::npos) return std::string(trim(generated));
  auto body = generated.substr(open + tmpl.sentinel0.size());
  auto close = body.find(tmpl.sentinel1);
  if (close != std::string_view::npos) body = body.substr(0, close);
  return std::string(trim(body));
}

/// Drops any sentinel tokens still present in a response, e.g. when a model
/// emits sentinel0 twice. Remaining tokens are re-joined with single spaces.
inline std::string strip_sentinels(std::string_view response, const PromptTemplate& tmpl = {}) {
  std::vector<std::string> kept;
  for (auto& t : split_whitespace(response)) {
    if (t != tmpl.sentinel0 && t != tmpl.sentinel1) kept.push_back(std::move(t));
  }
  return join(kept, " ");
}

struct SpanCorruption {
  FormattedExample example;
  /// Set when the rate rounded to zero noise tokens and the text was passed
  /// through unchanged with an empty target.
  bool identity = false;
};

/// Replaces tokens [start, start+length) with sentinel0 in the source; the
/// target is `sentinel0 <span> sentinel1`.
inline SpanCorruption corrupt_span_at(const std::vector<std::string>& tokens, std::size_t start,
                                      std::size_t length, const PromptTemplate& tmpl = {}) {
  if (length == 0 || start + length > tokens.size()) {
    fail(ErrorCategory::precondition, "span [" + std::to_string(start) + ", " +
                                          std::to_string(start + length) + ") out of range");
  }
  std::vector<std::string> src(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(start));
  src.push_back(tmpl.sentinel0);
  src.insert(src.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start + length), tokens.end());
  std::vector<std::string> tgt{tmpl.sentinel0};
  tgt.insert(tgt.end(), tokens.begin() + static_cast<std::ptrdiff_t>(start),
             tokens.begin() + static_cast<std::ptrdiff_t>(start + length));
  tgt.push_back(tmpl.sentinel1);
  return SpanCorruption{FormattedExample{join(src, " "), join(tgt, " "), true}, false};
}

/// Span corruption with a two-sentinel supply: one noise span of
/// round(n * rate) tokens (clamped to leave at least one source token) at a
/// uniformly drawn offset. T5-style span counting would give
/// max(1, noise / mean_span_length) spans; with only sentinel0 and sentinel1
/// available that count is always capped to one, so mean_span_length is only
/// validated here.
inline SpanCorruption corrupt_spans(std::string_view text, double corruption_rate, double mean_span_length,
                                    const PromptTemplate& tmpl, std::uint64_t seed) {
  if (!(corruption_rate > 0.0 && corruption_rate < 1.0)) {
    fail(ErrorCategory::precondition, "corruption_rate must lie in (0, 1)");
  }
  if (!(mean_span_length > 0.0)) fail(ErrorCategory::precondition, "mean_span_length must be positive");
  auto tokens = split_whitespace(text);
  if (tokens.size() < 2) fail(ErrorCategory::precondition, "span corruption needs at least 2 tokens");
  const auto n = tokens.size();
  auto noise = static_cast<std::size_t>(std::llround(static_cast<double>(n) * corruption_rate));
  if (noise == 0) return SpanCorruption{FormattedExample{join(tokens, " "), "", true}, true};
  noise = std::min(noise, n - 1);
  Rng rng(seed);
  const auto start = static_cast<std::size_t>(rng.below(n - noise + 1));
  return corrupt_span_at(tokens, start, noise, tmpl);
}

}  // namespace xlingua
