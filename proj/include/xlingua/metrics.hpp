#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "xlingua/error.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

// ---------------------------------------------------------------------------
// 13a tokenization, the mteval-v13a rule set that sacreBLEU uses by default.

inline std::vector<std::string> tokenize_13a(std::string_view text) {
  std::string line(text);
  auto replace_all = [](std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
      s.replace(pos, from.size(), to);
    }
  };
  replace_all(line, "<skipped>", "");
  replace_all(line, "-\n", "");
  replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all(line, "&quot;", "\"");
    replace_all(line, "&amp;", "&");
    replace_all(line, "&lt;", "<");
    replace_all(line, "&gt;", ">");
  }
  static const std::regex kSymbols(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
  static const std::regex kPeriodCommaAfter(R"(([^0-9])([\.,]))");
  static const std::regex kPeriodCommaBefore(R"(([\.,])([^0-9]))");
  static const std::regex kDashAfterDigit(R"(([0-9])(-))");
  line = " " + line + " ";
  line = std::regex_replace(line, kSymbols, " $1 ");
  line = std::regex_replace(line, kPeriodCommaAfter, "$1 $2 ");
  line = std::regex_replace(line, kPeriodCommaBefore, " $1 $2");
  line = std::regex_replace(line, kDashAfterDigit, "$1 $2 ");
  return split_whitespace(line);
}

// ---------------------------------------------------------------------------
// Corpus BLEU.

enum class Smoothing { none, floor };

inline std::string_view smoothing_name(Smoothing s) { return s == Smoothing::none ? "none" : "floor"; }

inline Smoothing parse_smoothing(std::string_view name) {
  if (name == "none") return Smoothing::none;
  if (name == "floor") return Smoothing::floor;
  fail(ErrorCategory::config, "unknown smoothing '" + std::string(name) + "' (expected none or floor)");
}

struct BleuOptions {
  int max_order = 4;
  Smoothing smoothing = Smoothing::floor;
  double floor_epsilon = 1e-2;  // percent, substituted for zero precisions of order >= 2
  Tokenizer tokenizer = &tokenize_13a;
  std::string tokenizer_name = "13a";
};

/// Precisions are the modified n-gram precisions of the order-4 computation;
/// B-1 and B-2 in reports are precisions[0] and precisions[1].
struct BleuReport {
  std::vector<double> precisions;  // percent, unsmoothed
  double score = 0.0;              // percent
  double bp = 1.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  std::string smoothing;
  double floor_epsilon = 0.0;
  std::string tokenizer;

  double b1() const { return precisions.at(0); }
  double b2() const { return precisions.size() > 1 ? precisions[1] : 0.0; }
};

namespace detail {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline NgramCounts count_ngrams(const std::vector<std::string>& toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace detail

inline BleuReport corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                              const BleuOptions& opts = {}) {
  if (hypotheses.size() != references.size()) {
    fail(ErrorCategory::precondition, "hypothesis/reference count mismatch (" + std::to_string(hypotheses.size()) +
                                          " vs " + std::to_string(references.size()) + ")");
  }
  if (hypotheses.empty()) fail(ErrorCategory::precondition, "BLEU needs at least one segment");
  if (opts.max_order < 1) fail(ErrorCategory::config, "max_order must be at least 1");
  const auto orders = static_cast<std::size_t>(opts.max_order);
  std::vector<std::size_t> matches(orders, 0), totals(orders, 0);
  std::size_t c = 0, r = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    auto hyp = opts.tokenizer(hypotheses[s]);
    auto ref = opts.tokenizer(references[s]);
    c += hyp.size();
    r += ref.size();
    for (std::size_t n = 1; n <= orders; ++n) {
      auto h = detail::count_ngrams(hyp, n);
      auto rc = detail::count_ngrams(ref, n);
      for (const auto& [gram, cnt] : h) {
        totals[n - 1] += cnt;
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += std::min(cnt, it->second);
      }
    }
  }
  if (c == 0) fail(ErrorCategory::precondition, "all hypotheses are empty");

  BleuReport rep;
  rep.hyp_len = c;
  rep.ref_len = r;
  rep.smoothing = std::string(smoothing_name(opts.smoothing));
  rep.floor_epsilon = opts.smoothing == Smoothing::floor ? opts.floor_epsilon : 0.0;
  rep.tokenizer = opts.tokenizer_name;
  rep.bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));

  // Uniform weights over all orders. A zero precision (including an order with
  // no hypothesis n-grams at all) is floored from order 2 up; a zero p1 always
  // gives a zero score.
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < orders; ++n) {
    const double p = totals[n] ? 100.0 * static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
    rep.precisions.push_back(p);
    double used = p;
    if (matches[n] == 0) {
      if (n > 0 && opts.smoothing == Smoothing::floor) {
        used = opts.floor_epsilon;
      } else {
        zero = true;
      }
    }
    if (!zero) log_sum += std::log(used / 100.0);
  }
  rep.score = zero ? 0.0 : 100.0 * rep.bp * std::exp(log_sum / static_cast<double>(orders));
  return rep;
}

// ---------------------------------------------------------------------------
// Distinct-N and language legality.

/// 100 * distinct n-grams / total n-grams, pooled over all hypotheses.
inline double distinct_n(const std::vector<std::string>& hypotheses, std::size_t n,
                         Tokenizer tokenizer = &split_whitespace) {
  if (n == 0) fail(ErrorCategory::precondition, "distinct-n needs n >= 1");
  std::set<std::vector<std::string>> distinct;
  std::size_t total = 0;
  for (const auto& h : hypotheses) {
    auto toks = tokenizer(h);
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      distinct.emplace(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++total;
    }
  }
  if (total == 0) fail(ErrorCategory::precondition, "distinct-" + std::to_string(n) + " is undefined: no n-grams");
  return 100.0 * static_cast<double>(distinct.size()) / static_cast<double>(total);
}

struct DistinctReport {
  double d1 = 0.0;
  double d2 = 0.0;
};

inline DistinctReport distinct_report(const std::vector<std::string>& hypotheses) {
  return DistinctReport{distinct_n(hypotheses, 1), distinct_n(hypotheses, 2)};
}

struct LegalityReport {
  double legality = 0.0;  // percent of whitespace tokens inside the target vocabulary
  std::size_t legal_tokens = 0;
  std::size_t total_tokens = 0;
};

template <typename Vocab>
LegalityReport language_legality(const std::vector<std::string>& hypotheses, const Vocab& target_vocabulary) {
  if (hypotheses.empty()) fail(ErrorCategory::precondition, "legality needs at least one hypothesis");
  if (target_vocabulary.empty()) fail(ErrorCategory::precondition, "legality needs a non-empty vocabulary");
  LegalityReport rep;
  for (const auto& h : hypotheses) {
    for (const auto& tok : split_whitespace(h)) {
      ++rep.total_tokens;
      if (target_vocabulary.count(tok)) ++rep.legal_tokens;
    }
  }
  if (rep.total_tokens == 0) fail(ErrorCategory::precondition, "legality is undefined: hypotheses have no tokens");
  rep.legality = 100.0 * static_cast<double>(rep.legal_tokens) / static_cast<double>(rep.total_tokens);
  return rep;
}

// ---------------------------------------------------------------------------
// Combined report, one JSON record per evaluated system.

struct MetricReport {
  std::string system;
  BleuReport bleu;
  std::optional<DistinctReport> distinct;  // absent when no n-grams were generated
  std::optional<LegalityReport> legality;  // absent without a target vocabulary
};

inline MetricReport evaluate_hypotheses(const std::string& system, const std::vector<std::string>& hypotheses,
                                        const std::vector<std::string>& references,
                                        const std::unordered_set<std::string>* target_vocabulary,
                                        const BleuOptions& opts = {}) {
  MetricReport rep;
  rep.system = system;
  bool any_token = std::any_of(hypotheses.begin(), hypotheses.end(),
                               [](const std::string& h) { return !split_whitespace(h).empty(); });
  if (any_token) {
    rep.bleu = corpus_bleu(hypotheses, references, opts);
  } else {
    // Degenerate system that generated nothing: report zeros instead of failing
    // a whole study.
    if (hypotheses.size() != references.size()) corpus_bleu(hypotheses, references, opts);
    rep.bleu.precisions.assign(static_cast<std::size_t>(opts.max_order), 0.0);
    rep.bleu.score = 0.0;
    rep.bleu.bp = 0.0;
    rep.bleu.smoothing = std::string(smoothing_name(opts.smoothing));
    rep.bleu.floor_epsilon = opts.smoothing == Smoothing::floor ? opts.floor_epsilon : 0.0;
    rep.bleu.tokenizer = opts.tokenizer_name;
    for (const auto& ref : references) rep.bleu.ref_len += opts.tokenizer(ref).size();
  }
  std::size_t bigrams = 0;
  for (const auto& h : hypotheses) {
    auto n = split_whitespace(h).size();
    bigrams += n > 1 ? n - 1 : 0;
  }
  if (any_token && bigrams > 0) rep.distinct = distinct_report(hypotheses);
  if (target_vocabulary && !target_vocabulary->empty()) {
    if (any_token) {
      rep.legality = language_legality(hypotheses, *target_vocabulary);
    } else {
      rep.legality = LegalityReport{0.0, 0, 0};
    }
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["b1"] = r.bleu.b1();
  j["b2"] = r.bleu.b2();
  j["score"] = r.bleu.score;
  j["bp"] = r.bleu.bp;
  j["precisions"] = r.bleu.precisions;
  j["hyp_len"] = r.bleu.hyp_len;
  j["ref_len"] = r.bleu.ref_len;
  j["d1"] = r.distinct ? nlohmann::ordered_json(r.distinct->d1) : nlohmann::ordered_json(nullptr);
  j["d2"] = r.distinct ? nlohmann::ordered_json(r.distinct->d2) : nlohmann::ordered_json(nullptr);
  j["legality"] = r.legality ? nlohmann::ordered_json(r.legality->legality) : nlohmann::ordered_json(nullptr);
  j["smoothing"] = r.bleu.smoothing;
  j["epsilon"] = r.bleu.floor_epsilon;
  j["tokenizer"] = r.bleu.tokenizer;
  return j;
}

}  // namespace xlingua
