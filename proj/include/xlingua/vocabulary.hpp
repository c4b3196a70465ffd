#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlingua/error.hpp"
#include "xlingua/prompting.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

/// Token <-> id bijection. Ids 0..5 are reserved, in this order: padding,
/// unknown, begin-of-sequence, end-of-sequence, sentinel0, sentinel1.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSentinel0 = 4;
  static constexpr int kSentinel1 = 5;
  static constexpr int kReserved = 6;

  Vocabulary() : Vocabulary(PromptTemplate{}, {}) {}

  /// Reserved entries first, then `tokens` (deduplicated, sorted).
  Vocabulary(const PromptTemplate& tmpl, const std::set<std::string>& tokens) {
    for (const auto& t : {std::string("<pad>"), std::string("<unk>"), std::string("<s>"), std::string("</s>"),
                          tmpl.sentinel0, tmpl.sentinel1}) {
      add(t);
    }
    for (const auto& t : tokens) {
      if (!index_.count(t)) add(t);
    }
  }

  /// Exact token list, in id order. Used when loading checkpoints.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < static_cast<std::size_t>(kReserved)) {
      fail(ErrorCategory::data, "vocabulary is missing reserved entries");
    }
    Vocabulary v;
    v.tokens_.clear();
    v.index_.clear();
    for (const auto& t : tokens) {
      if (v.index_.count(t)) fail(ErrorCategory::data, "duplicate vocabulary entry '" + t + "'");
      v.add(t);
    }
    return v;
  }

  /// Collects every whitespace token of the given texts plus the template's
  /// prompt words.
  template <typename Texts>
  static Vocabulary build(const Texts& texts, const PromptTemplate& tmpl = {}) {
    std::set<std::string> toks;
    for (const auto& text : texts) {
      for (auto& t : split_whitespace(text)) toks.insert(std::move(t));
    }
    for (auto& t : split_whitespace(tmpl.context_prefix)) toks.insert(std::move(t));
    for (auto& t : split_whitespace(tmpl.response_prefix)) toks.insert(std::move(t));
    toks.erase(tmpl.sentinel0);
    toks.erase(tmpl.sentinel1);
    return Vocabulary(tmpl, toks);
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  int id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& t : split_whitespace(text)) ids.push_back(id(t));
    return ids;
  }

  /// Joins tokens with single spaces, skipping control entries other than the
  /// sentinels.
  std::string decode(const std::vector<int>& ids) const {
    std::vector<std::string_view> parts;
    for (int i : ids) {
      if (i == kPad || i == kBos || i == kEos) continue;
      parts.push_back(token(i));
    }
    return join(parts, " ");
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& t) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace xlingua
