#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xlingua/corpus.hpp"
#include "xlingua/rng.hpp"

namespace xlingua::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("xlingua_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Random lowercase word of 1..max_len letters.
inline std::string random_word(Rng& rng, std::size_t max_len = 6) {
  std::string w;
  const auto len = 1 + rng.below(max_len);
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(26));
  return w;
}

inline std::string random_sentence(Rng& rng, std::size_t min_words, std::size_t max_words) {
  const auto n = min_words + rng.below(max_words - min_words + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + random_word(rng);
  return s;
}

inline Corpus numbered_corpus(const std::string& lang, std::size_t n, Split split = Split::train) {
  std::vector<DialoguePair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    pairs.emplace_back(lang + " context " + std::to_string(i), lang + " response " + std::to_string(i), lang);
  }
  return Corpus(lang, split, std::move(pairs));
}

// Brute force: every n-gram as a joined string, counted by sort + unique.
inline double distinct_oracle(const std::vector<std::string>& hyps, std::size_t n) {
  std::vector<std::string> grams;
  for (const auto& h : hyps) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : h + " ") {
      if (c == ' ') {
        if (!cur.empty()) toks.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string g;
      for (std::size_t k = 0; k < n; ++k) g += toks[i + k] + '\x1f';
      grams.push_back(g);
    }
  }
  const double total = static_cast<double>(grams.size());
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return 100.0 * static_cast<double>(grams.size()) / total;
}

}  // namespace xlingua::testing
