#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xlingua/corpus.hpp"
#include "xlingua/error.hpp"
#include "xlingua/rng.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

// Blinded pairwise fluency judgements. The sheet shown to annotators has
// columns id, context, response_left, response_right, choice; which system sits
// on which side is recorded only in a separate key file (id, left_system,
// right_system).

struct PairedSample {
  std::string id;
  std::string context;
  std::string response_left;
  std::string response_right;
  std::string left_system;
  std::string right_system;
  std::string language;
};

/// "FS-XLT_pmpt" and "FS-XLT" belong to the same family.
inline std::string setting_family(std::string_view system) {
  constexpr std::string_view suffix = "_pmpt";
  if (system.size() > suffix.size() && system.substr(system.size() - suffix.size()) == suffix) {
    system.remove_suffix(suffix.size());
  }
  return std::string(system);
}

/// Draws n test contexts (in corpus order) and flips a fair coin per sample
/// for the left/right placement.
inline std::vector<PairedSample> export_pairs(const std::vector<std::string>& hyps_a, const std::string& system_a,
                                              const std::vector<std::string>& hyps_b, const std::string& system_b,
                                              const Corpus& test, std::size_t n, std::uint64_t seed,
                                              bool allow_cross_family = false) {
  if (hyps_a.size() != test.size() || hyps_b.size() != test.size()) {
    fail(ErrorCategory::precondition, "hypothesis files are not aligned with the test corpus (" +
                                          std::to_string(hyps_a.size()) + ", " + std::to_string(hyps_b.size()) +
                                          " lines for " + std::to_string(test.size()) + " test pairs)");
  }
  if (system_a == system_b) fail(ErrorCategory::precondition, "cannot pair a system with itself");
  if (!allow_cross_family && setting_family(system_a) != setting_family(system_b)) {
    fail(ErrorCategory::precondition, "systems '" + system_a + "' and '" + system_b +
                                          "' are from different setting families");
  }
  if (n > test.size()) {
    fail(ErrorCategory::precondition, "cannot pick " + std::to_string(n) + " samples from a test set of " +
                                          std::to_string(test.size()));
  }
  Rng rng(seed);
  auto picked = rng.sample_indices(test.size(), n);
  std::vector<PairedSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < picked.size(); ++k) {
    const auto i = picked[k];
    PairedSample s;
    s.id = std::to_string(k + 1);
    s.context = test[i].context();
    s.language = test.language();
    if (rng.coin()) {
      s.response_left = hyps_b[i], s.left_system = system_b;
      s.response_right = hyps_a[i], s.right_system = system_a;
    } else {
      s.response_left = hyps_a[i], s.left_system = system_a;
      s.response_right = hyps_b[i], s.right_system = system_b;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---- delimited files ---------------------------------------------------------

inline std::string tsv_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tsv_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      out += n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

inline constexpr std::string_view kSheetHeader = "id\tcontext\tresponse_left\tresponse_right\tchoice";
inline constexpr std::string_view kKeyHeader = "id\tleft_system\tright_system";

inline void write_sheet(const std::string& path, const std::vector<PairedSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write sheet '" + path + "'");
  out << kSheetHeader << '\n';
  for (const auto& s : samples) {
    out << tsv_escape(s.id) << '\t' << tsv_escape(s.context) << '\t' << tsv_escape(s.response_left) << '\t'
        << tsv_escape(s.response_right) << '\t' << '\n';
  }
}

inline void write_key(const std::string& path, const std::vector<PairedSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write key file '" + path + "'");
  out << kKeyHeader << '\n';
  for (const auto& s : samples) out << tsv_escape(s.id) << '\t' << tsv_escape(s.left_system) << '\t' << tsv_escape(s.right_system) << '\n';
}

namespace detail {

inline std::vector<std::vector<std::string>> read_table(const std::string& path, std::string_view header,
                                                        std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    fail(ErrorCategory::data, path + ": expected header '" + std::string(header) + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split(line, '\t');
    if (cells.size() != columns) {
      fail(ErrorCategory::data, path + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                                    " columns, found " + std::to_string(cells.size()));
    }
    for (auto& c : cells) c = tsv_unescape(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace detail

struct SheetRow {
  std::string id;
  std::string context;
  std::string response_left;
  std::string response_right;
  std::string choice;
};

inline std::vector<SheetRow> read_sheet(const std::string& path) {
  std::vector<SheetRow> rows;
  for (auto& c : detail::read_table(path, kSheetHeader, 5)) {
    rows.push_back(SheetRow{c[0], c[1], c[2], c[3], std::string(trim(c[4]))});
  }
  return rows;
}

struct KeyRow {
  std::string left_system;
  std::string right_system;
};

inline std::map<std::string, KeyRow> read_key(const std::string& path) {
  std::map<std::string, KeyRow> key;
  for (auto& c : detail::read_table(path, kKeyHeader, 3)) {
    if (!key.emplace(c[0], KeyRow{c[1], c[2]}).second) {
      fail(ErrorCategory::data, path + ": duplicate sample id '" + c[0] + "'");
    }
  }
  return key;
}

/// Results for one pairing. Percentages are derived from the integer counts
/// only when printed.
struct WinRateReport {
  std::vector<std::string> systems;  // sorted, so the plain setting comes first
  std::map<std::string, std::size_t> wins;
  std::size_t neutral = 0;
  std::size_t total = 0;
  std::vector<std::string> skipped;  // rows rejected in lenient mode

  double percent(std::size_t count) const {
    return total ? 100.0 * static_cast<double>(count) / static_cast<double>(total) : 0.0;
  }
};

/// Formats count/total as a percentage with at most two decimals and no
/// trailing zeros, e.g. 62 -> "62%", 1/3 -> "33.33%".
inline std::string format_percent(std::size_t count, std::size_t total) {
  if (total == 0) return "0%";
  // round half up at two decimals, in integers
  const unsigned long long hundredths = (20000ULL * count + total) / (2ULL * total);
  std::string s = std::to_string(hundredths / 100);
  const auto frac = hundredths % 100;
  if (frac) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ".%02llu", frac);
    std::string f(buf);
    while (f.back() == '0') f.pop_back();
    s += f;
  }
  return s + "%";
}

/// Table rows in the order plain system, Neutral, prompted system:
///   FS-XLT       29 (29%)
inline std::string render_win_rates(const WinRateReport& r) {
  std::vector<std::pair<std::string, std::size_t>> rows;
  if (!r.systems.empty()) rows.emplace_back(r.systems.front(), r.wins.at(r.systems.front()));
  rows.emplace_back("Neutral", r.neutral);
  for (std::size_t i = 1; i < r.systems.size(); ++i) rows.emplace_back(r.systems[i], r.wins.at(r.systems[i]));
  std::size_t width = 0;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::string out;
  for (const auto& [name, count] : rows) {
    out += name + std::string(width - name.size() + 2, ' ') + std::to_string(count) + " (" +
           format_percent(count, r.total) + ")\n";
  }
  return out;
}

struct AnnotatedSheet {
  std::vector<SheetRow> rows;
  std::map<std::string, KeyRow> key;
};

/// Unblinds each sheet with its key and sums the counts. In strict mode any
/// row without a Left/Right/Neutral choice aborts with the offending rows
/// listed; otherwise such rows are skipped and reported. Unknown sample ids
/// always fail.
inline WinRateReport aggregate_votes(const std::vector<AnnotatedSheet>& sheets, bool strict = true) {
  WinRateReport rep;
  std::set<std::string> systems;
  std::vector<std::string> invalid;
  struct Vote {
    std::string winner;  // empty for Neutral
  };
  std::vector<Vote> votes;
  for (std::size_t s = 0; s < sheets.size(); ++s) {
    for (const auto& row : sheets[s].rows) {
      auto it = sheets[s].key.find(row.id);
      if (it == sheets[s].key.end()) fail(ErrorCategory::data, "sample id '" + row.id + "' is not in the key file");
      systems.insert(it->second.left_system);
      systems.insert(it->second.right_system);
      std::string choice = row.choice;
      std::transform(choice.begin(), choice.end(), choice.begin(), [](unsigned char c) { return std::tolower(c); });
      if (choice == "left") {
        votes.push_back({it->second.left_system});
      } else if (choice == "right") {
        votes.push_back({it->second.right_system});
      } else if (choice == "neutral") {
        votes.push_back({""});
      } else {
        invalid.push_back("sheet " + std::to_string(s + 1) + " id " + row.id +
                          (row.choice.empty() ? " (missing choice)" : " (invalid choice '" + row.choice + "')"));
      }
    }
  }
  if (!invalid.empty() && strict) {
    fail(ErrorCategory::data, "rows without a valid choice: " + join(invalid, "; "));
  }
  if (systems.size() > 2) fail(ErrorCategory::data, "sheets mix more than two systems");
  rep.systems.assign(systems.begin(), systems.end());
  for (const auto& s : rep.systems) rep.wins[s] = 0;
  for (const auto& v : votes) {
    if (v.winner.empty()) {
      ++rep.neutral;
    } else {
      ++rep.wins[v.winner];
    }
    ++rep.total;
  }
  rep.skipped = std::move(invalid);
  return rep;
}

}  // namespace xlingua
