#include <gtest/gtest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "xlingua/humaneval.hpp"

using namespace xlingua;
using xlingua::testing::numbered_corpus;
using xlingua::testing::TempDir;

namespace {

WinRateReport counts(std::size_t plain, std::size_t neutral, std::size_t pmpt) {
  AnnotatedSheet sheet;
  std::size_t id = 0;
  auto add = [&](const std::string& choice, bool plain_left) {
    auto key = std::to_string(++id);
    sheet.rows.push_back({key, "c", "l", "r", choice});
    sheet.key[key] = plain_left ? KeyRow{"FS-XLT", "FS-XLT_pmpt"} : KeyRow{"FS-XLT_pmpt", "FS-XLT"};
  };
  for (std::size_t i = 0; i < plain; ++i) add(i % 2 ? "Left" : "Right", i % 2 == 1);
  for (std::size_t i = 0; i < neutral; ++i) add("Neutral", i % 2 == 0);
  for (std::size_t i = 0; i < pmpt; ++i) add(i % 2 ? "right" : "left", i % 2 == 1);
  return aggregate_votes({sheet});
}

std::vector<std::string> hyps(const std::string& tag, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tag + " " + std::to_string(i));
  return out;
}

}  // namespace

TEST(FormatPercent, Examples) {
  EXPECT_EQ(format_percent(62, 100), "62%");
  EXPECT_EQ(format_percent(1, 3), "33.33%");
  EXPECT_EQ(format_percent(2, 3), "66.67%");
  EXPECT_EQ(format_percent(1, 8), "12.5%");
  EXPECT_EQ(format_percent(0, 0), "0%");
  EXPECT_EQ(format_percent(7, 7), "100%");
}

TEST(WinRates, RendersCountsAndPercentages) {
  auto r = counts(29, 9, 62);
  EXPECT_EQ(r.total, 100u);
  EXPECT_EQ(r.wins.at("FS-XLT"), 29u);
  EXPECT_EQ(r.wins.at("FS-XLT_pmpt"), 62u);
  EXPECT_EQ(r.neutral, 9u);
  EXPECT_EQ(render_win_rates(r),
            "FS-XLT       29 (29%)\n"
            "Neutral      9 (9%)\n"
            "FS-XLT_pmpt  62 (62%)\n");
}

TEST(WinRates, AllNeutral) {
  auto r = counts(0, 12, 0);
  EXPECT_EQ(r.neutral, 12u);
  EXPECT_EQ(r.wins.at("FS-XLT"), 0u);
  EXPECT_EQ(r.wins.at("FS-XLT_pmpt"), 0u);
  EXPECT_DOUBLE_EQ(r.percent(r.neutral), 100.0);
}

TEST(WinRates, SideSwapLeavesCountsUnchanged) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    AnnotatedSheet a, b;
    for (int i = 0; i < 40; ++i) {
      auto id = std::to_string(i);
      const char* choices[] = {"Left", "Right", "Neutral"};
      std::string c = choices[rng.below(3)];
      KeyRow k = rng.coin() ? KeyRow{"MTL", "MTL_pmpt"} : KeyRow{"MTL_pmpt", "MTL"};
      a.rows.push_back({id, "x", "l", "r", c});
      a.key[id] = k;
      std::string swapped = c == "Left" ? "Right" : c == "Right" ? "Left" : c;
      b.rows.push_back({id, "x", "r", "l", swapped});
      b.key[id] = KeyRow{k.right_system, k.left_system};
    }
    auto ra = aggregate_votes({a}), rb = aggregate_votes({b});
    EXPECT_EQ(ra.wins, rb.wins);
    EXPECT_EQ(ra.neutral, rb.neutral);
  }
}

TEST(WinRates, StrictAndLenient) {
  AnnotatedSheet s;
  s.rows = {{"1", "c", "l", "r", "Left"}, {"2", "c", "l", "r", ""}, {"3", "c", "l", "r", "maybe"}};
  for (auto id : {"1", "2", "3"}) s.key[id] = {"MTL", "MTL_pmpt"};
  EXPECT_THROW(aggregate_votes({s}, true), Error);
  auto r = aggregate_votes({s}, false);
  EXPECT_EQ(r.total, 1u);
  EXPECT_EQ(r.wins.at("MTL"), 1u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_NE(r.skipped[0].find("missing choice"), std::string::npos);
  EXPECT_NE(r.skipped[1].find("maybe"), std::string::npos);

  s.rows.push_back({"9", "c", "l", "r", "Left"});
  EXPECT_THROW(aggregate_votes({s}, false), Error);
}

TEST(ExportPairs, Preconditions) {
  auto test = numbered_corpus("da", 5, Split::test);
  EXPECT_THROW(export_pairs(hyps("a", 4), "FS-XLT", hyps("b", 5), "FS-XLT_pmpt", test, 2, 0), Error);
  EXPECT_THROW(export_pairs(hyps("a", 5), "FS-XLT", hyps("b", 5), "FS-XLT", test, 2, 0), Error);
  EXPECT_THROW(export_pairs(hyps("a", 5), "FS-XLT", hyps("b", 5), "MTL_pmpt", test, 2, 0), Error);
  EXPECT_NO_THROW(export_pairs(hyps("a", 5), "FS-XLT", hyps("b", 5), "MTL_pmpt", test, 2, 0, true));
  EXPECT_THROW(export_pairs(hyps("a", 5), "FS-XLT", hyps("b", 5), "FS-XLT_pmpt", test, 6, 0), Error);
}

TEST(ExportPairs, DeterministicAndCoversTestSet) {
  auto test = numbered_corpus("da", 30, Split::test);
  auto a = hyps("plain", 30), b = hyps("pmpt", 30);
  auto s1 = export_pairs(a, "FS-XLT", b, "FS-XLT_pmpt", test, 30, 11);
  auto s2 = export_pairs(a, "FS-XLT", b, "FS-XLT_pmpt", test, 30, 11);
  ASSERT_EQ(s1.size(), 30u);
  std::set<std::string> contexts;
  std::size_t left_plain = 0;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].context, s2[i].context);
    EXPECT_EQ(s1[i].left_system, s2[i].left_system);
    contexts.insert(s1[i].context);
    if (s1[i].left_system == "FS-XLT") ++left_plain;
    const auto& plain_resp = s1[i].left_system == "FS-XLT" ? s1[i].response_left : s1[i].response_right;
    EXPECT_TRUE(plain_resp.starts_with("plain "));
  }
  EXPECT_EQ(contexts.size(), 30u);
  EXPECT_GT(left_plain, 0u);
  EXPECT_LT(left_plain, 30u);
}

TEST(ExportPairs, FilesRoundTripThroughAnnotation) {
  TempDir dir("humaneval");
  auto test = numbered_corpus("da", 40, Split::test);
  auto a = hyps("plain", 40), b = hyps("pmpt\tx\\y", 40);
  auto samples = export_pairs(a, "MTL", b, "MTL_pmpt", test, 25, 5);
  write_sheet(dir.file("sheet.tsv"), samples);
  write_key(dir.file("key.tsv"), samples);
  auto rows = read_sheet(dir.file("sheet.tsv"));
  auto key = read_key(dir.file("key.tsv"));
  ASSERT_EQ(rows.size(), 25u);
  // an annotator who always prefers the prompted system, except every 5th row
  std::map<std::string, std::size_t> expected{{"MTL", 0}, {"MTL_pmpt", 0}};
  std::size_t neutral = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].context, samples[i].context);
    EXPECT_EQ(rows[i].response_left, samples[i].response_left);
    EXPECT_TRUE(rows[i].choice.empty());
    if (i % 5 == 4) {
      rows[i].choice = "Neutral";
      ++neutral;
      continue;
    }
    const bool pmpt_left = key.at(rows[i].id).left_system == "MTL_pmpt";
    rows[i].choice = pmpt_left ? "Left" : "Right";
    ++expected["MTL_pmpt"];
  }
  auto r = aggregate_votes({AnnotatedSheet{rows, key}});
  EXPECT_EQ(r.wins, expected);
  EXPECT_EQ(r.neutral, neutral);
  EXPECT_EQ(r.total, 25u);
  EXPECT_EQ(r.systems, (std::vector<std::string>{"MTL", "MTL_pmpt"}));
}

TEST(ExportPairs, SheetHidesSystems) {
  TempDir dir("humaneval");
  auto test = numbered_corpus("da", 10, Split::test);
  auto samples = export_pairs(hyps("a", 10), "FS-XLT", hyps("b", 10), "FS-XLT_pmpt", test, 10, 1);
  write_sheet(dir.file("sheet.tsv"), samples);
  auto text = xlingua::testing::read_text(dir.file("sheet.tsv"));
  EXPECT_EQ(text.find("FS-XLT"), std::string::npos);
}
