#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "xlingua/metrics.hpp"

using namespace xlingua;
using xlingua::testing::distinct_oracle;

using Tokens = std::vector<std::string>;

TEST(Tokenize13a, Examples) {
  // expected outputs produced by sacreBLEU's 13a tokenizer
  EXPECT_EQ(tokenize_13a("Also wann?"), (Tokens{"Also", "wann", "?"}));
  EXPECT_EQ(tokenize_13a(""), Tokens{});
  EXPECT_EQ(tokenize_13a("a  b"), (Tokens{"a", "b"}));
  EXPECT_EQ(tokenize_13a("Hello, world."), (Tokens{"Hello", ",", "world", "."}));
  EXPECT_EQ(tokenize_13a("It costs $3.14, or 1,000 units-2 in 1990-2000."),
            (Tokens{"It", "costs", "$", "3.14", ",", "or", "1,000", "units-2", "in", "1990", "-", "2000", "."}));
  EXPECT_EQ(tokenize_13a("\"Quoted\" &amp; (paren) [x] {y}"),
            (Tokens{"\"", "Quoted", "\"", "&", "(", "paren", ")", "[", "x", "]", "{", "y", "}"}));
  EXPECT_EQ(tokenize_13a("Ikke dum, men døv."), (Tokens{"Ikke", "dum", ",", "men", "døv", "."}));
}

TEST(CorpusBleu, IdenticalCorpora) {
  std::vector<std::string> refs{"the cat sat on the mat", "Ikke dum, men døv.", "a b c d e"};
  for (auto smoothing : {Smoothing::none, Smoothing::floor}) {
    BleuOptions o;
    o.smoothing = smoothing;
    auto r = corpus_bleu(refs, refs, o);
    EXPECT_EQ(r.b1(), 100.0);
    EXPECT_EQ(r.b2(), 100.0);
    EXPECT_EQ(r.score, 100.0);
    EXPECT_EQ(r.bp, 1.0);
  }
}

TEST(CorpusBleu, ShortHypothesis) {
  auto r = corpus_bleu({"the cat"}, {"the cat sat"});
  EXPECT_EQ(r.b1(), 100.0);
  EXPECT_EQ(r.hyp_len, 2u);
  EXPECT_EQ(r.ref_len, 3u);
  EXPECT_NEAR(r.bp, std::exp(-0.5), 1e-12);
  // p3 and p4 have no hypothesis n-grams and take the floor: (1 * 1 * 1e-4 * 1e-4)^(1/4) = 1e-2
  EXPECT_NEAR(r.score, 100.0 * std::exp(-0.5) * 1e-2, 1e-9);
  BleuOptions none;
  none.smoothing = Smoothing::none;
  EXPECT_EQ(corpus_bleu({"the cat"}, {"the cat sat"}, none).score, 0.0);
}

TEST(CorpusBleu, MatchesSacreBleuWithoutSmoothing) {
  BleuOptions none;
  none.smoothing = Smoothing::none;
  struct Case {
    std::vector<std::string> hyps, refs;
    double score, bp;
    std::vector<double> precisions;
  };
  // reference values from sacrebleu.corpus_bleu(..., smooth_method='none')
  std::vector<Case> cases{
      {{"the cat sat on the mat", "a quick brown fox jumps", "hello there general kenobi"},
       {"the cat is on the mat", "the quick brown fox jumped over", "hello there general kenobi you are bold"},
       34.14714337253727,
       0.7659283383646487,
       {80.0, 66.66666666666667, 44.44444444444444, 16.666666666666668}},
      {{"Ikke dum, men døv.", "Jeg ved det ikke"},
       {"Ikke dum, men døv!", "Det ved jeg ikke."},
       49.212175607701866,
       0.9048374180359595,
       {70.0, 50.0, 50.0, 50.0}},
  };
  for (const auto& c : cases) {
    auto r = corpus_bleu(c.hyps, c.refs, none);
    EXPECT_NEAR(r.score, c.score, 1e-9);
    EXPECT_NEAR(r.bp, c.bp, 1e-12);
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(r.precisions[n], c.precisions[n], 1e-9);
    // nothing is zero here, so the floor changes nothing
    EXPECT_NEAR(corpus_bleu(c.hyps, c.refs).score, c.score, 1e-9);
  }
}

TEST(CorpusBleu, FloorSmoothing) {
  // p1 = 3/4, p2 = 1/3, p3 = 0 (floored), p4 = 0 (no 4-grams, floored)
  auto r = corpus_bleu({"x y z w"}, {"x y q z w"});
  EXPECT_NEAR(r.b1(), 100.0, 1e-12);
  EXPECT_NEAR(r.b2(), 200.0 / 3.0, 1e-9);
  const double expected = 100.0 * std::exp(1.0 - 5.0 / 4.0) * std::pow(1.0 * (2.0 / 3.0) * 1e-4 * 1e-4, 0.25);
  EXPECT_NEAR(r.score, expected, 1e-9);
  EXPECT_EQ(r.smoothing, "floor");
  EXPECT_EQ(r.floor_epsilon, 1e-2);
  BleuOptions o;
  o.floor_epsilon = 1.0;
  EXPECT_NEAR(corpus_bleu({"x y z w"}, {"x y q z w"}, o).score,
              100.0 * std::exp(-0.25) * std::pow((2.0 / 3.0) * 1e-2 * 1e-2, 0.25), 1e-9);
}

TEST(CorpusBleu, ZeroUnigramPrecisionGivesZero) {
  auto r = corpus_bleu({"p q r s t"}, {"a b c d e"});
  EXPECT_EQ(r.b1(), 0.0);
  EXPECT_EQ(r.score, 0.0);
}

TEST(CorpusBleu, InvariantToCommonPermutation) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> hyps, refs;
    for (int i = 0; i < 8; ++i) {
      hyps.push_back(xlingua::testing::random_sentence(rng, 1, 8));
      refs.push_back(xlingua::testing::random_sentence(rng, 1, 8));
    }
    // make some overlap
    hyps[0] = refs[0];
    auto base = corpus_bleu(hyps, refs);
    std::vector<std::size_t> order(hyps.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::string> h2, r2;
    for (auto i : order) {
      h2.push_back(hyps[i]);
      r2.push_back(refs[i]);
    }
    auto perm = corpus_bleu(h2, r2);
    EXPECT_EQ(perm.score, base.score);
    EXPECT_EQ(perm.precisions, base.precisions);
    EXPECT_EQ(perm.bp, base.bp);
  }
}

TEST(CorpusBleu, DoublingKeepsBrevityPenalty) {
  std::vector<std::string> hyps{"a b", "c d e"}, refs{"a b c", "c d e f g"};
  std::vector<std::string> h2, r2;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    h2.push_back(hyps[i] + " " + hyps[i]);
    r2.push_back(refs[i] + " " + refs[i]);
  }
  EXPECT_DOUBLE_EQ(corpus_bleu(h2, r2).bp, corpus_bleu(hyps, refs).bp);
}

TEST(CorpusBleu, Errors) {
  EXPECT_THROW(corpus_bleu({"a"}, {"a", "b"}), Error);
  EXPECT_THROW(corpus_bleu({}, {}), Error);
  EXPECT_THROW(corpus_bleu({"", " "}, {"a", "b"}), Error);
  EXPECT_THROW(parse_smoothing("exp"), Error);
}

TEST(CorpusBleu, PureFunction) {
  std::vector<std::string> hyps{"a b c", "d e"}, refs{"a b d", "d e f"};
  auto a = to_json(evaluate_hypotheses("s", hyps, refs, nullptr));
  auto b = to_json(evaluate_hypotheses("s", hyps, refs, nullptr));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(DistinctN, Examples) {
  EXPECT_DOUBLE_EQ(distinct_n({"a b", "a c"}, 1), 75.0);
  EXPECT_NEAR(distinct_n({"a a a"}, 1), 100.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(distinct_n({"x", "y", "z"}, 1), 100.0);
  EXPECT_DOUBLE_EQ(distinct_n({"a b", "a b"}, 2), 50.0);
  EXPECT_THROW(distinct_n({"a", "b"}, 2), Error);
  EXPECT_THROW(distinct_n({"a"}, 0), Error);
}

TEST(DistinctN, MatchesBruteForceOracle) {
  Rng rng(8);
  for (int corpus = 0; corpus < 50; ++corpus) {
    std::vector<std::string> hyps;
    std::size_t tokens = 0;
    const auto target = 2 + rng.below(99);
    while (tokens < target) {
      const auto len = 1 + rng.below(std::min<std::uint64_t>(10, target - tokens));
      std::string h;
      for (std::size_t i = 0; i < len; ++i) h += (i ? " " : "") + std::string(1, static_cast<char>('a' + rng.below(4)));
      hyps.push_back(h);
      tokens += len;
    }
    ASSERT_LE(tokens, 100u);
    for (std::size_t n = 1; n <= 3; ++n) {
      std::size_t grams = 0;
      for (const auto& h : hyps) {
        auto k = split_whitespace(h).size();
        grams += k >= n ? k - n + 1 : 0;
      }
      if (grams == 0) {
        EXPECT_THROW(distinct_n(hyps, n), Error);
        continue;
      }
      EXPECT_EQ(distinct_n(hyps, n), distinct_oracle(hyps, n)) << "corpus " << corpus << " n " << n;
    }
  }
}

TEST(LanguageLegality, Examples) {
  std::set<std::string> tgt{"b1", "b2", "b3"};
  EXPECT_DOUBLE_EQ(language_legality({"b1 b2 a1 b3"}, tgt).legality, 75.0);
  EXPECT_DOUBLE_EQ(language_legality({"b1 b2", "b3"}, tgt).legality, 100.0);
  EXPECT_DOUBLE_EQ(language_legality({"a1 a2"}, tgt).legality, 0.0);
  auto r = language_legality({"b1 b2 a1 b3"}, tgt);
  EXPECT_EQ(r.legal_tokens, 3u);
  EXPECT_EQ(r.total_tokens, 4u);
  EXPECT_THROW(language_legality({" "}, tgt), Error);
  EXPECT_THROW(language_legality({}, tgt), Error);
  EXPECT_THROW(language_legality({"b1"}, std::set<std::string>{}), Error);
}

TEST(EvaluateHypotheses, ReportFields) {
  std::unordered_set<std::string> vocab{"b1", "b2", "b3"};
  auto rep = evaluate_hypotheses("MTL_pmpt", {"b1 b2 a1", "b3"}, {"b1 b2 b3", "b3 b1"}, &vocab);
  auto j = to_json(rep);
  for (const char* key : {"system", "b1", "b2", "score", "bp", "d1", "d2", "legality", "smoothing", "epsilon",
                          "tokenizer"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["system"], "MTL_pmpt");
  EXPECT_EQ(j["tokenizer"], "13a");
  EXPECT_NEAR(j["legality"].get<double>(), 75.0, 1e-12);
  EXPECT_FALSE(evaluate_hypotheses("x", {"a", "b"}, {"a", "b"}, nullptr).distinct.has_value());
}

TEST(EvaluateHypotheses, AllEmptyHypothesesScoreZero) {
  std::unordered_set<std::string> vocab{"b1"};
  auto rep = evaluate_hypotheses("x", {"", ""}, {"b1", "b1 b1"}, &vocab);
  EXPECT_EQ(rep.bleu.score, 0.0);
  EXPECT_EQ(rep.bleu.ref_len, 3u);
  ASSERT_TRUE(rep.legality.has_value());
  EXPECT_EQ(rep.legality->legality, 0.0);
  EXPECT_THROW(evaluate_hypotheses("x", {""}, {"a", "b"}, nullptr), Error);
}
