#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "support.hpp"
#include "toy.hpp"
#include "xlingua/checkpoint.hpp"
#include "xlingua/model.hpp"
#include "xlingua/training.hpp"

using namespace xlingua;
using xlingua::testing::reference_toy;
using xlingua::testing::toy_batch;

TEST(Vocabulary, ReservedIdsAndRoundTrip) {
  auto v = Vocabulary::build(std::vector<std::string>{"b a", "c"});
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.token(Vocabulary::kBos), "<s>");
  EXPECT_EQ(v.token(Vocabulary::kEos), "</s>");
  EXPECT_EQ(v.token(Vocabulary::kSentinel0), "<extra_id_0>");
  EXPECT_EQ(v.token(Vocabulary::kSentinel1), "<extra_id_1>");
  EXPECT_TRUE(v.contains("Context:"));
  EXPECT_TRUE(v.contains("Response:"));
  EXPECT_EQ(v.id("zzz"), Vocabulary::kUnk);
  EXPECT_EQ(v.decode(v.encode("a <extra_id_0> c")), "a <extra_id_0> c");
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()), v);
  EXPECT_THROW(Vocabulary::from_tokens({"<pad>"}), Error);
}

TEST(AttentionSeq2Seq, ZeroParametersGiveUniformLoss) {
  auto model = reference_toy();
  std::vector<double> zeros(model.parameters().size(), 0.0);
  model.set_parameters(zeros);
  EXPECT_NEAR(nll_loss(model, toy_batch()), std::log(static_cast<double>(model.vocabulary().size())), 1e-12);
}

TEST(AttentionSeq2Seq, ParameterCount) {
  auto model = reference_toy();
  const int V = model.vocabulary().size(), d = 32, H = 64;
  const std::size_t expected = static_cast<std::size_t>(d * V + 3 * H * d + 3 * H * H + 3 * H +
                                                        3 * H * (d + H) + 3 * H * H + 3 * H + H * H + H * H + H +
                                                        V * 2 * H + V);
  EXPECT_EQ(model.parameters().size(), expected);
}

TEST(AttentionSeq2Seq, StepDistributionsNormalize) {
  auto model = reference_toy(3);
  const auto& v = model.vocabulary();
  for (const auto& ex : toy_batch(true, 4)) {
    auto dists = model.step_distributions(v.encode(ex.source), v.encode(ex.target));
    EXPECT_EQ(dists.size(), v.encode(ex.target).size() + 1);
    for (const auto& p : dists) {
      EXPECT_NEAR(p.sum(), 1.0, 1e-6);
      EXPECT_GE(p.minCoeff(), 0.0);
    }
  }
}

TEST(AttentionSeq2Seq, LossMatchesStepDistributions) {
  auto model = reference_toy(4);
  const auto& v = model.vocabulary();
  auto batch = toy_batch(false, 2);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    auto tgt = v.encode(ex.target);
    auto dists = model.step_distributions(v.encode(ex.source), tgt);
    for (std::size_t t = 0; t <= tgt.size(); ++t) {
      const int gold = t < tgt.size() ? tgt[t] : Vocabulary::kEos;
      nll -= std::log(dists[t](gold));
      ++tokens;
    }
  }
  EXPECT_NEAR(nll_loss(model, batch), nll / static_cast<double>(tokens), 1e-12);
}

TEST(AttentionSeq2Seq, GradientCheck) {
  auto model = reference_toy(1);
  EXPECT_LE(gradient_check(model, toy_batch(true, 3), 50, 1e-4, 2), 1e-4);
}

TEST(AttentionSeq2Seq, SignFlippedGradientIsDetected) {
  auto model = reference_toy(1);
  const auto enc = encode_examples(model.vocabulary(), toy_batch(true, 3));
  std::vector<double> grad(model.parameters().size());
  model.loss_and_gradient(std::span<const EncodedExample>(enc), grad);
  std::vector<std::size_t> probes;
  for (std::size_t i = 0; i < grad.size() && probes.size() < 20; i += 97) {
    if (std::abs(grad[i]) > 1e-4) probes.push_back(i);
  }
  ASSERT_FALSE(probes.empty());
  for (auto& g : grad) g = -g;
  EXPECT_NEAR(check_gradient(model, std::span<const EncodedExample>(enc), grad, probes, 1e-4), 2.0, 1e-3);
}

TEST(AttentionSeq2Seq, OverfitsOnePair) {
  auto model = reference_toy(0);
  std::vector<FormattedExample> one{toy_batch(true, 1)[0]};
  OptimizerConfig cfg{1e-2, 0.9, 0.999, 1e-8, 0.0, 1, 200};
  auto result = train(model, one, one, cfg, 0);
  EXPECT_EQ(result.steps, 200u);
  EXPECT_LT(nll_loss(model, one), 0.1);
  EXPECT_EQ(generate_greedy(model, one[0].source), one[0].target);
}

TEST(AttentionSeq2Seq, GreedyStopsAtMaxLength) {
  auto model = reference_toy(2);
  auto out = model.generate_ids(model.vocabulary().encode("a001 a002"), 5);
  EXPECT_LE(out.size(), 5u);
  EXPECT_EQ(model.generate_ids(model.vocabulary().encode("a001 a002"), 5), out);
}

TEST(AttentionSeq2Seq, InitialisationIsSeeded) {
  auto a = reference_toy(5), b = reference_toy(5), c = reference_toy(6);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
  for (double p : a.parameters()) {
    ASSERT_GE(p, -0.1);
    ASSERT_LT(p, 0.1);
  }
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  xlingua::testing::TempDir dir("ckpt");
  auto model = reference_toy(7);
  auto path = dir.file("m.ckpt");
  save_checkpoint(path, model, CheckpointMeta{42, 1.25});
  CheckpointMeta meta;
  auto back = load_checkpoint(path, &meta);
  EXPECT_EQ(meta.step, 42u);
  ASSERT_TRUE(meta.validation_loss.has_value());
  EXPECT_EQ(*meta.validation_loss, 1.25);
  EXPECT_EQ(back.vocabulary(), model.vocabulary());
  EXPECT_EQ(back.config(), model.config());
  ASSERT_EQ(back.parameters().size(), model.parameters().size());
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    ASSERT_EQ(std::memcmp(&back.parameters()[i], &model.parameters()[i], sizeof(double)), 0) << i;
  }
  EXPECT_EQ(checkpoint_to_string(back, meta), checkpoint_to_string(model, meta));
}

TEST(Checkpoint, RejectsForeignFiles) {
  EXPECT_THROW(checkpoint_from_string("{}"), Error);
  EXPECT_THROW(checkpoint_from_string("not json"), Error);
  EXPECT_THROW(checkpoint_from_string(R"({"format":"xlingua-checkpoint","version":9})"), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/m.ckpt"), Error);
}
