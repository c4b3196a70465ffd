#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "toy.hpp"
#include "xlingua/training.hpp"

using namespace xlingua;
using xlingua::testing::reference_toy;
using xlingua::testing::toy_batch;

TEST(OptimizerConfig, DefaultsAndStepCounts) {
  auto src = OptimizerConfig::source_training();
  EXPECT_EQ(src.learning_rate, 5e-5);
  EXPECT_EQ(src.batch_size, 8u);
  EXPECT_EQ(src.epochs, 5u);
  EXPECT_EQ(src.beta1, 0.9);
  EXPECT_EQ(src.beta2, 0.999);
  EXPECT_EQ(src.epsilon, 1e-8);
  auto tgt = OptimizerConfig::target_adapting();
  EXPECT_EQ(tgt.learning_rate, 1e-4);
  EXPECT_EQ(tgt.batch_size, 4u);
  EXPECT_EQ(tgt.epochs, 6u);
  EXPECT_EQ(src.steps_for(10000), 6250u);
  EXPECT_EQ(tgt.steps_for(10), 18u);
  EXPECT_EQ(src.steps_for(10010), 5u * 1252u);
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(AdamW, MatchesHandComputedSteps) {
  OptimizerConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.01, 1, 1};
  AdamW opt(cfg, 2);
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.5, -0.25};
  // oracle, written out independently
  double m[2] = {0, 0}, v[2] = {0, 0}, q[2] = {1.0, -2.0};
  for (int t = 1; t <= 3; ++t) {
    opt.step(p, g);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      double mh = m[i] / (1 - std::pow(0.9, t));
      double vh = v[i] / (1 - std::pow(0.999, t));
      q[i] = q[i] - 0.1 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * q[i]);
      EXPECT_NEAR(p[i], q[i], 1e-14);
    }
  }
  EXPECT_EQ(opt.steps(), 3u);
}

TEST(SelectBestCheckpoint, ArgminWithEarliestTie) {
  std::vector<Checkpoint> h{{3, {}, 2.0}, {6, {}, 1.0}, {9, {}, 1.0}, {12, {}, 1.5}};
  EXPECT_EQ(select_best_checkpoint(h).step, 6u);
  EXPECT_THROW(select_best_checkpoint({}), Error);
}

TEST(SelectBestCheckpoint, MatchesExhaustiveScan) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Checkpoint> h;
    const auto n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) h.push_back({(i + 1) * 5, {}, static_cast<double>(rng.below(4))});
    rng.shuffle(h);  // selection must not rely on history order
    std::size_t best_step = 0;
    double best = INFINITY;
    for (const auto& c : h) {
      if (c.validation_loss < best || (c.validation_loss == best && c.step < best_step)) {
        best = c.validation_loss;
        best_step = c.step;
      }
    }
    // exhaustive: the chosen one has no strictly better or equally good earlier rival
    const auto& chosen = select_best_checkpoint(h);
    for (const auto& c : h) {
      ASSERT_GE(c.validation_loss, chosen.validation_loss);
      if (c.validation_loss == chosen.validation_loss) ASSERT_GE(c.step, chosen.step);
    }
    ASSERT_EQ(chosen.step, best_step);
  }
}

TEST(Train, EvaluationCadence) {
  auto data = toy_batch(false, 10);
  auto valid = toy_batch(false, 2);
  OptimizerConfig cfg{1e-3, 0.9, 0.999, 1e-8, 0.0, 4, 2};
  {
    auto model = reference_toy();
    auto r = train(model, data, valid, cfg, 0);
    EXPECT_EQ(r.steps, 6u);
    std::vector<std::size_t> steps;
    for (const auto& c : r.history) steps.push_back(c.step);
    EXPECT_EQ(steps, (std::vector<std::size_t>{3, 6}));
  }
  {
    auto model = reference_toy();
    TrainOptions opts;
    opts.eval_every = 4;
    auto r = train(model, data, valid, cfg, 0, opts);
    std::vector<std::size_t> steps;
    for (const auto& c : r.history) steps.push_back(c.step);
    EXPECT_EQ(steps, (std::vector<std::size_t>{4, 6}));
  }
}

TEST(Train, HistoryRecordsTheValidationLoss) {
  auto data = toy_batch(false, 6);
  auto valid = toy_batch(true, 2);
  OptimizerConfig cfg{1e-3, 0.9, 0.999, 1e-8, 0.0, 2, 2};
  auto model = reference_toy();
  auto r = train(model, data, valid, cfg, 0);
  for (const auto& c : r.history) {
    auto probe = reference_toy();
    probe.set_parameters(c.parameters);
    EXPECT_EQ(probe.loss(valid), c.validation_loss);
  }
  // the model is left at its final parameters
  EXPECT_TRUE(std::equal(model.parameters().begin(), model.parameters().end(), r.history.back().parameters.begin()));
}

TEST(Train, Deterministic) {
  auto data = toy_batch(true, 6);
  OptimizerConfig cfg{1e-3, 0.9, 0.999, 1e-8, 0.0, 4, 2};
  TrainOptions opts;
  opts.shuffle = true;
  auto a = reference_toy(), b = reference_toy();
  train(a, data, data, cfg, 9, opts);
  train(b, data, data, cfg, 9, opts);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST(Train, Preconditions) {
  auto model = reference_toy();
  auto data = toy_batch(true, 2);
  EXPECT_THROW(train(model, {}, data, OptimizerConfig{}, 0), Error);
  EXPECT_THROW(train(model, data, {}, OptimizerConfig{}, 0), Error);
  OptimizerConfig zero;
  zero.epochs = 0;
  EXPECT_THROW(train(model, data, data, zero, 0), Error);
}

TEST(Train, NonFiniteLossNamesTheStep) {
  auto model = reference_toy();
  auto data = toy_batch(true, 2);
  std::vector<double> p(model.parameters().begin(), model.parameters().end());
  std::fill(p.begin(), p.end(), std::nan(""));
  model.set_parameters(p);
  try {
    train(model, data, data, OptimizerConfig{}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::numeric);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(SpanCorruptionPretraining, ExamplesAndPreconditions) {
  SyntheticSpec spec;
  spec.n_train_aux = 30;
  auto data = generate_synthetic_bilingual(spec);
  std::vector<Corpus> both{data.aux.pretrain, data.tgt.pretrain};
  CorruptionConfig cc{0.4, 3.0, false};
  auto ex = span_corruption_examples(both, cc, PromptTemplate{}, 1);
  EXPECT_LE(ex.size(), 2u * 30u * 2u);
  EXPECT_GT(ex.size(), 30u);
  for (const auto& e : ex) {
    EXPECT_NE(e.source.find("<extra_id_0>"), std::string::npos);
    EXPECT_TRUE(e.target.starts_with("<extra_id_0> "));
  }
  cc.joined_documents = true;
  const auto joined = span_corruption_examples(both, cc, PromptTemplate{}, 1);
  EXPECT_EQ(joined.size(), 2u * 30u);

  auto model = reference_toy();
  std::vector<Corpus> one{data.aux.pretrain};
  EXPECT_THROW(pretrain_span_corruption(model, one, cc, OptimizerConfig{}, PromptTemplate{}, 0), Error);
  OptimizerConfig none;
  none.epochs = 0;
  std::vector<double> before(model.parameters().begin(), model.parameters().end());
  EXPECT_EQ(pretrain_span_corruption(model, both, cc, none, PromptTemplate{}, 0), 0u);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), model.parameters().begin()));
  OptimizerConfig one_epoch{1e-3, 0.9, 0.999, 1e-8, 0.0, 16, 1};
  EXPECT_EQ(pretrain_span_corruption(model, both, cc, one_epoch, PromptTemplate{}, 0), (joined.size() + 15) / 16);
}
