/*
 * Copyright 2026 The lexaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lexaug/transformer.hpp"
#include "test_util.hpp"

namespace lexaug {
namespace {

using testing::random_sequence;

DictionaryModelConfig toy_config(std::size_t layers = 2, bool positional = true) {
  DictionaryModelConfig cfg;
  cfg.encoder.vocab_size = 20;
  cfg.encoder.layers = layers;
  cfg.encoder.heads = 2;
  cfg.encoder.model_dim = 8;
  cfg.encoder.ff_dim = 16;
  cfg.encoder.max_seq_len = 16;
  cfg.encoder.positional = positional;
  cfg.hidden = {16, 8, 4};
  return cfg;
}

TEST(Encoder, ConfigValidation) {
  EncoderConfig cfg;
  cfg.model_dim = 10;
  cfg.heads = 4;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.layers = 0;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Encoder, RejectsOverLengthSequence) {
  DictionaryModel<double> model(toy_config(), 1);
  Rng rng(1);
  const auto seq = random_sequence(rng, 3, 17, 20);
  EXPECT_THROW(model.encode(seq), InputError);
}

TEST(Encoder, AttentionRowsAreDistributionsAndPadsGetZero) {
  DictionaryModel<double> model(toy_config(), 2);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 10);
    const auto seq = random_sequence(rng, n, 12, 20);
    const auto out = model.encode(seq);
    ASSERT_EQ(out.hidden.rows(), 12u);
    EXPECT_TRUE(out.hidden.all_finite());
    for (const auto& layer : out.attention) {
      for (const auto& P : layer) {
        for (std::size_t i = 0; i < P.rows(); ++i) {
          double sum = 0;
          for (std::size_t j = 0; j < P.cols(); ++j) {
            if (j >= n) {
              EXPECT_EQ(P(i, j), 0.0);
            } else {
              EXPECT_GE(P(i, j), 0.0);
              sum += P(i, j);
            }
          }
          EXPECT_NEAR(sum, 1.0, 1e-6);
        }
      }
    }
  }
}

TEST(Encoder, SingleTokenAttentionReturnsValueProjection) {
  auto cfg = toy_config(1);
  DictionaryModel<double> model(cfg, 3);
  auto& layer = model.layers()[0];
  TokenSequence seq{{5, 0, 0}, {true, false, false}};
  EncoderLayer<double>::Cache cache;
  auto drop = Dropout<double>::infer();
  Rng rng(3);
  Tensor<double> x(1, 8);
  for (auto& v : x.values()) v = uniform(rng, -1, 1);
  layer.forward(x, 1, cfg.encoder, drop, cache);
  const auto v = layer.v.forward(x);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(cache.A(0, j), v(0, j), 1e-15);
}

TEST(Encoder, EqualKeysGiveUniformWeights) {
  auto cfg = toy_config(1, /*positional=*/false);
  DictionaryModel<double> model(cfg, 4);
  // Identical tokens without positions give identical rows, hence equal keys.
  TokenSequence seq{{7, 7, 7, 7, 0}, {true, true, true, true, false}};
  const auto out = model.encode(seq);
  for (const auto& P : out.attention[0]) {
    for (std::size_t i = 0; i < P.rows(); ++i) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(P(i, j), 0.25, 1e-12);
    }
  }
}

TEST(Encoder, LayerNormStandardizesRows) {
  Rng rng(5);
  Tensor<double> x(6, 8);
  for (auto& v : x.values()) v = uniform(rng, -5, 5);
  std::vector<double> rstd;
  const auto xhat = LayerNorm<double>::normalize(x, rstd);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double m = 0, var = 0;
    for (double v : xhat.row(i)) m += v;
    m /= 8;
    for (double v : xhat.row(i)) var += (v - m) * (v - m);
    var /= 8;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(Encoder, PositionsBreakPermutationSymmetry) {
  Rng rng(6);
  DictionaryModel<double> with_pos(toy_config(2, true), 6);
  DictionaryModel<double> without_pos(toy_config(2, false), 6);
  TokenSequence a{{3, 4, 5, 6, 0}, {true, true, true, true, false}};
  TokenSequence b{{3, 5, 4, 6, 0}, {true, true, true, true, false}};
  std::vector<TokenSequence> ba{a}, bb{b};
  EXPECT_NE(with_pos.predict(ba), with_pos.predict(bb));
  EXPECT_NEAR(without_pos.predict(ba)[0], without_pos.predict(bb)[0], 1e-12);
}

TEST(Encoder, PaddingNeverChangesPrediction) {
  Rng rng(7);
  DictionaryModel<float> model(toy_config(), 7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    auto seq = random_sequence(rng, n, n, 20);
    auto padded = seq;
    const std::size_t extra = 1 + uniform_index(rng, 6);
    padded.ids.resize(n + extra, kPadId);
    padded.mask.resize(n + extra, false);
    std::vector<TokenSequence> a{seq}, b{padded};
    EXPECT_EQ(model.predict(a), model.predict(b));
  }
}

TEST(Encoder, ZeroHeadWeightsPredictFinalBias) {
  DictionaryModel<double> model(toy_config(), 8);
  auto& head = model.head();
  for (auto& l : head.hidden()) l.w.fill(0.0);
  head.head().w.fill(0.0);
  head.head().b[0] = 4.25;
  Rng rng(8);
  std::vector<TokenSequence> batch{random_sequence(rng, 4, 8, 20)};
  EXPECT_EQ(model.predict(batch)[0], 4.25);
}

TEST(Encoder, GradCheckFullModel) {
  Rng rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    DictionaryModel<double> model(toy_config(1 + trial % 2), 50 + trial);
    std::vector<TokenSequence> batch;
    std::vector<double> y;
    for (int i = 0; i < 3; ++i) {
      batch.push_back(random_sequence(rng, 1 + uniform_index(rng, 5), 6, 20));
      y.push_back(uniform(rng, 1, 9));
    }
    const auto r = grad_check(model, batch, y, 1e-4, Mode::Infer, 1, 1e-6,
                              kEncoderGradCheckFloor);
    EXPECT_TRUE(r.passed()) << r.worst_param << " " << r.max_rel_error;
    const auto t = grad_check(model, batch, y, 1e-4, Mode::Train, trial, 1e-6,
                              kEncoderGradCheckFloor);
    EXPECT_TRUE(t.passed()) << t.worst_param << " " << t.max_rel_error;
  }
}

TEST(Encoder, FrozenEncoderOnlyTrainsHead) {
  auto cfg = toy_config();
  cfg.freeze_encoder = true;
  DictionaryModel<double> model(cfg, 10);
  const auto before = model.token_embedding().weights;
  Rng rng(10);
  std::vector<TokenSequence> batch{random_sequence(rng, 4, 8, 20)};
  Adam<double> opt;
  auto drop = Dropout<double>::infer();
  DictionaryModel<double>::Cache cache;
  model.zero_grad();
  const auto p = model.forward(batch, drop, cache);
  model.backward(cache, std::vector<double>{p[0] - 9.0});
  apply_step(model, opt);
  EXPECT_EQ(model.token_embedding().weights, before);
  const auto r = grad_check(model, batch, std::vector<double>{9.0}, 1e-4, Mode::Infer,
                            1, 1e-6, kEncoderGradCheckFloor);
  EXPECT_TRUE(r.passed());
}

}  // namespace
}  // namespace lexaug
