/* Copyright 2026 The OOAL Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ooal/errors.hpp"
#include "ooal/features.hpp"
#include "ooal/prompt.hpp"
#include "test_util.hpp"

namespace ooal {
namespace {

using testing::max_abs_diff;
using testing::random_matrix;

TEST(InitContext, ShapeAndDeterminism) {
  const ContextVectors a = init_context(8, 64, 3);
  EXPECT_EQ(a.v.rows(), 8u);
  EXPECT_EQ(a.v.cols(), 64u);
  EXPECT_EQ(a.v, init_context(8, 64, 3).v);
  EXPECT_NE(a.v, init_context(8, 64, 4).v);
  EXPECT_THROW(init_context(0, 64, 3), InvalidArgument);
}

TEST(InitContext, SampleMeanAndSpread) {
  const ContextVectors c = init_context(8, 512, 1);
  const double n = static_cast<double>(c.v.size());
  const double mean = std::accumulate(c.v.values().begin(), c.v.values().end(), 0.0) / n;
  double var = 0.0;
  for (double v : c.v.values()) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  EXPECT_GT(mean, -0.01);
  EXPECT_LT(mean, 0.01);
  EXPECT_NEAR(std::sqrt(var), 0.02, 0.001);
}

TEST(StubEncoder, DeterministicFrozenProjection) {
  const auto a = StubTextEncoder::create(16, 8, 2);
  EXPECT_EQ(a.projection, StubTextEncoder::create(16, 8, 2).projection);
  EXPECT_EQ(a.token_dim(), 16u);
  EXPECT_EQ(a.embed_dim(), 8u);
}

TEST(EncodeTexts, SingleContextEqualToTokenReducesToProjection) {
  const ClassTokenTable table = synth_text_tokens({"grasp"}, 12, 0);
  const auto enc = StubTextEncoder::create(12, 10, 5);
  ContextVectors ctx{table.tokens};
  const Matrix out = encode_texts(ctx, table, enc);
  const Matrix expect = layer_norm_rows(matmul(table.tokens, enc.projection));
  EXPECT_LT(max_abs_diff(out, expect), 1e-12);
}

TEST(EncodeTexts, WithoutContextUsesClassTokenOnly) {
  const ClassTokenTable table = synth_text_tokens({"cut", "pound"}, 12, 0);
  const auto enc = StubTextEncoder::create(12, 10, 5);
  const ContextVectors ctx = init_context(4, 12, 1);
  const Matrix out = encode_texts(ctx, table, enc, false);
  EXPECT_LT(max_abs_diff(out, layer_norm_rows(matmul(table.tokens, enc.projection))), 1e-12);
  EXPECT_EQ(encode_texts_backward(ctx, table, enc, Matrix(2, 10, 1.0), false), Matrix(4, 12));
}

TEST(EncodeTexts, RowsAreStandardized) {
  const ClassTokenTable table = synth_text_tokens({"a", "b", "c", "d"}, 16, 0);
  const auto enc = StubTextEncoder::create(16, 24, 1);
  const Matrix out = encode_texts(init_context(3, 16, 2), table, enc);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mean = 0.0, var = 0.0;
    for (double v : out.row(i)) mean += v;
    mean /= 24.0;
    for (double v : out.row(i)) var += (v - mean) * (v - mean);
    var /= 24.0;
    EXPECT_NEAR(mean, 0.0, 1e-8);
    EXPECT_NEAR(var, 1.0, 1e-8);
  }
}

TEST(EncodeTexts, ClassPermutationPermutesRows) {
  const std::vector<std::string> names{"a", "b", "c"};
  const ClassTokenTable t1 = synth_text_tokens(names, 8, 0);
  const ClassTokenTable t2 = synth_text_tokens({"c", "a", "b"}, 8, 0);
  const auto enc = StubTextEncoder::create(8, 8, 1);
  const ContextVectors ctx = init_context(2, 8, 2);
  const Matrix o1 = encode_texts(ctx, t1, enc);
  const Matrix o2 = encode_texts(ctx, t2, enc);
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t d = 0; d < 8; ++d) EXPECT_EQ(o2(i, d), o1(perm[i], d));
}

TEST(EncodeTexts, DimensionMismatch) {
  const ClassTokenTable table = synth_text_tokens({"a"}, 8, 0);
  EXPECT_THROW(encode_texts(init_context(2, 6, 0), table, StubTextEncoder::create(8, 4, 0)),
               ShapeError);
  EXPECT_THROW(encode_texts(init_context(2, 8, 0), table, StubTextEncoder::create(6, 4, 0)),
               ShapeError);
}

TEST(EncodeTexts, ContextGradientMatchesFiniteDifferences) {
  const ClassTokenTable table = synth_text_tokens({"a", "b", "c"}, 6, 0);
  const auto enc = StubTextEncoder::create(6, 5, 1);
  ContextVectors ctx = init_context(2, 6, 2);
  for (double& v : ctx.v.values()) v *= 20.0;
  const double h = 1e-5;
  double worst = 0.0;
  // Each output entry separately, via one-hot upstream gradients.
  for (std::size_t oi = 0; oi < 3; ++oi) {
    for (std::size_t od = 0; od < 5; ++od) {
      Matrix g(3, 5);
      g(oi, od) = 1.0;
      const Matrix analytic = encode_texts_backward(ctx, table, enc, g);
      for (std::size_t k = 0; k < ctx.v.size(); ++k) {
        ContextVectors plus = ctx, minus = ctx;
        plus.v[k] += h;
        minus.v[k] -= h;
        const double numeric =
            (encode_texts(plus, table, enc)(oi, od) - encode_texts(minus, table, enc)(oi, od)) /
            (2.0 * h);
        worst = std::max(worst, testing::rel_error(analytic[k], numeric));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  const Matrix x = random_matrix(3, 7, 4, 2.0);
  const Matrix g = random_matrix(3, 7, 5);
  const Matrix analytic = layer_norm_rows_backward(x, g);
  const double h = 1e-5;
  for (std::size_t k = 0; k < x.size(); ++k) {
    Matrix p = x, m = x;
    p[k] += h;
    m[k] -= h;
    const Matrix lp = layer_norm_rows(p), lm = layer_norm_rows(m);
    double numeric = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) numeric += g[i] * (lp[i] - lm[i]) / (2.0 * h);
    EXPECT_LT(testing::rel_error(analytic[k], numeric), 1e-6);
  }
}

}  // namespace
}  // namespace ooal
