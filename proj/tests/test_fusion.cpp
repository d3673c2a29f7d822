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

#include <gtest/gtest.h>

#include "ooal/errors.hpp"
#include "ooal/fusion.hpp"
#include "test_util.hpp"

namespace ooal {
namespace {

using testing::max_abs_diff;
using testing::random_matrix;

FeatureStack random_stack(std::size_t n_layers, std::size_t L, std::size_t C_v,
                          std::uint64_t seed) {
  FeatureStack s;
  s.grid = {1, L};
  s.image_size = {3, 3};
  for (std::size_t k = 0; k < n_layers; ++k) s.layers.push_back(random_matrix(L, C_v, seed + k));
  s.cls = random_matrix(1, C_v, seed + 100);
  return s;
}

TEST(Fuse, SingleIdentityLayerReturnsLastLayer) {
  const FeatureStack s = random_stack(3, 4, 5, 1);
  FusionParams fp{{Matrix::identity(5)}, Matrix(1, 1)};
  EXPECT_EQ(fuse(s, fp), s.last_layer());
}

TEST(Fuse, SaturatedSoftmaxSelectsFirstProjection) {
  const FeatureStack s = random_stack(4, 4, 3, 2);
  FusionParams fp = init_fusion(3, 3, 7);
  fp.alpha_logits = Matrix{{30.0, -30.0, -30.0}};
  EXPECT_LT(max_abs_diff(fuse(s, fp), matmul(s.last_layer(), fp.proj[0])), 1e-9);
}

TEST(Fuse, HandComputedTwoLayerCase) {
  FeatureStack s;
  s.grid = {1, 2};
  s.image_size = {2, 2};
  s.layers = {Matrix{{9, 9}, {9, 9}}, Matrix{{3, 1}, {1, 1}}, Matrix{{1, 0}, {0, 2}}};
  s.cls = Matrix{{0, 0}};
  FusionParams fp;
  fp.proj = {Matrix{{1, 2}, {0, 1}}, Matrix{{0, 1}, {1, 0}}};
  fp.alpha_logits = Matrix{{std::log(3.0), 0.0}};  // alpha = (0.75, 0.25)
  // 0.75*[[1,2],[0,2]] + 0.25*[[1,3],[1,1]]
  const Matrix expect{{1.0, 2.25}, {0.25, 1.75}};
  EXPECT_LT(max_abs_diff(fuse(s, fp), expect), 1e-12);
}

TEST(Fuse, AlphaIsProbabilityVector) {
  FusionParams fp = init_fusion(4, 2, 1);
  for (double scale : {0.0, 1.0, 50.0, -300.0}) {
    fp.alpha_logits = Matrix{{scale, -scale, 0.5 * scale, 3.0}};
    const auto a = fp.alpha();
    double sum = 0.0;
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  fp.alpha_logits = Matrix{{1.0, 2.0, 3.0, 4.0}};
  for (double v : fp.alpha()) EXPECT_GT(v, 0.0);
}

TEST(Fuse, HomogeneousInFeatures) {
  FeatureStack s = random_stack(3, 5, 4, 3);
  const FusionParams fp = init_fusion(3, 4, 2);
  const Matrix base = fuse(s, fp);
  for (auto& l : s.layers) l *= -2.5;
  EXPECT_LT(max_abs_diff(fuse(s, fp), base * -2.5), 1e-12);
}

TEST(Fuse, TooManyLayersOrBadShapes) {
  const FeatureStack s = random_stack(2, 3, 4, 4);
  EXPECT_THROW(fuse(s, init_fusion(3, 4, 0)), ShapeError);
  EXPECT_THROW(fuse(s, init_fusion(2, 5, 0)), ShapeError);
  EXPECT_THROW(init_fusion(0, 4, 0), InvalidArgument);
}

TEST(Embed, IdentityAndConstant) {
  const Matrix x = random_matrix(4, 3, 5);
  EXPECT_EQ(embed(x, Embedder{Matrix::identity(3), Matrix(1, 3)}), x);
  const Matrix c = embed(x, Embedder{Matrix(3, 6), Matrix(1, 6, 1.25)});
  for (double v : c.values()) EXPECT_EQ(v, 1.25);
  EXPECT_THROW(embed(x, Embedder{Matrix(4, 2), Matrix(1, 2)}), ShapeError);
}

// Scalar objective sum(G ⊙ embed(fuse(S))) and its analytic gradients.
struct FusionProblem {
  FeatureStack stack = random_stack(3, 4, 5, 11);
  FusionParams fp = init_fusion(2, 5, 3);
  Embedder emb = init_embedder(5, 6, 4);
  Matrix g = random_matrix(4, 6, 12);

  double objective() const { return dot(embed(fuse(stack, fp), emb).values(), g.values()); }
};

double check_tensor(FusionProblem& prob, Matrix& tensor, const Matrix& analytic) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < tensor.size(); ++k) {
    const double keep = tensor[k];
    tensor[k] = keep + h;
    const double up = prob.objective();
    tensor[k] = keep - h;
    const double down = prob.objective();
    tensor[k] = keep;
    worst = std::max(worst, testing::rel_error(analytic[k], (up - down) / (2.0 * h)));
  }
  return worst;
}

TEST(FusionGradients, MatchFiniteDifferences) {
  FusionProblem prob;
  prob.fp.alpha_logits = Matrix{{0.3, -0.4}};
  const Matrix fused = fuse(prob.stack, prob.fp);
  const EmbedGrads eg = embed_backward(fused, prob.emb, prob.g);
  const FusionGrads fg = fuse_backward(prob.stack, prob.fp, eg.input);
  EXPECT_LT(check_tensor(prob, prob.emb.weight, eg.weight), 1e-4);
  EXPECT_LT(check_tensor(prob, prob.emb.bias, eg.bias), 1e-4);
  EXPECT_LT(check_tensor(prob, prob.fp.alpha_logits, fg.alpha_logits), 1e-4);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT(check_tensor(prob, prob.fp.proj[i], fg.proj[i]), 1e-4);
  }
}

TEST(FusionInit, NearIdentityProjectionsAndUniformAlpha) {
  const FusionParams fp = init_fusion(3, 16, 9);
  for (const auto& p : fp.proj) EXPECT_LT(max_abs_diff(p, Matrix::identity(16)), 0.06);
  for (double a : fp.alpha()) EXPECT_NEAR(a, 1.0 / 3.0, 1e-15);
}

}  // namespace
}  // namespace ooal
