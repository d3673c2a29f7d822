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

#include "ooal/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace {

constexpr double kProjInitStd = 0.01;

const Matrix& fused_layer(const FeatureStack& stack, std::size_t i) {
  return stack.layers[stack.num_layers() - 1 - i];
}

void check_fusion(const FeatureStack& stack, const FusionParams& fp) {
  const std::size_t j = fp.num_layers();
  if (j == 0) throw InvalidArgument("fuse: j must be at least 1");
  if (fp.alpha_logits.rows() != 1 || fp.alpha_logits.cols() != j) {
    throw ShapeError("fuse: alpha_logits shape " + fp.alpha_logits.shape_string());
  }
  if (j > stack.num_layers()) {
    throw ShapeError("fuse: j=" + std::to_string(j) + " exceeds the " +
                     std::to_string(stack.num_layers()) + " available layers");
  }
  for (const auto& p : fp.proj) {
    if (p.rows() != stack.dim() || p.cols() != stack.dim()) {
      throw ShapeError("fuse: projection " + p.shape_string() + " for C_v=" +
                       std::to_string(stack.dim()));
    }
  }
}

}  // namespace

std::vector<double> FusionParams::alpha() const {
  const Matrix a = row_softmax(alpha_logits);
  return {a.values().begin(), a.values().end()};
}

FusionParams init_fusion(std::size_t j, std::size_t dim, std::uint64_t seed) {
  if (j == 0) throw InvalidArgument("init_fusion: j must be at least 1");
  FusionParams fp;
  Rng rng(derive_seed(seed, {0xf05e}));
  for (std::size_t i = 0; i < j; ++i) {
    Matrix p = Matrix::identity(dim);
    for (double& v : p.values()) v += rng.normal(0.0, kProjInitStd);
    fp.proj.push_back(std::move(p));
  }
  fp.alpha_logits = Matrix(1, j);
  return fp;
}

Embedder init_embedder(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  Embedder e{Matrix(in_dim, out_dim), Matrix(1, out_dim)};
  Rng rng(derive_seed(seed, {0xe3b}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (double& v : e.weight.values()) v = rng.normal(0.0, scale);
  return e;
}

Matrix fuse(const FeatureStack& stack, const FusionParams& fp) {
  check_fusion(stack, fp);
  const std::vector<double> alpha = fp.alpha();
  Matrix out(stack.num_patches(), stack.dim());
  for (std::size_t i = 0; i < fp.num_layers(); ++i) {
    out += alpha[i] * matmul(fused_layer(stack, i), fp.proj[i]);
  }
  return out;
}

FusionGrads fuse_backward(const FeatureStack& stack, const FusionParams& fp,
                          const Matrix& grad_output) {
  check_fusion(stack, fp);
  const std::size_t j = fp.num_layers();
  const std::vector<double> alpha = fp.alpha();
  FusionGrads g;
  std::vector<double> grad_alpha(j);
  for (std::size_t i = 0; i < j; ++i) {
    const Matrix& x = fused_layer(stack, i);
    g.proj.push_back(alpha[i] * matmul_tn(x, grad_output));
    grad_alpha[i] = dot(matmul(x, fp.proj[i]).values(), grad_output.values());
  }
  // Softmax Jacobian: dz_k = α_k (dα_k − Σ_i α_i dα_i).
  double weighted = 0.0;
  for (std::size_t i = 0; i < j; ++i) weighted += alpha[i] * grad_alpha[i];
  g.alpha_logits = Matrix(1, j);
  for (std::size_t k = 0; k < j; ++k) g.alpha_logits[k] = alpha[k] * (grad_alpha[k] - weighted);
  return g;
}

Matrix embed(const Matrix& fused, const Embedder& e) {
  if (fused.cols() != e.weight.rows()) {
    throw ShapeError("embed: input has " + std::to_string(fused.cols()) +
                     " columns, embedder expects " + std::to_string(e.weight.rows()));
  }
  return add_row_vector(matmul(fused, e.weight), e.bias);
}

EmbedGrads embed_backward(const Matrix& fused, const Embedder& e, const Matrix& grad_output) {
  if (fused.cols() != e.weight.rows()) throw ShapeError("embed_backward: dimension mismatch");
  return {matmul_tn(fused, grad_output), column_sums(grad_output),
          matmul_nt(grad_output, e.weight)};
}

}  // namespace ooal
