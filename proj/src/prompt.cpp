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

#include "ooal/prompt.hpp"

#include <cmath>

#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace {

constexpr double kContextInitStd = 0.02;
constexpr double kLayerNormEps = 1e-12;

void check_dims(const ContextVectors& ctx, const ClassTokenTable& table,
                const StubTextEncoder& enc, bool use_context) {
  if (use_context && ctx.dim() != table.dim()) {
    throw ShapeError("encode_texts: context dim " + std::to_string(ctx.dim()) +
                     " vs token dim " + std::to_string(table.dim()));
  }
  if (enc.token_dim() != table.dim()) {
    throw ShapeError("encode_texts: encoder expects token dim " +
                     std::to_string(enc.token_dim()));
  }
}

// N×C_t matrix of pooled sequences.
Matrix pool(const ContextVectors& ctx, const ClassTokenTable& table, bool use_context) {
  Matrix pooled = table.tokens;
  if (!use_context) return pooled;
  const Matrix ctx_sum = column_sums(ctx.v);
  const double scale = 1.0 / static_cast<double>(ctx.count() + 1);
  for (std::size_t i = 0; i < pooled.rows(); ++i) {
    auto r = pooled.row(i);
    for (std::size_t d = 0; d < r.size(); ++d) r[d] = (r[d] + ctx_sum[d]) * scale;
  }
  return pooled;
}

}  // namespace

StubTextEncoder StubTextEncoder::create(std::size_t token_dim, std::size_t embed_dim,
                                        std::uint64_t seed) {
  StubTextEncoder enc;
  enc.seed = seed;
  enc.projection = Matrix(token_dim, embed_dim);
  Rng rng(derive_seed(seed, {0x7e47}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(token_dim));
  for (double& v : enc.projection.values()) v = scale * rng.normal();
  return enc;
}

ContextVectors init_context(std::size_t p, std::size_t token_dim, std::uint64_t seed) {
  if (p == 0) throw InvalidArgument("init_context: p must be at least 1");
  ContextVectors ctx{Matrix(p, token_dim)};
  Rng rng(derive_seed(seed, {0xc0de}));
  for (double& v : ctx.v.values()) v = rng.normal(0.0, kContextInitStd);
  return ctx;
}

Matrix layer_norm_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    auto o = out.row(i);
    for (std::size_t d = 0; d < in.size(); ++d) o[d] = (in[d] - mean) * inv;
  }
  return out;
}

Matrix layer_norm_rows_backward(const Matrix& x, const Matrix& grad_output) {
  const Matrix xhat = layer_norm_rows(x);
  Matrix grad(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);

    auto g = grad_output.row(i);
    auto h = xhat.row(i);
    double g_mean = 0.0;
    double gh_mean = 0.0;
    for (std::size_t d = 0; d < g.size(); ++d) {
      g_mean += g[d];
      gh_mean += g[d] * h[d];
    }
    g_mean /= n;
    gh_mean /= n;
    auto out = grad.row(i);
    for (std::size_t d = 0; d < g.size(); ++d) out[d] = inv * (g[d] - g_mean - h[d] * gh_mean);
  }
  return grad;
}

Matrix encode_texts(const ContextVectors& ctx, const ClassTokenTable& table,
                    const StubTextEncoder& enc, bool use_context) {
  check_dims(ctx, table, enc, use_context);
  return layer_norm_rows(matmul(pool(ctx, table, use_context), enc.projection));
}

Matrix encode_texts_backward(const ContextVectors& ctx, const ClassTokenTable& table,
                             const StubTextEncoder& enc, const Matrix& grad_output,
                             bool use_context) {
  check_dims(ctx, table, enc, use_context);
  Matrix grad_ctx(ctx.count(), ctx.dim());
  if (!use_context) return grad_ctx;
  const Matrix projected = matmul(pool(ctx, table, use_context), enc.projection);
  const Matrix grad_projected = layer_norm_rows_backward(projected, grad_output);
  const Matrix grad_pooled = matmul_nt(grad_projected, enc.projection);
  // Every context row enters every pooled row with weight 1/(p+1).
  Matrix per_row = column_sums(grad_pooled) * (1.0 / static_cast<double>(ctx.count() + 1));
  for (std::size_t k = 0; k < ctx.count(); ++k) {
    auto r = grad_ctx.row(k);
    for (std::size_t d = 0; d < r.size(); ++d) r[d] = per_row[d];
  }
  return grad_ctx;
}

}  // namespace ooal
