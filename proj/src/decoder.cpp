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

#include "ooal/decoder.hpp"

#include <cmath>

#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace {

constexpr std::size_t kFfnExpansion = 4;

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return m;
}

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m)) throw NumericError(std::string("decoder: non-finite ") + what);
}

void check_layer_dims(const Matrix& text, const Matrix& visual, const Matrix& cls,
                      const DecoderLayerParams& p) {
  const std::size_t C = text.cols();
  if (visual.cols() != C) {
    throw ShapeError("decoder_layer: text dim " + std::to_string(C) + " vs visual dim " +
                     std::to_string(visual.cols()));
  }
  if (p.wq.rows() != C || p.wq.cols() != C || !p.wk.same_shape(p.wq) ||
      !p.wv.same_shape(p.wq)) {
    throw ShapeError("decoder_layer: attention projections must be " + std::to_string(C) +
                     "x" + std::to_string(C));
  }
  if (cls.rows() != 1 || p.wc.rows() != cls.cols() || p.wc.cols() != C) {
    throw ShapeError("decoder_layer: cls " + cls.shape_string() + " with Wc " +
                     p.wc.shape_string());
  }
  if (p.ffn_w1.rows() != C || p.ffn_b1.cols() != p.ffn_w1.cols() ||
      p.ffn_w2.rows() != p.ffn_w1.cols() || p.ffn_w2.cols() != C || p.ffn_b2.cols() != C) {
    throw ShapeError("decoder_layer: feed-forward shapes");
  }
}

double inv_sqrt_dk(const Matrix& keys) { return 1.0 / std::sqrt(static_cast<double>(keys.cols())); }

}  // namespace

DecoderParams init_decoder(std::size_t t, std::size_t embed_dim, std::size_t visual_dim,
                           std::uint64_t seed) {
  DecoderParams dp;
  const double c = static_cast<double>(embed_dim);
  const std::size_t hidden = kFfnExpansion * embed_dim;
  for (std::size_t l = 0; l < t; ++l) {
    Rng rng(derive_seed(seed, {0xdec, l}));
    DecoderLayerParams p;
    p.wq = gaussian(embed_dim, embed_dim, 1.0 / std::sqrt(c), rng);
    p.wk = gaussian(embed_dim, embed_dim, 1.0 / std::sqrt(c), rng);
    p.wv = gaussian(embed_dim, embed_dim, 1.0 / std::sqrt(c), rng);
    p.wc = gaussian(visual_dim, embed_dim, 1.0 / std::sqrt(static_cast<double>(visual_dim)), rng);
    p.ffn_w1 = gaussian(embed_dim, hidden, 1.0 / std::sqrt(c), rng);
    p.ffn_b1 = Matrix(1, hidden);
    p.ffn_w2 = gaussian(hidden, embed_dim, 0.1 / std::sqrt(static_cast<double>(hidden)), rng);
    p.ffn_b2 = Matrix(1, embed_dim);
    dp.layers.push_back(std::move(p));
  }
  return dp;
}

Matrix cls_mask(const Matrix& cls, const Matrix& keys, const Matrix& wc) {
  if (cls.rows() != 1 || cls.cols() != wc.rows() || wc.cols() != keys.cols()) {
    throw ShapeError("cls_mask: cls " + cls.shape_string() + ", Wc " + wc.shape_string() +
                     ", K " + keys.shape_string());
  }
  Matrix m = matmul_nt(matmul(cls, wc), keys);
  const double scale = inv_sqrt_dk(keys);
  for (double& v : m.values()) v = sigmoid(v * scale);
  return m;
}

Matrix decoder_layer(const Matrix& text, const Matrix& visual, const Matrix& cls,
                     const DecoderLayerParams& p, const DecoderOptions& opts,
                     DecoderLayerCache* cache) {
  check_layer_dims(text, visual, cls, p);
  DecoderLayerCache local;
  DecoderLayerCache& c = cache ? *cache : local;
  c.text = text;
  c.q = matmul(text, p.wq);
  c.k = matmul(visual, p.wk);
  c.v = matmul(visual, p.wv);
  const double scale = inv_sqrt_dk(c.k);

  if (opts.use_cls_mask) {
    c.cls_proj = matmul(cls, p.wc);
    c.mask = cls_mask(cls, c.k, p.wc);
  } else {
    c.cls_proj = Matrix(1, text.cols());
    c.mask = Matrix(1, visual.rows(), 1.0);
  }

  c.attn = row_softmax(matmul_nt(c.q, c.k) * scale);
  Matrix masked = c.attn;
  for (std::size_t i = 0; i < masked.rows(); ++i) {
    auto r = masked.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= c.mask[j];
  }
  c.attended = matmul(masked, c.v) + text;
  require_finite(c.attended, "attention output");

  c.hidden_pre = add_row_vector(matmul(c.attended, p.ffn_w1), p.ffn_b1);
  c.hidden = c.hidden_pre;
  for (double& v : c.hidden.values()) v = v > 0.0 ? v : 0.0;
  c.output = add_row_vector(matmul(c.hidden, p.ffn_w2), p.ffn_b2) + c.attended;
  require_finite(c.output, "feed-forward output");
  return c.output;
}

DecoderLayerGrads decoder_layer_backward(const Matrix& visual, const Matrix& cls,
                                         const DecoderLayerParams& p,
                                         const DecoderLayerCache& c, const Matrix& grad_output,
                                         const DecoderOptions& opts) {
  DecoderLayerGrads g;
  const double scale = inv_sqrt_dk(c.k);

  // Feed-forward block with residual.
  g.params.ffn_w2 = matmul_tn(c.hidden, grad_output);
  g.params.ffn_b2 = column_sums(grad_output);
  Matrix grad_hidden = matmul_nt(grad_output, p.ffn_w2);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    if (c.hidden_pre[i] <= 0.0) grad_hidden[i] = 0.0;
  }
  g.params.ffn_w1 = matmul_tn(c.attended, grad_hidden);
  g.params.ffn_b1 = column_sums(grad_hidden);
  Matrix grad_attended = grad_output + matmul_nt(grad_hidden, p.ffn_w1);

  // F̂_t = B·V + F_t with B = A ⊙ 1·M.
  g.text = grad_attended;
  Matrix masked = c.attn;
  for (std::size_t i = 0; i < masked.rows(); ++i) {
    auto r = masked.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= c.mask[j];
  }
  const Matrix grad_masked = matmul_nt(grad_attended, c.v);
  Matrix grad_v = matmul_tn(masked, grad_attended);

  Matrix grad_attn = grad_masked;
  Matrix grad_mask(1, c.mask.cols());
  for (std::size_t i = 0; i < grad_attn.rows(); ++i) {
    auto r = grad_attn.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      grad_mask[j] += r[j] * c.attn(i, j);
      r[j] *= c.mask[j];
    }
  }

  // Row softmax: dS = A ⊙ (dA − rowsum(dA ⊙ A)).
  Matrix grad_scores(c.attn.rows(), c.attn.cols());
  for (std::size_t i = 0; i < c.attn.rows(); ++i) {
    const double s = dot(grad_attn.row(i), c.attn.row(i));
    for (std::size_t j = 0; j < c.attn.cols(); ++j) {
      grad_scores(i, j) = c.attn(i, j) * (grad_attn(i, j) - s) * scale;
    }
  }
  const Matrix grad_q = matmul(grad_scores, c.k);
  Matrix grad_k = matmul_tn(grad_scores, c.q);

  if (opts.use_cls_mask) {
    // M = sigmoid(u), u = (cls·Wc)·Kᵀ·scale.
    Matrix grad_u(1, c.mask.cols());
    for (std::size_t j = 0; j < grad_u.cols(); ++j) {
      grad_u[j] = grad_mask[j] * c.mask[j] * (1.0 - c.mask[j]) * scale;
    }
    const Matrix grad_cls_proj = matmul(grad_u, c.k);
    grad_k += matmul_tn(grad_u, c.cls_proj);
    g.params.wc = matmul_tn(cls, grad_cls_proj);
  } else {
    g.params.wc = Matrix(p.wc.rows(), p.wc.cols());
  }

  g.params.wq = matmul_tn(c.text, grad_q);
  g.text += matmul_nt(grad_q, p.wq);
  g.params.wk = matmul_tn(visual, grad_k);
  g.params.wv = matmul_tn(visual, grad_v);
  g.visual = matmul_nt(grad_k, p.wk) + matmul_nt(grad_v, p.wv);
  return g;
}

Matrix decode(const Matrix& text, const Matrix& visual, const Matrix& cls,
              const DecoderParams& dp, const DecoderOptions& opts,
              std::vector<DecoderLayerCache>* caches) {
  if (caches) caches->assign(dp.depth(), {});
  Matrix out = text;
  for (std::size_t l = 0; l < dp.depth(); ++l) {
    out = decoder_layer(out, visual, cls, dp.layers[l], opts, caches ? &(*caches)[l] : nullptr);
  }
  return out;
}

DecodeGrads decode_backward(const Matrix& visual, const Matrix& cls, const DecoderParams& dp,
                            const std::vector<DecoderLayerCache>& caches,
                            const Matrix& grad_output, const DecoderOptions& opts) {
  if (caches.size() != dp.depth()) throw ShapeError("decode_backward: cache/depth mismatch");
  DecodeGrads g;
  g.layers.resize(dp.depth());
  g.text = grad_output;
  g.visual = Matrix(visual.rows(), visual.cols());
  for (std::size_t l = dp.depth(); l-- > 0;) {
    DecoderLayerGrads lg =
        decoder_layer_backward(visual, cls, dp.layers[l], caches[l], g.text, opts);
    g.layers[l] = std::move(lg.params);
    g.text = std::move(lg.text);
    g.visual += lg.visual;
  }
  return g;
}

Matrix bilinear_weights(std::size_t out, std::size_t in) {
  if (in == 0 || out == 0) throw ShapeError("bilinear_weights: empty axis");
  Matrix w(out, in);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = out == 1 ? 0.0
                                : static_cast<double>(o) * static_cast<double>(in - 1) /
                                      static_cast<double>(out - 1);
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    w(o, i0) += 1.0 - frac;
    w(o, i1) += frac;
  }
  return w;
}

Matrix upsample(const Matrix& patch_map, GridSize grid, GridSize image_size) {
  if (patch_map.rows() != grid.area()) {
    throw ShapeError("upsample: " + std::to_string(patch_map.rows()) + " rows for a " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  }
  const Matrix wy = bilinear_weights(image_size.rows, grid.rows);
  const Matrix wx = bilinear_weights(image_size.cols, grid.cols);
  const std::size_t n = patch_map.cols();
  // Columns first: (h·W)×N.
  Matrix tmp(grid.rows * image_size.cols, n);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t x = 0; x < image_size.cols; ++x) {
      auto dst = tmp.row(r * image_size.cols + x);
      for (std::size_t c = 0; c < grid.cols; ++c) {
        const double w = wx(x, c);
        if (w == 0.0) continue;
        auto src = patch_map.row(r * grid.cols + c);
        for (std::size_t k = 0; k < n; ++k) dst[k] += w * src[k];
      }
    }
  }
  Matrix out(image_size.area(), n);
  for (std::size_t y = 0; y < image_size.rows; ++y) {
    for (std::size_t r = 0; r < grid.rows; ++r) {
      const double w = wy(y, r);
      if (w == 0.0) continue;
      for (std::size_t x = 0; x < image_size.cols; ++x) {
        auto dst = out.row(y * image_size.cols + x);
        auto src = tmp.row(r * image_size.cols + x);
        for (std::size_t k = 0; k < n; ++k) dst[k] += w * src[k];
      }
    }
  }
  return out;
}

Matrix upsample_adjoint(const Matrix& pixel_map, GridSize grid, GridSize image_size) {
  if (pixel_map.rows() != image_size.area()) throw ShapeError("upsample_adjoint: row count");
  const Matrix wy = bilinear_weights(image_size.rows, grid.rows);
  const Matrix wx = bilinear_weights(image_size.cols, grid.cols);
  const std::size_t n = pixel_map.cols();
  Matrix tmp(grid.rows * image_size.cols, n);
  for (std::size_t y = 0; y < image_size.rows; ++y) {
    for (std::size_t r = 0; r < grid.rows; ++r) {
      const double w = wy(y, r);
      if (w == 0.0) continue;
      for (std::size_t x = 0; x < image_size.cols; ++x) {
        auto dst = tmp.row(r * image_size.cols + x);
        auto src = pixel_map.row(y * image_size.cols + x);
        for (std::size_t k = 0; k < n; ++k) dst[k] += w * src[k];
      }
    }
  }
  Matrix out(grid.area(), n);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t x = 0; x < image_size.cols; ++x) {
      auto src = tmp.row(r * image_size.cols + x);
      for (std::size_t c = 0; c < grid.cols; ++c) {
        const double w = wx(x, c);
        if (w == 0.0) continue;
        auto dst = out.row(r * grid.cols + c);
        for (std::size_t k = 0; k < n; ++k) dst[k] += w * src[k];
      }
    }
  }
  return out;
}

Prediction predict(const Matrix& visual, const Matrix& text, GridSize grid, GridSize image_size) {
  if (visual.rows() != grid.area()) {
    throw ShapeError("predict: grid " + std::to_string(grid.rows) + "x" +
                     std::to_string(grid.cols) + " does not match L=" +
                     std::to_string(visual.rows()));
  }
  if (visual.cols() != text.cols()) throw ShapeError("predict: embedding dims differ");
  Prediction pred;
  pred.grid = grid;
  pred.image_size = image_size;
  pred.logits = matmul_nt(visual, text);
  pred.pixel_logits = upsample(pred.logits, grid, image_size);
  pred.scores = pred.pixel_logits;
  for (double& v : pred.scores.values()) v = sigmoid(v);
  return pred;
}

}  // namespace ooal
