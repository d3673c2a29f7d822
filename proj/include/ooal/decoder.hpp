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

#ifndef OOAL_DECODER_HPP_
#define OOAL_DECODER_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ooal/features.hpp"
#include "ooal/matrix.hpp"

namespace ooal {

// One CLS-guided cross-attention block. Text embeddings are the queries,
// visual features the keys and values. Single head, d_k = C.
struct DecoderLayerParams {
  Matrix wq;  // C×C
  Matrix wk;  // C×C
  Matrix wv;  // C×C
  Matrix wc;  // C_v×C, applied to the [CLS] token
  Matrix ffn_w1;  // C×4C
  Matrix ffn_b1;  // 1×4C
  Matrix ffn_w2;  // 4C×C
  Matrix ffn_b2;  // 1×C
};

struct DecoderParams {
  std::vector<DecoderLayerParams> layers;
  std::size_t depth() const { return layers.size(); }
};

DecoderParams init_decoder(std::size_t t, std::size_t embed_dim, std::size_t visual_dim,
                           std::uint64_t seed);

// M_cls = sigmoid((cls·Wc)·Kᵀ / √d_k), returned as 1×L.
Matrix cls_mask(const Matrix& cls, const Matrix& keys, const Matrix& wc);

// Intermediates kept for the backward pass.
struct DecoderLayerCache {
  Matrix text;      // F_t, N×C
  Matrix q, k, v;   // N×C, L×C, L×C
  Matrix cls_proj;  // 1×C
  Matrix mask;      // 1×L
  Matrix attn;      // N×L, row-softmax before masking
  Matrix attended;  // F̂_t = (A ⊙ M)·V + F_t
  Matrix hidden_pre;  // F̂_t·W1 + b1
  Matrix hidden;      // max(0, hidden_pre)
  Matrix output;
};

struct DecoderOptions {
  // Replaces M_cls with all-ones (mask ablation).
  bool use_cls_mask = true;
};

// output = FFN(F̂_t) + F̂_t with F̂_t = (A ⊙ 1·M_cls)·V + F_t.
Matrix decoder_layer(const Matrix& text, const Matrix& visual, const Matrix& cls,
                     const DecoderLayerParams& p, const DecoderOptions& opts = {},
                     DecoderLayerCache* cache = nullptr);

struct DecoderLayerGrads {
  DecoderLayerParams params;
  Matrix text;
  Matrix visual;
};

DecoderLayerGrads decoder_layer_backward(const Matrix& visual, const Matrix& cls,
                                         const DecoderLayerParams& p,
                                         const DecoderLayerCache& cache,
                                         const Matrix& grad_output,
                                         const DecoderOptions& opts = {});

// Sequential application of every layer; depth 0 returns `text` unchanged.
Matrix decode(const Matrix& text, const Matrix& visual, const Matrix& cls,
              const DecoderParams& dp, const DecoderOptions& opts = {},
              std::vector<DecoderLayerCache>* caches = nullptr);

struct DecodeGrads {
  std::vector<DecoderLayerParams> layers;
  Matrix text;
  Matrix visual;
};

DecodeGrads decode_backward(const Matrix& visual, const Matrix& cls, const DecoderParams& dp,
                            const std::vector<DecoderLayerCache>& caches,
                            const Matrix& grad_output, const DecoderOptions& opts = {});

// Per-pixel, per-affordance scores.
//
// logits are L×N at patch resolution; scores are (H·W)×N with pixel rows in
// row-major order, after align-corners bilinear upsampling of the logits
// followed by a sigmoid.
struct Prediction {
  Matrix logits;
  Matrix pixel_logits;
  Matrix scores;
  GridSize grid;
  GridSize image_size;

  std::size_t num_classes() const { return logits.cols(); }
};

Prediction predict(const Matrix& visual, const Matrix& text, GridSize grid, GridSize image_size);

// Align-corners bilinear interpolation matrix (out×in): source coordinate
// of output index o is o·(in−1)/(out−1), or 0 when out == 1.
Matrix bilinear_weights(std::size_t out, std::size_t in);

// (h·w)×N patch map → (H·W)×N pixel map, and its adjoint.
Matrix upsample(const Matrix& patch_map, GridSize grid, GridSize image_size);
Matrix upsample_adjoint(const Matrix& pixel_map, GridSize grid, GridSize image_size);

}  // namespace ooal

#endif  // OOAL_DECODER_HPP_
