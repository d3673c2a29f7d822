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

#ifndef OOAL_MODEL_HPP_
#define OOAL_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ooal/decoder.hpp"
#include "ooal/features.hpp"
#include "ooal/fusion.hpp"
#include "ooal/matrix.hpp"
#include "ooal/prompt.hpp"

namespace ooal {

// Disables one module of the full model (cumulative-module ablation rows).
enum class Ablation {
  kNone,
  kPromptLearning,  // tpl: class token only, no context vectors
  kLayerFusion,     // mlff: j = 1
  kDecoder,         // td: t = 0
  kClsMask,         // ctm: M_cls = 1
};

std::string_view ablation_name(Ablation a);
Ablation parse_ablation(std::string_view name);

struct ModelConfig {
  std::size_t p = 8;
  std::size_t j = 3;
  std::size_t t = 2;
  std::size_t embed_dim = 32;   // C
  std::size_t token_dim = 32;   // C_t
  std::size_t visual_dim = 32;  // C_v
  std::size_t num_classes = 0;  // N
  Ablation ablation = Ablation::kNone;

  std::size_t fusion_layers() const { return ablation == Ablation::kLayerFusion ? 1 : j; }
  std::size_t decoder_layers() const { return ablation == Ablation::kDecoder ? 0 : t; }
  bool use_context() const { return ablation != Ablation::kPromptLearning; }
  bool use_cls_mask() const { return ablation != Ablation::kClsMask; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Everything that is trained.
struct ModelParams {
  ContextVectors ctx;
  FusionParams fusion;
  Embedder embedder;
  DecoderParams decoder;
};

// Calls f(name, tensor) for every trainable tensor in a fixed order.
template <typename Params, typename F>
void for_each_tensor(Params& mp, F&& f) {
  f(std::string("ctx"), mp.ctx.v);
  for (std::size_t i = 0; i < mp.fusion.proj.size(); ++i) {
    f("fusion.proj." + std::to_string(i), mp.fusion.proj[i]);
  }
  f(std::string("fusion.alpha_logits"), mp.fusion.alpha_logits);
  f(std::string("embedder.weight"), mp.embedder.weight);
  f(std::string("embedder.bias"), mp.embedder.bias);
  for (std::size_t l = 0; l < mp.decoder.layers.size(); ++l) {
    auto& d = mp.decoder.layers[l];
    const std::string pre = "decoder." + std::to_string(l) + ".";
    f(pre + "wq", d.wq);
    f(pre + "wk", d.wk);
    f(pre + "wv", d.wv);
    f(pre + "wc", d.wc);
    f(pre + "ffn_w1", d.ffn_w1);
    f(pre + "ffn_b1", d.ffn_b1);
    f(pre + "ffn_w2", d.ffn_w2);
    f(pre + "ffn_b2", d.ffn_b2);
  }
}

// Frozen text side: the stub encoder with its class tokens, or precomputed
// N×C embeddings that bypass it.
struct FrozenText {
  StubTextEncoder encoder;
  ClassTokenTable tokens;
  std::optional<Matrix> fixed_embeddings;
};

struct Model {
  ModelConfig config;
  ModelParams params;
  FrozenText text;
};

// Seeded initialization. Text tokens come from synth_text_tokens(names,
// C_t, seed) unless fixed embeddings are given.
Model init_model(const ModelConfig& config, const std::vector<std::string>& class_names,
                 std::uint64_t seed, std::optional<Matrix> fixed_text_embeddings = std::nullopt);

Matrix text_embeddings(const Model& model);

struct ForwardCache {
  Matrix text;     // F_t
  Matrix fused;    // F̂_v
  Matrix visual;   // F_v
  Matrix decoded;  // F_t'
  std::vector<DecoderLayerCache> decoder;
};

Prediction forward(const Model& model, const FeatureStack& stack, ForwardCache* cache = nullptr);

}  // namespace ooal

#endif  // OOAL_MODEL_HPP_
