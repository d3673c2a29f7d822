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

#include "ooal/model.hpp"

#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kPromptLearning: return "tpl";
    case Ablation::kLayerFusion: return "mlff";
    case Ablation::kDecoder: return "td";
    case Ablation::kClsMask: return "ctm";
  }
  return "none";
}

Ablation parse_ablation(std::string_view name) {
  if (name == "none" || name.empty()) return Ablation::kNone;
  if (name == "tpl") return Ablation::kPromptLearning;
  if (name == "mlff") return Ablation::kLayerFusion;
  if (name == "td") return Ablation::kDecoder;
  if (name == "ctm") return Ablation::kClsMask;
  throw InvalidArgument("unknown ablation '" + std::string(name) + "' (tpl|mlff|td|ctm)");
}

void ModelConfig::validate() const {
  if (p == 0) throw InvalidArgument("config: p must be at least 1");
  if (j == 0) throw InvalidArgument("config: j must be at least 1");
  if (embed_dim == 0 || token_dim == 0 || visual_dim == 0) {
    throw InvalidArgument("config: zero dimension");
  }
  if (num_classes == 0) throw InvalidArgument("config: no classes");
}

Model init_model(const ModelConfig& config, const std::vector<std::string>& class_names,
                 std::uint64_t seed, std::optional<Matrix> fixed_text_embeddings) {
  ModelConfig cfg = config;
  cfg.num_classes = class_names.size();
  cfg.validate();
  Model m;
  m.config = cfg;
  m.params.ctx = init_context(cfg.p, cfg.token_dim, derive_seed(seed, {1}));
  m.params.fusion = init_fusion(cfg.fusion_layers(), cfg.visual_dim, derive_seed(seed, {2}));
  m.params.embedder = init_embedder(cfg.visual_dim, cfg.embed_dim, derive_seed(seed, {3}));
  m.params.decoder =
      init_decoder(cfg.decoder_layers(), cfg.embed_dim, cfg.visual_dim, derive_seed(seed, {4}));
  m.text.encoder = StubTextEncoder::create(cfg.token_dim, cfg.embed_dim, derive_seed(seed, {5}));
  m.text.tokens = synth_text_tokens(class_names, cfg.token_dim, derive_seed(seed, {6}));
  if (fixed_text_embeddings) {
    if (fixed_text_embeddings->rows() != cfg.num_classes ||
        fixed_text_embeddings->cols() != cfg.embed_dim) {
      throw ShapeError("init_model: text embeddings " + fixed_text_embeddings->shape_string() +
                       ", expected " + std::to_string(cfg.num_classes) + "x" +
                       std::to_string(cfg.embed_dim));
    }
    m.text.fixed_embeddings = std::move(fixed_text_embeddings);
  }
  return m;
}

Matrix text_embeddings(const Model& model) {
  if (model.text.fixed_embeddings) return *model.text.fixed_embeddings;
  return encode_texts(model.params.ctx, model.text.tokens, model.text.encoder,
                      model.config.use_context());
}

Prediction forward(const Model& model, const FeatureStack& stack, ForwardCache* cache) {
  if (stack.dim() != model.config.visual_dim) {
    throw ShapeError("forward: features have C_v=" + std::to_string(stack.dim()) +
                     ", model expects " + std::to_string(model.config.visual_dim));
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const DecoderOptions opts{model.config.use_cls_mask()};
  c.text = text_embeddings(model);
  c.fused = fuse(stack, model.params.fusion);
  c.visual = embed(c.fused, model.params.embedder);
  c.decoded = decode(c.text, c.visual, stack.cls, model.params.decoder, opts,
                     cache ? &c.decoder : nullptr);
  return predict(c.visual, c.decoded, stack.grid, stack.image_size);
}

}  // namespace ooal
