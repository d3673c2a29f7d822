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

#include "ooal/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <json.hpp>

#include "ooal/container.hpp"
#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void check_target(const Prediction& pred, const AffordanceTarget& target) {
  if (!pred.scores.same_shape(target.values)) {
    throw ShapeError("bce: prediction " + pred.scores.shape_string() + " vs target " +
                     target.values.shape_string());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("config: lr must be positive");
  if (log_every == 0) throw InvalidArgument("config: log_every must be at least 1");
  if (p == 0 || j == 0) throw InvalidArgument("config: p and j must be at least 1");
  if (C == 0 || C_t == 0) throw InvalidArgument("config: zero dimension");
}

ModelConfig TrainConfig::model_config(std::size_t visual_dim, std::size_t num_classes) const {
  ModelConfig m;
  m.p = p;
  m.j = j;
  m.t = t;
  m.embed_dim = C;
  m.token_dim = C_t;
  m.visual_dim = visual_dim;
  m.num_classes = num_classes;
  m.ablation = ablation;
  return m;
}

double bce_loss(const Prediction& pred, const AffordanceTarget& target) {
  check_target(pred, target);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.scores.size(); ++i) {
    const double s = pred.scores[i];
    const double y = target.values[i];
    total -= y * std::log(s + kBceEps) + (1.0 - y) * std::log(1.0 - s + kBceEps);
  }
  return total / static_cast<double>(pred.scores.size());
}

Matrix bce_grad_logits(const Prediction& pred, const AffordanceTarget& target) {
  check_target(pred, target);
  Matrix g(pred.scores.rows(), pred.scores.cols());
  const double inv = 1.0 / static_cast<double>(pred.scores.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = pred.scores[i];
    const double y = target.values[i];
    const double ds = -(y / (s + kBceEps) - (1.0 - y) / (1.0 - s + kBceEps));
    g[i] = inv * ds * s * (1.0 - s);
  }
  return g;
}

double loss_only(const Model& model, const FeatureStack& features, const AffordanceTarget& target) {
  return bce_loss(forward(model, features), target);
}

LossAndGrad backward(const Model& model, const FeatureStack& features,
                     const AffordanceTarget& target) {
  ForwardCache cache;
  const Prediction pred = forward(model, features, &cache);
  LossAndGrad out;
  out.loss = bce_loss(pred, target);

  const Matrix grad_pixel = bce_grad_logits(pred, target);
  const Matrix grad_logits = upsample_adjoint(grad_pixel, pred.grid, pred.image_size);
  // logits = F_v · F_t'ᵀ
  Matrix grad_visual = matmul(grad_logits, cache.decoded);
  const Matrix grad_decoded = matmul_tn(grad_logits, cache.visual);

  const DecoderOptions opts{model.config.use_cls_mask()};
  DecodeGrads dg = decode_backward(cache.visual, features.cls, model.params.decoder,
                                   cache.decoder, grad_decoded, opts);
  grad_visual += dg.visual;

  const EmbedGrads eg = embed_backward(cache.fused, model.params.embedder, grad_visual);
  const FusionGrads fg = fuse_backward(features, model.params.fusion, eg.input);

  Gradients& g = out.grads;
  if (model.text.fixed_embeddings) {
    g.ctx.v = Matrix(model.params.ctx.count(), model.params.ctx.dim());
  } else {
    g.ctx.v = encode_texts_backward(model.params.ctx, model.text.tokens, model.text.encoder,
                                    dg.text, model.config.use_context());
  }
  g.fusion.proj = fg.proj;
  g.fusion.alpha_logits = fg.alpha_logits;
  g.embedder.weight = eg.weight;
  g.embedder.bias = eg.bias;
  g.decoder.layers = std::move(dg.layers);

  for_each_tensor(g, [](const std::string& name, const Matrix& m) {
    if (!all_finite(m)) throw NumericError("non-finite gradient for parameter " + name);
  });
  return out;
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr) {
  std::vector<const Matrix*> g;
  for_each_tensor(grads, [&](const std::string&, const Matrix& m) { g.push_back(&m); });
  std::size_t k = 0;
  for_each_tensor(params, [&](const std::string& name, Matrix& m) {
    if (k >= g.size() || !m.same_shape(*g[k])) {
      throw ShapeError("sgd_step: gradient shape mismatch for " + name);
    }
    const auto gv = g[k]->values();
    auto pv = m.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= lr * gv[i];
    ++k;
  });
  if (k != g.size()) throw ShapeError("sgd_step: gradient tensor count mismatch");
}

TrainResult train(const TrainConfig& cfg, const std::vector<LoadedItem>& trainset,
                  const std::vector<std::string>& class_names,
                  std::optional<Matrix> fixed_text_embeddings) {
  cfg.validate();
  if (trainset.empty()) throw InvalidArgument("train: empty training set");
  const std::size_t visual_dim = trainset.front().features.dim();
  for (const auto& item : trainset) {
    item.features.validate();
    item.target.validate();
    if (item.features.dim() != visual_dim) throw ShapeError("train: mixed feature dims");
    if (item.target.num_classes() != class_names.size()) {
      throw ShapeError("train: item " + item.id + " target channels vs class names");
    }
  }

  TrainResult result;
  result.model = init_model(cfg.model_config(visual_dim, class_names.size()), class_names,
                            cfg.seed, std::move(fixed_text_embeddings));
  Rng order_rng(derive_seed(cfg.seed, {0x5eed}));
  std::vector<std::size_t> order(trainset.size());
  std::size_t cursor = order.size();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[order_rng.uniform_index(i)]);
      }
      cursor = 0;
    }
    const LoadedItem& item = trainset[order[cursor++]];
    LossAndGrad lg = backward(result.model, item.features, item.target);
    if (it % cfg.log_every == 0) result.log.push_back({it, lg.loss});
    sgd_step(result.model.params, lg.grads, cfg.lr);
  }
  return result;
}

void write_loss_csv(const std::vector<LossRecord>& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,loss\n" << std::setprecision(17);
  for (const auto& r : log) out << r.iteration << "," << r.loss << "\n";
}

// ---------------------------------------------------------------------------

namespace {

json config_to_json(const Model& m) {
  const ModelConfig& c = m.config;
  return {{"p", c.p},
          {"j", c.j},
          {"t", c.t},
          {"C", c.embed_dim},
          {"C_t", c.token_dim},
          {"C_v", c.visual_dim},
          {"N", c.num_classes},
          {"ablation", std::string(ablation_name(c.ablation))},
          {"classes", m.text.tokens.names},
          {"text_seed", m.text.encoder.seed},
          {"fixed_text", m.text.fixed_embeddings.has_value()}};
}

template <typename M, typename F>
void for_each_stored_tensor(M& m, F&& f) {
  for_each_tensor(m.params, f);
  f(std::string("frozen.text_projection"), m.text.encoder.projection);
  f(std::string("frozen.class_tokens"), m.text.tokens.tokens);
  if (m.text.fixed_embeddings) f(std::string("frozen.text_embeddings"), *m.text.fixed_embeddings);
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Model& model) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  for_each_stored_tensor(model, [&](const std::string& name, const Matrix& t) {
    tensors.emplace_back(name, &t);
  });

  ByteWriter w;
  w.put_bytes(kContainerMagic);
  w.put_u32(static_cast<std::uint32_t>(tensors.size()));
  for (int i = 0; i < 4; ++i) w.put_u32(0);
  w.put_u32(kCheckpointVersion);
  w.put_u32(0);
  const std::string meta = config_to_json(model).dump();
  w.put_u32(static_cast<std::uint32_t>(meta.size()));
  w.put_bytes(meta);
  for (const auto& [name, t] : tensors) {
    w.put_u32(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put_u32(static_cast<std::uint32_t>(t->rows()));
    w.put_u32(static_cast<std::uint32_t>(t->cols()));
  }
  for (const auto& entry : tensors) {
    for (double v : entry.second->values()) w.put_f64(v);
  }
  return w.bytes();
}

Model decode_checkpoint(std::vector<unsigned char> bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  expect_magic(r);
  std::uint32_t header[7];
  for (auto& h : header) h = r.get_u32();
  if (header[1] != 0) throw FormatError(what + ": feature file, not a checkpoint");
  if (header[5] != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(header[5]));
  }
  const std::uint32_t n_tensors = header[0];
  json meta;
  try {
    meta = json::parse(r.get_bytes(r.get_u32()));
  } catch (const json::exception& e) {
    throw CorruptionError(what + ": metadata: " + e.what());
  }

  Model m;
  try {
    m.config.p = meta.at("p");
    m.config.j = meta.at("j");
    m.config.t = meta.at("t");
    m.config.embed_dim = meta.at("C");
    m.config.token_dim = meta.at("C_t");
    m.config.visual_dim = meta.at("C_v");
    m.config.num_classes = meta.at("N");
    m.config.ablation = parse_ablation(meta.at("ablation").get<std::string>());
    m.text.tokens.names = meta.at("classes").get<std::vector<std::string>>();
    m.text.encoder.seed = meta.at("text_seed");
    if (meta.at("fixed_text").get<bool>()) m.text.fixed_embeddings = Matrix();
  } catch (const json::exception& e) {
    throw CorruptionError(what + ": metadata: " + e.what());
  }
  m.config.validate();

  // Shapes implied by the config.
  const ModelConfig& c = m.config;
  m.params.ctx.v = Matrix(c.p, c.token_dim);
  m.params.fusion.proj.assign(c.fusion_layers(), Matrix(c.visual_dim, c.visual_dim));
  m.params.fusion.alpha_logits = Matrix(1, c.fusion_layers());
  m.params.embedder = {Matrix(c.visual_dim, c.embed_dim), Matrix(1, c.embed_dim)};
  m.params.decoder = init_decoder(c.decoder_layers(), c.embed_dim, c.visual_dim, 0);
  m.text.encoder.projection = Matrix(c.token_dim, c.embed_dim);
  m.text.tokens.tokens = Matrix(c.num_classes, c.token_dim);
  if (m.text.fixed_embeddings) m.text.fixed_embeddings = Matrix(c.num_classes, c.embed_dim);

  std::vector<std::pair<std::string, Matrix*>> slots;
  for_each_stored_tensor(m, [&](const std::string& name, Matrix& t) { slots.emplace_back(name, &t); });
  if (slots.size() != n_tensors) {
    throw CorruptionError(what + ": " + std::to_string(n_tensors) + " tensors, config implies " +
                          std::to_string(slots.size()));
  }
  for (const auto& [name, t] : slots) {
    const std::string stored = r.get_bytes(r.get_u32());
    const std::size_t rows = r.get_u32();
    const std::size_t cols = r.get_u32();
    if (stored != name || rows != t->rows() || cols != t->cols()) {
      throw CorruptionError(what + ": manifest entry " + stored + " " + std::to_string(rows) +
                            "x" + std::to_string(cols) + " does not match " + name + " " +
                            t->shape_string());
    }
  }
  std::size_t payload = 0;
  for (const auto& s : slots) payload += s.second->size() * sizeof(double);
  if (r.remaining() != payload) {
    throw CorruptionError(what + ": payload holds " + std::to_string(r.remaining()) +
                          " bytes, manifest implies " + std::to_string(payload));
  }
  for (const auto& s : slots) {
    for (double& v : s.second->values()) v = r.get_f64();
  }
  m.text.tokens.validate();
  return m;
}

void save_checkpoint(const Model& model, const fs::path& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

Model load_checkpoint(const fs::path& path, const std::optional<ModelConfig>& expected) {
  Model m = decode_checkpoint(read_file_bytes(path), path.string());
  if (expected) {
    const ModelConfig& e = *expected;
    const ModelConfig& c = m.config;
    auto mismatch = [&](const char* field, std::size_t got, std::size_t want) {
      if (got != want) {
        throw ShapeError(path.string() + ": checkpoint has " + field + "=" + std::to_string(got) +
                         ", config expects " + std::to_string(want));
      }
    };
    mismatch("p", c.p, e.p);
    mismatch("j", c.j, e.j);
    mismatch("t", c.t, e.t);
    mismatch("C", c.embed_dim, e.embed_dim);
    mismatch("C_t", c.token_dim, e.token_dim);
    mismatch("C_v", c.visual_dim, e.visual_dim);
    mismatch("N", c.num_classes, e.num_classes);
    if (c.ablation != e.ablation) throw ShapeError(path.string() + ": ablation differs");
  }
  return m;
}

// ---------------------------------------------------------------------------

GradCheckReport finite_difference_check(const Model& model, const FeatureStack& features,
                                        const AffordanceTarget& target, double step) {
  const LossAndGrad analytic = backward(model, features, target);
  std::vector<const Matrix*> grads;
  for_each_tensor(analytic.grads, [&](const std::string&, const Matrix& g) { grads.push_back(&g); });

  Model probe = model;
  GradCheckReport report;
  std::size_t k = 0;
  for_each_tensor(probe.params, [&](const std::string& name, Matrix& theta) {
    GradCheckEntry entry{name, 0.0, 0.0};
    const Matrix& g = *grads[k++];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double plus = loss_only(probe, features, target);
      theta[i] = saved - step;
      const double minus = loss_only(probe, features, target);
      theta[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double abs_err = std::abs(numeric - g[i]);
      const double denom = std::max({std::abs(numeric), std::abs(g[i]), 1e-6});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.tensors.push_back(entry);
  });
  return report;
}

GradCheckProblem make_grad_check_problem(std::uint64_t seed, std::size_t N, GridSize grid,
                                         std::size_t C, std::size_t C_v, std::size_t p,
                                         std::size_t j, std::size_t t, GridSize image_size) {
  ModelConfig cfg;
  cfg.p = p;
  cfg.j = j;
  cfg.t = t;
  cfg.embed_dim = C;
  cfg.token_dim = C;
  cfg.visual_dim = C_v;
  std::vector<std::string> names;
  for (std::size_t n = 0; n < N; ++n) names.push_back("class" + std::to_string(n));

  GradCheckProblem prob;
  prob.model = init_model(cfg, names, seed);
  Rng rng(derive_seed(seed, {0x9c}));
  // Move every parameter off its structured init so no term is degenerate.
  for_each_tensor(prob.model.params, [&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v += 0.1 * rng.normal();
  });

  prob.features.grid = grid;
  prob.features.image_size = image_size;
  for (std::size_t k = 0; k < j + 1; ++k) {
    Matrix layer(grid.area(), C_v);
    for (double& v : layer.values()) v = rng.normal();
    prob.features.layers.push_back(std::move(layer));
  }
  prob.features.cls = column_sums(prob.features.last_layer()) *
                      (1.0 / static_cast<double>(grid.area()));

  prob.target.image_size = image_size;
  prob.target.kind = TargetKind::kDensifiedSparse;
  prob.target.values = Matrix(image_size.area(), N);
  for (double& v : prob.target.values.values()) v = rng.uniform();
  return prob;
}

}  // namespace ooal
