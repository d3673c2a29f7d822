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

#ifndef OOAL_TRAINING_HPP_
#define OOAL_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ooal/data.hpp"
#include "ooal/model.hpp"

namespace ooal {

inline constexpr double kBceEps = 1e-12;

struct TrainConfig {
  double lr = 0.01;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  std::size_t p = 8;
  std::size_t j = 3;
  std::size_t t = 2;
  std::size_t C = 32;
  std::size_t C_t = 32;
  std::size_t log_every = 100;
  Ablation ablation = Ablation::kNone;

  void validate() const;
  ModelConfig model_config(std::size_t visual_dim, std::size_t num_classes) const;
};

// Mean over H·W·N of −[y·ln(s+ε) + (1−y)·ln(1−s+ε)].
double bce_loss(const Prediction& pred, const AffordanceTarget& target);
// dLoss/d(pixel logit), (H·W)×N.
Matrix bce_grad_logits(const Prediction& pred, const AffordanceTarget& target);

using Gradients = ModelParams;

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

// Forward pass plus analytic gradients of the BCE loss for one image.
// Throws NumericError naming the first parameter with a non-finite gradient.
LossAndGrad backward(const Model& model, const FeatureStack& features,
                     const AffordanceTarget& target);

double loss_only(const Model& model, const FeatureStack& features, const AffordanceTarget& target);

// θ ← θ − lr·g for every trainable tensor.
void sgd_step(ModelParams& params, const Gradients& grads, double lr);

struct LossRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LossRecord> log;
};

// Plain SGD with batch size 1. Each epoch visits the training set in a
// fresh Fisher-Yates order drawn from the config seed. The loss of
// iteration i is logged when i % log_every == 0.
TrainResult train(const TrainConfig& cfg, const std::vector<LoadedItem>& trainset,
                  const std::vector<std::string>& class_names,
                  std::optional<Matrix> fixed_text_embeddings = std::nullopt);

void write_loss_csv(const std::vector<LossRecord>& log, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints reuse the OOALFT01 framing. The seven header words are
// (n_tensors, 0, 0, 0, 0, version, 0); L = 0 marks a parameter manifest.
// Then: u32 length + JSON metadata (config, class names), n_tensors ×
// (u32 name length, name, u32 rows, u32 cols), and the f64 payloads in
// manifest order. Frozen text tensors are stored under "frozen.*".

std::vector<unsigned char> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::vector<unsigned char> bytes, const std::string& what);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
// With `expected`, any hyperparameter mismatch raises ShapeError.
Model load_checkpoint(const std::filesystem::path& path,
                      const std::optional<ModelConfig>& expected = std::nullopt);

// ---------------------------------------------------------------------------

struct GradCheckEntry {
  std::string tensor;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_error = 0.0;
};

// Central differences (θ ± step) of loss_only against backward(), per entry
// rel = |analytic − numeric| / max(|analytic|, |numeric|, 1e-6).
GradCheckReport finite_difference_check(const Model& model, const FeatureStack& features,
                                        const AffordanceTarget& target, double step = 1e-5);

// Random model/input of the given shape for gradient checks.
struct GradCheckProblem {
  Model model;
  FeatureStack features;
  AffordanceTarget target;
};
GradCheckProblem make_grad_check_problem(std::uint64_t seed, std::size_t N = 3,
                                         GridSize grid = {2, 2}, std::size_t C = 8,
                                         std::size_t C_v = 12, std::size_t p = 2,
                                         std::size_t j = 2, std::size_t t = 2,
                                         GridSize image_size = {5, 4});

}  // namespace ooal

#endif  // OOAL_TRAINING_HPP_
