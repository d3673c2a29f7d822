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

#ifndef OOAL_FUSION_HPP_
#define OOAL_FUSION_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ooal/features.hpp"
#include "ooal/matrix.hpp"

namespace ooal {

// Weighted sum over the last j encoder layers, each passed through its own
// C_v×C_v linear map. Weights are softmax(alpha_logits), so they are
// positive and sum to one for any logits.
struct FusionParams {
  std::vector<Matrix> proj;  // proj[i] applies to layer n − i (0-based i)
  Matrix alpha_logits;       // 1×j

  std::size_t num_layers() const { return proj.size(); }
  std::vector<double> alpha() const;
};

// Single affine layer C_v → C.
struct Embedder {
  Matrix weight;  // C_v×C
  Matrix bias;    // 1×C
};

// proj_i = I + N(0, 0.01²), uniform α.
FusionParams init_fusion(std::size_t j, std::size_t dim, std::uint64_t seed);
Embedder init_embedder(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

Matrix fuse(const FeatureStack& stack, const FusionParams& fp);

struct FusionGrads {
  std::vector<Matrix> proj;
  Matrix alpha_logits;
};
FusionGrads fuse_backward(const FeatureStack& stack, const FusionParams& fp,
                          const Matrix& grad_output);

Matrix embed(const Matrix& fused, const Embedder& e);

struct EmbedGrads {
  Matrix weight;
  Matrix bias;
  Matrix input;
};
EmbedGrads embed_backward(const Matrix& fused, const Embedder& e, const Matrix& grad_output);

}  // namespace ooal

#endif  // OOAL_FUSION_HPP_
