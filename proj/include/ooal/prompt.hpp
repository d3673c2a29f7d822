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

#ifndef OOAL_PROMPT_HPP_
#define OOAL_PROMPT_HPP_

#include <cstddef>
#include <cstdint>

#include "ooal/features.hpp"
#include "ooal/matrix.hpp"

namespace ooal {

// Learnable context vectors (p×C_t), shared by every affordance class.
struct ContextVectors {
  Matrix v;
  std::size_t count() const { return v.rows(); }
  std::size_t dim() const { return v.cols(); }
};

// Frozen stand-in for the text encoder: mean-pool, project, layer-norm.
struct StubTextEncoder {
  Matrix projection;  // C_t×C, never trained
  std::uint64_t seed = 0;

  static StubTextEncoder create(std::size_t token_dim, std::size_t embed_dim, std::uint64_t seed);
  std::size_t token_dim() const { return projection.rows(); }
  std::size_t embed_dim() const { return projection.cols(); }
};

// Entries drawn i.i.d. from N(0, 0.02²).
ContextVectors init_context(std::size_t p, std::size_t token_dim, std::uint64_t seed);

// Row i: layer_norm(mean([v_1 .. v_p, token_i]) · W_txt). With
// use_context = false the pooled sequence is the class token alone.
Matrix encode_texts(const ContextVectors& ctx, const ClassTokenTable& table,
                    const StubTextEncoder& enc, bool use_context = true);

// Gradient of a scalar loss w.r.t. the context, given dL/dF_t (N×C).
Matrix encode_texts_backward(const ContextVectors& ctx, const ClassTokenTable& table,
                             const StubTextEncoder& enc, const Matrix& grad_output,
                             bool use_context = true);

// Row-wise layer norm without affine parameters (population variance).
Matrix layer_norm_rows(const Matrix& x);
Matrix layer_norm_rows_backward(const Matrix& x, const Matrix& grad_output);

}  // namespace ooal

#endif  // OOAL_PROMPT_HPP_
