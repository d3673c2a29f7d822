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

#ifndef OOAL_ANALYSIS_HPP_
#define OOAL_ANALYSIS_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ooal/features.hpp"
#include "ooal/matrix.hpp"

namespace ooal {

struct PcaResult {
  Matrix scores;                        // L×k
  Matrix components;                    // k×C_v, unit rows
  std::vector<double> explained_variance;  // per component, nonincreasing
  std::vector<double> explained_ratio;     // explained_variance / total variance
  std::vector<double> mean;             // column means removed before projection
  std::size_t iterations = 0;
};

// Top-k principal components of the rows of `features`.
//
// Orthogonal (subspace) power iteration on the sample covariance with a
// Rayleigh-Ritz rotation each sweep, stopped when every Ritz pair satisfies
// ‖Σq − λq‖ ≤ 1e-10·max(λ_1, 1e-300). Each direction is sign-fixed so its
// largest-magnitude entry is positive. Raises InvalidArgument for k ≥ L and
// NumericError when 10k sweeps do not converge.
PcaResult pca_project(const Matrix& features, std::size_t k);

// Stacks the rows of several matrices (cross-image PCA).
Matrix concat_rows(const std::vector<Matrix>& parts);

struct SimilarityMap {
  Matrix map;  // h_p×w_p cosine similarities
  std::size_t zero_norm = 0;  // cells reported as 0 because a norm vanished
};

// Cosine similarity between `query` and every patch of `layer` (negative
// values index from the last layer, -1 = last).
SimilarityMap similarity_map(std::span<const double> query, const FeatureStack& target,
                             int layer = -1);

enum class Colormap { kHeat, kCoolWarm };
Colormap parse_colormap(const std::string& name);

// 3-anchor linear colormaps, anchors at t = 0, 0.5, 1:
//   heat:     (0,0,0)   → (255,0,0)     → (255,255,0)
//   coolwarm: (0,0,255) → (255,255,255) → (255,0,0)
// Channel value = round(a + (b − a)·s) within the active segment.
std::array<unsigned char, 3> colormap_rgb(double t, Colormap cmap);

// Binary PPM (P6), one pixel per cell scaled by `scale`, values min-max
// normalized (a constant map renders as t = 0).
std::vector<unsigned char> encode_heatmap(const Matrix& map, Colormap cmap, std::size_t scale = 1);
void render_heatmap(const Matrix& map, const std::filesystem::path& path, Colormap cmap,
                    std::size_t scale = 1);

}  // namespace ooal

#endif  // OOAL_ANALYSIS_HPP_
