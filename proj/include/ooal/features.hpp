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

#ifndef OOAL_FEATURES_HPP_
#define OOAL_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ooal/matrix.hpp"

namespace ooal {

struct GridSize {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t area() const { return rows * cols; }
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

// Per-image multi-layer patch features plus the [CLS] token.
//
// layers[k] is L×C_v with patches in row-major grid order; the last entry is
// the encoder's final layer. cls is 1×C_v.
struct FeatureStack {
  std::vector<Matrix> layers;
  Matrix cls;
  GridSize grid;
  GridSize image_size;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t num_patches() const { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t dim() const { return cls.cols(); }
  const Matrix& last_layer() const { return layers.back(); }

  // Throws ShapeError / NumericError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;
};

// Affordance vocabulary with one token embedding per class (N×C_t).
struct ClassTokenTable {
  std::vector<std::string> names;
  Matrix tokens;

  std::size_t size() const { return names.size(); }
  std::size_t dim() const { return tokens.cols(); }
  void validate() const;
};

// OOALFT01 feature container:
//   "OOALFT01", u32 n_layers, L, C_v, h_p, w_p, H, W (little-endian),
//   then f64 little-endian payload: layers in order, then cls.
void save_features(const FeatureStack& stack, const std::filesystem::path& path);
FeatureStack load_features(const std::filesystem::path& path);
std::vector<unsigned char> encode_features(const FeatureStack& stack);
FeatureStack decode_features(std::vector<unsigned char> bytes, const std::string& what);

// ---------------------------------------------------------------------------
// Synthetic planted-part world.

struct PartSpec {
  Matrix signature;  // 1×C_v
  std::size_t affordance = 0;
};

// Axis-aligned block of patches covered by one part.
struct PartPlacement {
  std::size_t part = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  bool covers(std::size_t r, std::size_t c) const {
    return r >= row && r < row + height && c >= col && c < col + width;
  }
};

struct ObjectSpec {
  std::string id;
  std::vector<PartPlacement> placements;
  bool novel = false;
};

struct SynthWorldSpec {
  std::uint64_t seed = 0;
  std::vector<PartSpec> parts;
  std::vector<ObjectSpec> objects;
  std::size_t num_affordances = 0;
  std::size_t num_layers = 4;
  std::size_t dim = 32;  // C_v
  GridSize grid{6, 6};
  GridSize image_size{16, 16};

  const ObjectSpec& object(const std::string& id) const;
  // Index of the part covering patch (r, c), or -1 for background.
  static int part_at(const ObjectSpec& object, std::size_t r, std::size_t c);
  void validate() const;
};

struct SynthWorldOptions {
  std::uint64_t seed = 0;
  std::size_t num_parts = 4;
  std::size_t num_base = 8;
  std::size_t num_novel = 2;
  std::size_t num_affordances = 4;
  std::size_t num_layers = 4;
  std::size_t dim = 32;
  GridSize grid{6, 6};
  GridSize image_size{16, 16};
};

// Draws part signatures (standard normal entries, pairwise |cos| < 0.5) and
// random tool-like layouts of 2-3 stacked parts per object. Base object i
// always contains part i mod num_parts so every part is seen in training.
SynthWorldSpec make_synth_world(const SynthWorldOptions& options);

// Layer k of n blends each patch's signature with a layer drift vector:
//   f = m_k·sig + (1 − m_k)·drift_k + noise_scale·ε,   m_k = (k + 1)/n
// so the last layer carries the plain signature. Uncovered patches use a
// background signature. `variant` selects an independent noise draw.
FeatureStack synth_vision_encode(const SynthWorldSpec& world, const std::string& object_id,
                                 double noise_scale, std::uint64_t variant = 0);

// Unit-norm seeded rows; the row for a name depends only on (name, seed).
ClassTokenTable synth_text_tokens(const std::vector<std::string>& names, std::size_t dim,
                                  std::uint64_t seed);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace ooal

#endif  // OOAL_FEATURES_HPP_
