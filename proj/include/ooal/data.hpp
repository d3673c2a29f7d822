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

#ifndef OOAL_DATA_HPP_
#define OOAL_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ooal/features.hpp"
#include "ooal/matrix.hpp"

namespace ooal {

enum class TargetKind { kDenseBinary, kDensifiedSparse };

// Dense ground truth M: (H·W)×N, pixel rows in row-major order, values in
// [0, 1]. Dense-binary targets hold only 0 and 1.
struct AffordanceTarget {
  Matrix values;
  GridSize image_size;
  TargetKind kind = TargetKind::kDenseBinary;

  std::size_t num_classes() const { return values.cols(); }
  void validate() const;
};

struct Keypoint {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

// Sparse annotation: one keypoint list per affordance channel.
struct KeypointAnnotation {
  std::vector<std::vector<Keypoint>> points;
};

// Per channel: sum of exp(−d²/(2σ²)) over its keypoints, divided by the
// channel max. Channels without keypoints stay zero.
AffordanceTarget densify(const KeypointAnnotation& kp, double sigma, GridSize image_size);

// Targets share the feature container: n_layers = 1, L = H·W, C_v = N,
// grid = image size, cls = zeros. Loading yields a dense-binary target when
// every value is 0 or 1, otherwise densified-sparse.
void save_target(const AffordanceTarget& target, const std::filesystem::path& path);
AffordanceTarget load_target(const std::filesystem::path& path);

// Planted-part ground truth: a pixel belongs to an affordance when the
// align-corners bilinear interpolation of the ±1 patch indicator is > 0,
// which is the decision boundary the model's upsampled logits can express.
AffordanceTarget synth_affordance_target(const SynthWorldSpec& world, const std::string& object_id);

// ---------------------------------------------------------------------------
// Dataset manifest (JSON, see README for the schema).

struct ManifestObject {
  std::string id;
  bool novel = false;
};

struct ManifestItem {
  std::string id;
  std::string object;
  std::filesystem::path features;
  std::optional<std::filesystem::path> mask;
  std::optional<KeypointAnnotation> keypoints;
  double sigma = 10.0;
};

struct DatasetManifest {
  std::vector<std::string> affordances;
  std::vector<ManifestObject> objects;
  std::vector<ManifestItem> items;
  std::uint64_t oneshot_seed = 0;
  std::filesystem::path root;  // relative paths resolve against this

  const ManifestObject& object(const std::string& id) const;
  std::vector<const ManifestItem*> items_of(const std::string& object_id) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Checks the invariants; with check_files also that referenced files exist.
  void validate(bool check_files = false) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Exactly one item per base object, in manifest object order. Selection
// uses a single Rng(seed) stream: object k takes item uniform_index(n_k).
std::vector<ManifestItem> build_oneshot_trainset(const DatasetManifest& manifest,
                                                 std::uint64_t seed);

struct EvalSplits {
  std::vector<ManifestItem> seen;
  std::vector<ManifestItem> unseen;
};

// seen = base-object items minus the one-shot training items (selected with
// manifest.oneshot_seed); unseen = every novel-object item.
EvalSplits split_eval_sets(const DatasetManifest& manifest);

// Materialized item: features plus dense target (and raw keypoints when the
// annotation carried them).
struct LoadedItem {
  std::string id;
  FeatureStack features;
  AffordanceTarget target;
  std::optional<KeypointAnnotation> keypoints;
};

LoadedItem load_item(const DatasetManifest& manifest, const ManifestItem& item);

// ---------------------------------------------------------------------------

struct SynthDatasetOptions {
  SynthWorldOptions world;
  std::vector<std::string> affordances{"grasp", "cut", "contain", "pound"};
  std::size_t items_per_object = 3;
  double noise_scale = 0.05;
};

// Writes manifest.json, features/*.ooal and masks/*.ooal under `dir`.
DatasetManifest write_synth_dataset(const SynthDatasetOptions& options,
                                    const std::filesystem::path& dir);

}  // namespace ooal

#endif  // OOAL_DATA_HPP_
