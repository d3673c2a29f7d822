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

#include "ooal/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ooal/decoder.hpp"
#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "ooal-manifest-1";

}  // namespace

void AffordanceTarget::validate() const {
  if (values.rows() != image_size.area()) throw ShapeError("AffordanceTarget: row count");
  for (double v : values.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("AffordanceTarget: value outside [0,1]");
    if (kind == TargetKind::kDenseBinary && v != 0.0 && v != 1.0) {
      throw InvalidArgument("AffordanceTarget: dense-binary target holds a fractional value");
    }
  }
}

AffordanceTarget densify(const KeypointAnnotation& kp, double sigma, GridSize image_size) {
  if (!(sigma > 0.0)) throw InvalidArgument("densify: sigma must be positive");
  const std::size_t H = image_size.rows;
  const std::size_t W = image_size.cols;
  AffordanceTarget t;
  t.image_size = image_size;
  t.kind = TargetKind::kDensifiedSparse;
  t.values = Matrix(H * W, kp.points.size());
  const double denom = 2.0 * sigma * sigma;
  for (std::size_t n = 0; n < kp.points.size(); ++n) {
    for (const Keypoint& p : kp.points[n]) {
      if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(W) &&
            p.y < static_cast<double>(H))) {
        throw InvalidArgument("densify: keypoint (" + std::to_string(p.x) + ", " +
                              std::to_string(p.y) + ") outside the image");
      }
    }
    double peak = 0.0;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double v = 0.0;
        for (const Keypoint& p : kp.points[n]) {
          const double dx = static_cast<double>(x) - p.x;
          const double dy = static_cast<double>(y) - p.y;
          v += std::exp(-(dx * dx + dy * dy) / denom);
        }
        t.values(y * W + x, n) = v;
        peak = std::max(peak, v);
      }
    }
    if (peak > 0.0) {
      for (std::size_t i = 0; i < H * W; ++i) t.values(i, n) /= peak;
    }
  }
  return t;
}

void save_target(const AffordanceTarget& target, const fs::path& path) {
  target.validate();
  FeatureStack s;
  s.layers.push_back(target.values);
  s.cls = Matrix(1, target.values.cols());
  s.grid = target.image_size;
  s.image_size = target.image_size;
  save_features(s, path);
}

AffordanceTarget load_target(const fs::path& path) {
  FeatureStack s = load_features(path);
  if (s.num_layers() != 1) throw FormatError(path.string() + ": mask files hold one layer");
  AffordanceTarget t;
  t.values = std::move(s.layers.front());
  t.image_size = s.image_size;
  if (t.image_size.area() != t.values.rows()) t.image_size = s.grid;
  const bool binary = std::all_of(t.values.values().begin(), t.values.values().end(),
                                  [](double v) { return v == 0.0 || v == 1.0; });
  t.kind = binary ? TargetKind::kDenseBinary : TargetKind::kDensifiedSparse;
  t.validate();
  return t;
}

AffordanceTarget synth_affordance_target(const SynthWorldSpec& world,
                                         const std::string& object_id) {
  const ObjectSpec& obj = world.object(object_id);
  Matrix indicator(world.grid.area(), world.num_affordances, -1.0);
  for (std::size_t r = 0; r < world.grid.rows; ++r) {
    for (std::size_t c = 0; c < world.grid.cols; ++c) {
      const int part = SynthWorldSpec::part_at(obj, r, c);
      if (part >= 0) indicator(r * world.grid.cols + c, world.parts[part].affordance) = 1.0;
    }
  }
  AffordanceTarget t;
  t.kind = TargetKind::kDenseBinary;
  t.image_size = world.image_size;
  t.values = upsample(indicator, world.grid, world.image_size);
  for (double& v : t.values.values()) v = v > 0.0 ? 1.0 : 0.0;
  return t;
}

// ---------------------------------------------------------------------------

const ManifestObject& DatasetManifest::object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return o;
  }
  throw InvalidArgument("manifest: unknown object " + id);
}

std::vector<const ManifestItem*> DatasetManifest::items_of(const std::string& object_id) const {
  std::vector<const ManifestItem*> out;
  for (const auto& it : items) {
    if (it.object == object_id) out.push_back(&it);
  }
  return out;
}

fs::path DatasetManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : root / p;
}

void DatasetManifest::validate(bool check_files) const {
  if (affordances.empty()) throw InvalidArgument("manifest: no affordances");
  std::set<std::string> names(affordances.begin(), affordances.end());
  if (names.size() != affordances.size()) throw InvalidArgument("manifest: duplicate affordance");
  std::set<std::string> ids;
  for (const auto& o : objects) {
    if (!ids.insert(o.id).second) throw InvalidArgument("manifest: duplicate object " + o.id);
  }
  std::set<std::string> item_ids;
  for (const auto& it : items) {
    if (!item_ids.insert(it.id).second) throw InvalidArgument("manifest: duplicate item " + it.id);
    if (!ids.count(it.object)) {
      throw InvalidArgument("manifest: item " + it.id + " names unknown object " + it.object);
    }
    if (!it.mask && !it.keypoints) {
      throw InvalidArgument("manifest: item " + it.id + " has no annotation");
    }
    if (it.keypoints && it.keypoints->points.size() != affordances.size()) {
      throw InvalidArgument("manifest: item " + it.id + " keypoint channels");
    }
    if (check_files) {
      if (!fs::exists(resolve(it.features))) {
        throw IoError("manifest: missing " + resolve(it.features).string());
      }
      if (it.mask && !fs::exists(resolve(*it.mask))) {
        throw IoError("manifest: missing " + resolve(*it.mask).string());
      }
    }
  }
  for (const auto& o : objects) {
    if (items_of(o.id).empty()) {
      throw InvalidArgument("manifest: object " + o.id + " has no items");
    }
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  try {
    if (j.value("format", std::string(kManifestFormat)) != kManifestFormat) {
      throw FormatError("manifest: unsupported format " + j["format"].dump());
    }
    m.affordances = j.at("affordances").get<std::vector<std::string>>();
    m.oneshot_seed = j.value("oneshot_seed", std::uint64_t{0});
    for (const auto& o : j.at("objects")) {
      const std::string split = o.at("split").get<std::string>();
      if (split != "base" && split != "novel") {
        throw InvalidArgument("manifest: split must be base or novel, got " + split);
      }
      m.objects.push_back({o.at("id").get<std::string>(), split == "novel"});
    }
    for (const auto& jt : j.at("items")) {
      ManifestItem it;
      it.id = jt.at("id").get<std::string>();
      it.object = jt.at("object").get<std::string>();
      it.features = jt.at("features").get<std::string>();
      const auto& ann = jt.at("annotation");
      if (ann.contains("mask")) it.mask = fs::path(ann.at("mask").get<std::string>());
      if (ann.contains("keypoints")) {
        KeypointAnnotation kp;
        kp.points.resize(m.affordances.size());
        for (const auto& [name, pts] : ann.at("keypoints").items()) {
          auto pos = std::find(m.affordances.begin(), m.affordances.end(), name);
          if (pos == m.affordances.end()) {
            throw InvalidArgument("manifest: item " + it.id + " uses unknown affordance " + name);
          }
          auto& dst = kp.points[static_cast<std::size_t>(pos - m.affordances.begin())];
          for (const auto& p : pts) dst.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        it.keypoints = std::move(kp);
        it.sigma = ann.value("sigma", 10.0);
      }
      m.items.push_back(std::move(it));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  json j;
  j["format"] = kManifestFormat;
  j["affordances"] = m.affordances;
  j["oneshot_seed"] = m.oneshot_seed;
  j["objects"] = json::array();
  for (const auto& o : m.objects) {
    j["objects"].push_back({{"id", o.id}, {"split", o.novel ? "novel" : "base"}});
  }
  j["items"] = json::array();
  for (const auto& it : m.items) {
    json ann = json::object();
    if (it.mask) ann["mask"] = it.mask->generic_string();
    if (it.keypoints) {
      json kp = json::object();
      for (std::size_t n = 0; n < it.keypoints->points.size(); ++n) {
        json pts = json::array();
        for (const auto& p : it.keypoints->points[n]) pts.push_back({p.x, p.y});
        kp[m.affordances[n]] = pts;
      }
      ann["keypoints"] = kp;
      ann["sigma"] = it.sigma;
    }
    j["items"].push_back({{"id", it.id},
                          {"object", it.object},
                          {"features", it.features.generic_string()},
                          {"annotation", ann}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<ManifestItem> build_oneshot_trainset(const DatasetManifest& manifest,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ManifestItem> out;
  for (const auto& o : manifest.objects) {
    if (o.novel) continue;
    const auto items = manifest.items_of(o.id);
    if (items.empty()) throw InvalidArgument("one-shot: base object " + o.id + " has no items");
    out.push_back(*items[rng.uniform_index(items.size())]);
  }
  return out;
}

EvalSplits split_eval_sets(const DatasetManifest& manifest) {
  std::set<std::string> train_ids;
  for (const auto& it : build_oneshot_trainset(manifest, manifest.oneshot_seed)) {
    train_ids.insert(it.id);
  }
  EvalSplits s;
  for (const auto& it : manifest.items) {
    if (manifest.object(it.object).novel) {
      s.unseen.push_back(it);
    } else if (!train_ids.count(it.id)) {
      s.seen.push_back(it);
    }
  }
  return s;
}

LoadedItem load_item(const DatasetManifest& manifest, const ManifestItem& item) {
  LoadedItem out;
  out.id = item.id;
  out.features = load_features(manifest.resolve(item.features));
  if (item.mask) {
    out.target = load_target(manifest.resolve(*item.mask));
  } else {
    out.target = densify(*item.keypoints, item.sigma, out.features.image_size);
  }
  out.keypoints = item.keypoints;
  if (out.target.num_classes() != manifest.affordances.size()) {
    throw ShapeError("item " + item.id + ": target has " +
                     std::to_string(out.target.num_classes()) + " channels, manifest lists " +
                     std::to_string(manifest.affordances.size()) + " affordances");
  }
  if (!(out.target.image_size == out.features.image_size)) {
    throw ShapeError("item " + item.id + ": target and feature image sizes differ");
  }
  return out;
}

// ---------------------------------------------------------------------------

DatasetManifest write_synth_dataset(const SynthDatasetOptions& options, const fs::path& dir) {
  if (options.items_per_object == 0) throw InvalidArgument("gen-synth: items_per_object = 0");
  SynthWorldOptions wo = options.world;
  wo.num_affordances = options.affordances.size();
  const SynthWorldSpec world = make_synth_world(wo);

  fs::create_directories(dir / "features");
  fs::create_directories(dir / "masks");
  DatasetManifest m;
  m.root = dir;
  m.affordances = options.affordances;
  m.oneshot_seed = options.world.seed;
  for (const auto& obj : world.objects) {
    m.objects.push_back({obj.id, obj.novel});
    const AffordanceTarget target = synth_affordance_target(world, obj.id);
    const fs::path mask_rel = fs::path("masks") / (obj.id + ".ooal");
    save_target(target, dir / mask_rel);
    for (std::size_t v = 0; v < options.items_per_object; ++v) {
      ManifestItem it;
      it.id = obj.id + "_" + std::to_string(v);
      it.object = obj.id;
      it.features = fs::path("features") / (it.id + ".ooal");
      it.mask = mask_rel;
      save_features(synth_vision_encode(world, obj.id, options.noise_scale, v),
                    dir / it.features);
      m.items.push_back(std::move(it));
    }
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace ooal
