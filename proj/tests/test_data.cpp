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

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ooal/data.hpp"
#include "ooal/errors.hpp"
#include "test_util.hpp"

namespace ooal {
namespace {

using testing::TempDir;

double at(const AffordanceTarget& t, std::size_t x, std::size_t y, std::size_t n = 0) {
  return t.values(y * t.image_size.cols + x, n);
}

TEST(Densify, SinglePointPeakAndRadialSymmetry) {
  const AffordanceTarget t = densify({{{{5.0, 5.0}}}}, 2.0, {11, 11});
  EXPECT_EQ(t.kind, TargetKind::kDensifiedSparse);
  EXPECT_EQ(at(t, 5, 5), 1.0);
  for (std::size_t dx = 0; dx <= 5; ++dx) {
    for (std::size_t dy = 0; dy <= 5; ++dy) {
      const double v = at(t, 5 + dx, 5 + dy);
      EXPECT_EQ(v, at(t, 5 - dx, 5 + dy));
      EXPECT_EQ(v, at(t, 5 + dx, 5 - dy));
      EXPECT_EQ(v, at(t, 5 + dy, 5 + dx));
      EXPECT_NEAR(v, std::exp(-static_cast<double>(dx * dx + dy * dy) / 8.0), 1e-15);
    }
  }
}

TEST(Densify, EmptyChannelStaysZero) {
  const AffordanceTarget t = densify({{{{1.0, 1.0}}, {}}}, 1.0, {4, 4});
  ASSERT_EQ(t.num_classes(), 2u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(t.values(i, 1), 0.0);
}

TEST(Densify, TwoPointMidpointMatchesClosedForm) {
  const double sigma = 2.0;
  const std::vector<Keypoint> pts{{2.0, 5.0}, {12.0, 5.0}};
  const AffordanceTarget t = densify({{pts}}, sigma, {11, 15});
  // Independent brute-force channel max.
  double peak = 0.0;
  for (int y = 0; y < 11; ++y) {
    for (int x = 0; x < 15; ++x) {
      double v = 0.0;
      for (const auto& p : pts) v += std::exp(-((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)) / 8.0);
      peak = std::max(peak, v);
    }
  }
  EXPECT_NEAR(at(t, 7, 5), 2.0 * std::exp(-25.0 / 8.0) / peak, 1e-9);
}

TEST(Densify, PermutationInvariantAndConcentrated) {
  const std::vector<Keypoint> a{{1.0, 2.0}, {6.5, 3.0}, {4.0, 7.0}};
  const std::vector<Keypoint> b{a[2], a[0], a[1]};
  const AffordanceTarget ta = densify({{a}}, 1.5, {9, 9});
  const AffordanceTarget tb = densify({{b}}, 1.5, {9, 9});
  EXPECT_LT(testing::max_abs_diff(ta.values, tb.values), 1e-15);
  const AffordanceTarget lone = densify({{{{2.0, 2.0}}}}, 1.0, {8, 8});
  EXPECT_LT(at(lone, 5, 2), 0.012);
  for (double v : ta.values.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Densify, Errors) {
  EXPECT_THROW(densify({{{{4.0, 1.0}}}}, 1.0, {4, 4}), InvalidArgument);
  EXPECT_THROW(densify({{{{-0.5, 1.0}}}}, 1.0, {4, 4}), InvalidArgument);
  EXPECT_THROW(densify({{{{1.0, 1.0}}}}, 0.0, {4, 4}), InvalidArgument);
}

TEST(TargetFile, RoundTripAndKindInference) {
  TempDir dir;
  AffordanceTarget bin;
  bin.image_size = {3, 2};
  bin.values = Matrix(6, 2);
  bin.values(1, 0) = bin.values(4, 1) = 1.0;
  save_target(bin, dir / "b.ooal");
  const AffordanceTarget b2 = load_target(dir / "b.ooal");
  EXPECT_EQ(b2.values, bin.values);
  EXPECT_EQ(b2.kind, TargetKind::kDenseBinary);
  EXPECT_EQ(b2.image_size, bin.image_size);

  const AffordanceTarget soft = densify({{{{1.0, 1.0}}}}, 1.0, {3, 4});
  save_target(soft, dir / "s.ooal");
  const AffordanceTarget s2 = load_target(dir / "s.ooal");
  EXPECT_EQ(s2.values, soft.values);
  EXPECT_EQ(s2.kind, TargetKind::kDensifiedSparse);
}

DatasetManifest in_memory_manifest(std::size_t base, std::size_t novel,
                                   std::vector<std::size_t> items_per_object) {
  DatasetManifest m;
  m.affordances = {"grasp", "cut"};
  for (std::size_t i = 0; i < base + novel; ++i) {
    const std::string id = "obj" + std::to_string(i);
    m.objects.push_back({id, i >= base});
    for (std::size_t k = 0; k < items_per_object[i]; ++k) {
      ManifestItem it;
      it.id = id + "_" + std::to_string(k);
      it.object = id;
      it.features = it.id + ".ooal";
      it.mask = "m.ooal";
      m.items.push_back(it);
    }
  }
  return m;
}

// Reference draw: rejection sampling on raw mt19937_64 output.
std::size_t reference_index(std::mt19937_64& eng, std::uint64_t n) {
  const std::uint64_t rejected_tail = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = eng();
    if (x <= ~std::uint64_t{0} - rejected_tail) return x % n;
  }
}

TEST(OneShot, OnePerBaseObjectAndNovelExcluded) {
  const DatasetManifest m = in_memory_manifest(8, 3, std::vector<std::size_t>(11, 3));
  const auto train = build_oneshot_trainset(m, 5);
  ASSERT_EQ(train.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(train[i].object, "obj" + std::to_string(i));
}

TEST(OneShot, SingleItemIsForced) {
  const DatasetManifest m = in_memory_manifest(2, 0, {1, 4});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(build_oneshot_trainset(m, seed)[0].id, "obj0_0");
  }
}

TEST(OneShot, FollowsReferenceGeneratorSequence) {
  const DatasetManifest m = in_memory_manifest(4, 1, {5, 5, 3, 5, 2});
  for (std::uint64_t seed : {11ull, 2024ull}) {
    std::mt19937_64 eng(seed);
    const auto train = build_oneshot_trainset(m, seed);
    const std::uint64_t counts[4] = {5, 5, 3, 5};
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t k = reference_index(eng, counts[i]);
      EXPECT_EQ(train[i].id, "obj" + std::to_string(i) + "_" + std::to_string(k));
    }
  }
}

TEST(OneShot, BaseObjectWithoutItemsThrows) {
  DatasetManifest m = in_memory_manifest(2, 0, {2, 0});
  EXPECT_THROW(build_oneshot_trainset(m, 0), InvalidArgument);
}

TEST(Splits, SeenExcludesTrainingItemsAndUnseenIsNovel) {
  DatasetManifest m = in_memory_manifest(8, 9, std::vector<std::size_t>(17, 3));
  m.oneshot_seed = 9;
  const EvalSplits s = split_eval_sets(m);
  const auto train = build_oneshot_trainset(m, m.oneshot_seed);
  std::set<std::string> train_ids;
  for (const auto& it : train) train_ids.insert(it.id);
  for (const auto& it : s.seen) {
    EXPECT_FALSE(train_ids.count(it.id));
    EXPECT_FALSE(m.object(it.object).novel);
  }
  EXPECT_EQ(s.seen.size(), 8u * 2u);
  std::set<std::string> unseen_objects;
  for (const auto& it : s.unseen) unseen_objects.insert(it.object);
  EXPECT_EQ(unseen_objects.size(), 9u);
  EXPECT_EQ(s.unseen.size(), 27u);
}

TEST(Splits, NoNovelObjectsGivesEmptyUnseen) {
  const DatasetManifest m = in_memory_manifest(3, 0, {2, 2, 2});
  EXPECT_TRUE(split_eval_sets(m).unseen.empty());
}

TEST(Manifest, SaveLoadRoundTripWithKeypoints) {
  TempDir dir;
  DatasetManifest m = in_memory_manifest(1, 1, {1, 1});
  m.oneshot_seed = 77;
  m.items[1].mask.reset();
  m.items[1].keypoints = KeypointAnnotation{{{{1.5, 2.0}, {3.0, 4.0}}, {}}};
  m.items[1].sigma = 3.5;
  save_manifest(m, dir / "m.json");
  const DatasetManifest back = load_manifest(dir / "m.json");
  EXPECT_EQ(back.affordances, m.affordances);
  EXPECT_EQ(back.oneshot_seed, 77u);
  ASSERT_EQ(back.items.size(), 2u);
  EXPECT_EQ(back.items[0].mask->generic_string(), "m.ooal");
  ASSERT_TRUE(back.items[1].keypoints.has_value());
  EXPECT_EQ(back.items[1].keypoints->points[0].size(), 2u);
  EXPECT_EQ(back.items[1].keypoints->points[0][1].y, 4.0);
  EXPECT_EQ(back.items[1].sigma, 3.5);
  EXPECT_TRUE(back.objects[1].novel);
  EXPECT_EQ(back.resolve("a.ooal"), dir.path() / "a.ooal");
}

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

TEST(Manifest, RejectsMalformedDocuments) {
  TempDir dir;
  write(dir / "split.json",
        R"({"affordances":["a"],"objects":[{"id":"o","split":"both"}],"items":[]})");
  EXPECT_THROW(load_manifest(dir / "split.json"), InvalidArgument);
  write(dir / "noitems.json",
        R"({"affordances":["a"],"objects":[{"id":"o","split":"novel"}],"items":[]})");
  EXPECT_THROW(load_manifest(dir / "noitems.json"), InvalidArgument);
  write(dir / "noann.json", R"({"affordances":["a"],"objects":[{"id":"o","split":"base"}],
        "items":[{"id":"i","object":"o","features":"f","annotation":{}}]})");
  EXPECT_THROW(load_manifest(dir / "noann.json"), InvalidArgument);
  write(dir / "kp.json", R"({"affordances":["a"],"objects":[{"id":"o","split":"base"}],
        "items":[{"id":"i","object":"o","features":"f","annotation":{"keypoints":{"b":[[1,1]]}}}]})");
  EXPECT_THROW(load_manifest(dir / "kp.json"), InvalidArgument);
  write(dir / "fmt.json", R"({"format":"other","affordances":["a"],"objects":[],"items":[]})");
  EXPECT_THROW(load_manifest(dir / "fmt.json"), FormatError);
  write(dir / "junk.json", "{not json");
  EXPECT_THROW(load_manifest(dir / "junk.json"), InvalidArgument);
  EXPECT_THROW(load_manifest(dir / "missing.json"), IoError);
}

TEST(SynthDataset, WritesLoadableItems) {
  TempDir dir;
  SynthDatasetOptions o;
  o.world.seed = 4;
  o.world.num_base = 3;
  o.world.num_novel = 1;
  o.items_per_object = 2;
  const DatasetManifest m = write_synth_dataset(o, dir.path());
  const DatasetManifest loaded = load_manifest(dir / "manifest.json");
  EXPECT_NO_THROW(loaded.validate(true));
  EXPECT_EQ(loaded.items.size(), 8u);
  EXPECT_EQ(loaded.oneshot_seed, 4u);
  const LoadedItem item = load_item(loaded, loaded.items[0]);
  EXPECT_EQ(item.target.kind, TargetKind::kDenseBinary);
  EXPECT_EQ(item.target.num_classes(), 4u);
  EXPECT_EQ(item.target.image_size, item.features.image_size);
  double positives = 0.0;
  for (double v : item.target.values.values()) positives += v;
  EXPECT_GT(positives, 0.0);
}

TEST(SynthTarget, PositivesFollowPlantedParts) {
  SynthWorldOptions o;
  o.seed = 2;
  const SynthWorldSpec w = make_synth_world(o);
  const ObjectSpec& obj = w.objects[0];
  const AffordanceTarget t = synth_affordance_target(w, obj.id);
  // Patch centres sit on pixel (3r, 3c) for a 6x6 grid over 16x16 pixels.
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      const int part = SynthWorldSpec::part_at(obj, r, c);
      for (std::size_t n = 0; n < w.num_affordances; ++n) {
        const bool on = part >= 0 && w.parts[part].affordance == n;
        EXPECT_EQ(at(t, 3 * c, 3 * r, n), on ? 1.0 : 0.0);
      }
    }
  }
}

}  // namespace
}  // namespace ooal
