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
#include <cstdlib>

#include <gtest/gtest.h>

#include "ooal/errors.hpp"
#include "ooal/metrics.hpp"
#include "synth_fixture.hpp"
#include "test_util.hpp"

namespace ooal {
namespace {

using V = std::vector<double>;

TEST(Kld, HandComputedAndAsymmetric) {
  EXPECT_NEAR(kld(V{0.9, 0.1}, V{0.5, 0.5}), 0.5108, 1e-3);
  EXPECT_NEAR(kld(V{0.5, 0.5}, V{0.9, 0.1}), 0.3681, 1e-3);
  EXPECT_NEAR(kld(V{0.9, 0.1}, V{0.5, 0.5}),
              0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-9);
}

TEST(Kld, IdentityScaleInvarianceAndErrors) {
  const V p{0.2, 0.0, 3.0, 1.5};
  EXPECT_LE(std::abs(kld(p, p)), 1e-9);
  EXPECT_GE(kld(p, V{1, 1, 1, 1}), -1e-9);
  EXPECT_NEAR(kld(V{0.4, 0.0, 6.0, 3.0}, V{1, 2, 3, 4}), kld(p, V{10, 20, 30, 40}), 1e-12);
  EXPECT_THROW(kld(V{0, 0}, V{1, 1}), InvalidArgument);
  EXPECT_THROW(kld(V{1, 1}, V{0, 0}), InvalidArgument);
  EXPECT_THROW(kld(V{1, -1}, V{1, 1}), InvalidArgument);
  EXPECT_THROW(kld(V{1, 1, 1}, V{1, 1}), ShapeError);
}

TEST(Sim, HandComputedIdentityDisjointSymmetric) {
  EXPECT_NEAR(sim(V{0.7, 0.3}, V{0.5, 0.5}), 0.8, 1e-12);
  EXPECT_NEAR(sim(V{0.5, 0.5}, V{0.7, 0.3}), 0.8, 1e-12);
  EXPECT_NEAR(sim(V{3, 1, 2}, V{3, 1, 2}), 1.0, 1e-12);
  EXPECT_EQ(sim(V{1, 0, 0}, V{0, 2, 5}), 0.0);
  EXPECT_NEAR(sim(V{7, 3}, V{1, 1}), 0.8, 1e-12);
  const V a{0.1, 0.4, 0.2, 0.9}, b{0.3, 0.3, 0.0, 0.5};
  EXPECT_EQ(sim(a, b), sim(b, a));
  const double s = sim(a, b);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
}

TEST(Nss, HandComputedSingleFixation) {
  const V fix{1, 0, 0, 0};
  EXPECT_NEAR(nss(fix, fix), 1.7321, 1e-3);
  EXPECT_NEAR(nss(fix, fix), 0.75 / std::sqrt(0.1875), 1e-12);
}

TEST(Nss, ConstantShiftAndAffineInvariance) {
  EXPECT_EQ(nss(V{2, 2, 2, 2}, V{0, 1, 0, 0}), 0.0);
  const V pred{0.1, 0.7, 0.3, 0.9, 0.2}, fix{0, 1, 0, 1, 0};
  const double base = nss(pred, fix);
  V shifted = pred, scaled = pred;
  for (double& v : shifted) v += 5.0;
  for (double& v : scaled) v = 3.0 * v - 1.0;
  EXPECT_NEAR(nss(shifted, fix), base, 1e-12);
  EXPECT_NEAR(nss(scaled, fix), base, 1e-12);
  EXPECT_THROW(nss(pred, V{0, 0, 0, 0, 0}), InvalidArgument);
}

TEST(Fixations, FromMapAndKeypoints) {
  EXPECT_EQ(fixations_from_map(V{0.1, 0.5, 1.0, 0.49}), (V{0, 1, 1, 0}));
  const V fk = fixations_from_keypoints({{1.4, 0.6}, {0.0, 0.0}}, {2, 3});
  EXPECT_EQ(fk, (V{1, 0, 0, 0, 1, 0}));
}

AffordanceTarget binary_target(std::vector<double> v, GridSize size) {
  AffordanceTarget t;
  t.image_size = size;
  const std::size_t n = v.size() / size.area();
  t.values = Matrix(size.area(), n, std::move(v));
  return t;
}

TEST(Iou, CountingCases) {
  const AffordanceTarget gt = binary_target({1, 1, 0, 0}, {2, 2});
  const auto three = iou_per_class(Matrix(4, 1, std::vector<double>{0.9, 0.8, 0.7, 0.1}), gt);
  EXPECT_NEAR(*three[0], 2.0 / 3.0, 1e-15);
  const auto perfect = iou_per_class(gt.values, gt);
  EXPECT_EQ(*perfect[0], 1.0);
  EXPECT_EQ(*miou(perfect), 1.0);
  const auto disjoint = iou_per_class(Matrix(4, 1, std::vector<double>{0, 0, 1, 1}), gt);
  EXPECT_EQ(*disjoint[0], 0.0);
}

TEST(Iou, GlobalCountsAndEmptyClassExcluded) {
  IouAccumulator acc(2);
  // Image 1: class 0 IoU 1/1. Image 2: class 0 pred 3 cells, gt 1 cell → 1/3.
  acc.add(Matrix(4, 2, std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0}),
          binary_target({1, 0, 0, 0, 0, 0, 0, 0}, {2, 2}), 0.5);
  acc.add(Matrix(4, 2, std::vector<double>{1, 0, 1, 0, 1, 0, 0, 0}),
          binary_target({1, 0, 0, 0, 0, 0, 0, 0}, {2, 2}), 0.5);
  const auto pc = acc.per_class();
  EXPECT_NEAR(*pc[0], 2.0 / 4.0, 1e-15);  // not the per-image mean 2/3
  EXPECT_FALSE(pc[1].has_value());
  EXPECT_NEAR(*acc.mean(), 0.5, 1e-15);
  EXPECT_FALSE(miou({std::nullopt, std::nullopt}).has_value());
}

TEST(Iou, ThresholdMarginAndClassOrder) {
  const Matrix s(4, 2, std::vector<double>{0.9, 0.1, 0.2, 0.8, 0.85, 0.3, 0.1, 0.95});
  const AffordanceTarget gt = binary_target({1, 0, 1, 1, 0, 0, 0, 1}, {2, 2});
  const auto a = iou_per_class(s, gt, 0.5);
  EXPECT_EQ(a, iou_per_class(s, gt, 0.45));
  EXPECT_EQ(a, iou_per_class(s, gt, 0.55));
  Matrix swapped(4, 2);
  AffordanceTarget gs = gt;
  for (std::size_t i = 0; i < 4; ++i) {
    swapped(i, 0) = s(i, 1);
    swapped(i, 1) = s(i, 0);
    gs.values(i, 0) = gt.values(i, 1);
    gs.values(i, 1) = gt.values(i, 0);
  }
  EXPECT_EQ(*miou(iou_per_class(swapped, gs)), *miou(a));
}

TEST(Iou, RequiresBinaryTargetsAndValidThreshold) {
  AffordanceTarget soft = binary_target({1, 0.5, 0, 0}, {2, 2});
  soft.kind = TargetKind::kDensifiedSparse;
  EXPECT_THROW(iou_per_class(Matrix(4, 1), soft), InvalidArgument);
  EXPECT_THROW(iou_per_class(Matrix(4, 1), binary_target({1, 0, 0, 0}, {2, 2}), 1.0),
               InvalidArgument);
}

TEST(Hiou, TableArithmetic) {
  EXPECT_NEAR(hiou(72.0, 60.8), 65.9, 0.15);
  EXPECT_NEAR(hiou(72.0, 60.8), 66.0, 0.15);
  EXPECT_NEAR(hiou(74.6, 59.7), 66.3, 0.15);
  EXPECT_NEAR(hiou(74.6, 59.7), 66.4, 0.15);
  EXPECT_DOUBLE_EQ(hiou(0.37, 0.37), 0.37);
  EXPECT_EQ(hiou(0.0, 0.0), 0.0);
  EXPECT_THROW(hiou(-0.1, 0.5), InvalidArgument);
}

TEST(Hiou, BoundedByMinAndArithmeticMean) {
  for (double s : {0.1, 0.4, 0.9}) {
    for (double u : {0.05, 0.4, 0.7}) {
      const double h = hiou(s, u);
      EXPECT_GE(h, std::min(s, u) - 1e-15);
      EXPECT_LE(h, (s + u) / 2.0 + 1e-15);
      if (s != u) EXPECT_LT(h, (s + u) / 2.0);
    }
  }
}

std::vector<LoadedItem> eval_items() {
  SynthWorldOptions o;
  o.seed = 12;
  o.num_base = 3;
  o.num_novel = 2;
  return testing::synth_items(make_synth_world(o), true, 2, 0.05);
}

Model eval_model() {
  ModelConfig cfg;
  cfg.p = 2;
  cfg.embed_dim = 16;
  cfg.token_dim = 16;
  cfg.num_classes = 4;
  return init_model(cfg, testing::synth_affordances(), 5);
}

TEST(Evaluate, EmptySetHasUndefinedAggregates) {
  for (EvalMode mode : {EvalMode::kHeatmap, EvalMode::kDense}) {
    const MetricsReport r = evaluate(eval_model(), {}, mode);
    EXPECT_EQ(r.num_items, 0u);
    EXPECT_FALSE(r.mean_kld || r.mean_sim || r.mean_nss || r.miou);
    const auto j = report_to_json(r);
    EXPECT_TRUE(j["aggregate"][mode == EvalMode::kDense ? "miou" : "kld"].is_null());
  }
}

TEST(Evaluate, InjectedPerfectPrediction) {
  const auto items = eval_items();
  const std::vector<LoadedItem> one{items[0]};
  const MetricsReport h =
      evaluate_scores(one, {one[0].target.values}, testing::synth_affordances(), EvalMode::kHeatmap);
  ASSERT_TRUE(h.mean_kld);
  EXPECT_LE(std::abs(*h.mean_kld), 1e-9);
  EXPECT_NEAR(*h.mean_sim, 1.0, 1e-12);
  EXPECT_GT(*h.mean_nss, 0.0);
  const MetricsReport d =
      evaluate_scores(one, {one[0].target.values}, testing::synth_affordances(), EvalMode::kDense);
  EXPECT_EQ(*d.miou, 1.0);
}

TEST(Evaluate, HeatmapTotalsMatchPerItemRecomputation) {
  const auto items = eval_items();
  const Model model = eval_model();
  const MetricsReport r = evaluate(model, items, EvalMode::kHeatmap, 0.5, 3);
  double k = 0, s = 0, n = 0;
  std::size_t count = 0;
  for (const auto& it : items) {
    const Matrix scores = forward(model, it.features).scores;
    for (std::size_t c = 0; c < 4; ++c) {
      const V gt = channel(it.target.values, c);
      double mx = 0.0;
      for (double v : gt) mx = std::max(mx, v);
      if (mx == 0.0) continue;
      const V pred = channel(scores, c);
      k += kld(pred, gt);
      s += sim(pred, gt);
      n += nss(pred, fixations_from_map(gt));
      ++count;
    }
  }
  ASSERT_EQ(r.heatmap.size(), count);
  EXPECT_NEAR(*r.mean_kld, k / count, 1e-12);
  EXPECT_NEAR(*r.mean_sim, s / count, 1e-12);
  EXPECT_NEAR(*r.mean_nss, n / count, 1e-12);
}

TEST(Evaluate, DenseTotalsMatchIndependentCounting) {
  const auto items = eval_items();
  const Model model = eval_model();
  const MetricsReport r = evaluate(model, items, EvalMode::kDense, 0.5, 2);
  std::vector<double> inter(4, 0), uni(4, 0);
  for (const auto& it : items) {
    const Matrix scores = forward(model, it.features).scores;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        const bool p = scores(i, c) > 0.5, g = it.target.values(i, c) == 1.0;
        inter[c] += p && g;
        uni[c] += p || g;
      }
    }
  }
  double sum = 0;
  int defined = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    if (uni[c] == 0) {
      EXPECT_FALSE(r.class_iou[c].has_value());
      continue;
    }
    EXPECT_NEAR(*r.class_iou[c], inter[c] / uni[c], 1e-15);
    sum += inter[c] / uni[c];
    ++defined;
  }
  EXPECT_NEAR(*r.miou, sum / defined, 1e-15);
}

TEST(Evaluate, IndependentOfThreadCount) {
  const auto items = eval_items();
  const Model model = eval_model();
  for (EvalMode mode : {EvalMode::kHeatmap, EvalMode::kDense}) {
    const auto a = report_to_json(evaluate(model, items, mode, 0.5, 1)).dump();
    EXPECT_EQ(a, report_to_json(evaluate(model, items, mode, 0.5, 4)).dump());
    EXPECT_EQ(a, report_to_json(evaluate(model, items, mode, 0.5, 0)).dump());
  }
}

TEST(Evaluate, ThreadCapFromEnvironment) {
  ::setenv("OOAL_THREADS", "3", 1);
  EXPECT_EQ(eval_threads_from_env(), 3u);
  ::setenv("OOAL_THREADS", "zero", 1);
  EXPECT_THROW(eval_threads_from_env(), InvalidArgument);
  ::unsetenv("OOAL_THREADS");
  EXPECT_GE(eval_threads_from_env(), 1u);
}

TEST(Report, SplitJsonAndTable) {
  MetricsReport seen, unseen;
  seen.mode = unseen.mode = EvalMode::kDense;
  seen.miou = 0.746;
  unseen.miou = 0.597;
  const SplitReport r = make_split_report(seen, unseen);
  ASSERT_TRUE(r.hiou);
  EXPECT_NEAR(*r.hiou * 100.0, 66.3, 0.15);
  const auto j = split_report_to_json(r);
  EXPECT_TRUE(j.contains("seen"));
  EXPECT_TRUE(j.contains("unseen"));
  EXPECT_NEAR(j["hiou"].get<double>(), *r.hiou, 1e-15);
  const std::string table = format_table(r);
  EXPECT_NE(table.find("Seen"), std::string::npos);
  EXPECT_NE(table.find("74.600"), std::string::npos);
  EXPECT_NE(table.find("59.700"), std::string::npos);

  MetricsReport hs, hu;
  hs.mean_kld = 0.74;
  hs.mean_sim = 0.577;
  hs.mean_nss = 1.745;
  const std::string ht = format_table(make_split_report(hs, hu));
  EXPECT_NE(ht.find("KLD"), std::string::npos);
  EXPECT_NE(ht.find("0.740"), std::string::npos);
  EXPECT_NE(ht.find("-"), std::string::npos);
  EXPECT_THROW(parse_eval_mode("both"), InvalidArgument);
}

}  // namespace
}  // namespace ooal
