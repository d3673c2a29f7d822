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

#ifndef OOAL_METRICS_HPP_
#define OOAL_METRICS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ooal/data.hpp"
#include "ooal/decoder.hpp"
#include "ooal/matrix.hpp"
#include "ooal/model.hpp"

namespace ooal {

inline constexpr double kMetricEps = 1e-12;

// Saliency-benchmark heatmap metrics. Maps are flattened H·W vectors; both
// arguments are normalized to sum 1 first, so scale does not matter.

// Σ g·ln(g/(p+ε) + ε). Asymmetric.
double kld(std::span<const double> pred, std::span<const double> gt);
// Σ min(p, g), in [0, 1].
double sim(std::span<const double> pred, std::span<const double> gt);
// Mean of the standardized prediction over fixation pixels (fixations != 0).
// Returns 0 for a constant prediction (std < 1e-12).
double nss(std::span<const double> pred, std::span<const double> fixations);

// gt ≥ 0.5·max(gt) → 1.
std::vector<double> fixations_from_map(std::span<const double> gt);
// Keypoints rounded to the nearest pixel.
std::vector<double> fixations_from_keypoints(const std::vector<Keypoint>& points,
                                             GridSize image_size);

// Column n of an (H·W)×N matrix.
std::vector<double> channel(const Matrix& m, std::size_t n);

// Global confusion counts per class, accumulated over a whole split.
class IouAccumulator {
 public:
  explicit IouAccumulator(std::size_t num_classes)
      : intersection_(num_classes, 0), union_(num_classes, 0) {}

  // scores: (H·W)×N in [0,1], binarized at `threshold` (> threshold is
  // positive). gt must be dense-binary.
  void add(const Matrix& scores, const AffordanceTarget& gt, double threshold);

  // nullopt for classes whose union is empty over everything added.
  std::vector<std::optional<double>> per_class() const;
  std::optional<double> mean() const;

 private:
  std::vector<std::size_t> intersection_;
  std::vector<std::size_t> union_;
};

std::vector<std::optional<double>> iou_per_class(const Matrix& scores, const AffordanceTarget& gt,
                                                 double threshold = 0.5);
std::optional<double> miou(const std::vector<std::optional<double>>& per_class);

// 2su/(s+u), 0 when both are 0.
double hiou(double seen, double unseen);

// ---------------------------------------------------------------------------

enum class EvalMode { kHeatmap, kDense };
EvalMode parse_eval_mode(const std::string& s);

struct HeatmapRecord {
  std::string id;
  std::string affordance;
  double kld = 0.0;
  double sim = 0.0;
  double nss = 0.0;
};

struct DenseRecord {
  std::string id;
  std::vector<std::optional<double>> iou;
};

struct MetricsReport {
  EvalMode mode = EvalMode::kHeatmap;
  std::size_t num_items = 0;
  std::vector<std::string> classes;
  std::vector<HeatmapRecord> heatmap;
  std::vector<DenseRecord> dense;
  // Aggregates; nullopt when there is nothing to average.
  std::optional<double> mean_kld;
  std::optional<double> mean_sim;
  std::optional<double> mean_nss;
  std::vector<std::optional<double>> class_iou;
  std::optional<double> miou;
};

// Scores metrics for precomputed predictions. scores[i] is the (H·W)×N
// sigmoid map for items[i]. Heatmap mode yields one record per
// (item, affordance) with a non-empty ground-truth channel and averages
// them; dense mode accumulates global IoU counts.
MetricsReport evaluate_scores(const std::vector<LoadedItem>& items,
                              const std::vector<Matrix>& scores,
                              const std::vector<std::string>& classes, EvalMode mode,
                              double threshold = 0.5);

// Runs the model on every item (up to `threads` workers, 0 = hardware
// concurrency) and scores the predictions. Output is independent of the
// thread count.
MetricsReport evaluate(const Model& model, const std::vector<LoadedItem>& items, EvalMode mode,
                       double threshold = 0.5, std::size_t threads = 1);

// Thread cap from OOAL_THREADS, default hardware concurrency.
std::size_t eval_threads_from_env();

struct SplitReport {
  MetricsReport seen;
  MetricsReport unseen;
  std::optional<double> hiou;  // dense mode, both mIoUs defined
};

SplitReport make_split_report(MetricsReport seen, MetricsReport unseen);

nlohmann::json report_to_json(const MetricsReport& r);
nlohmann::json split_report_to_json(const SplitReport& r);
// Aligned text table: KLD SIM NSS per split, or Seen Unseen hIoU.
std::string format_table(const SplitReport& r);

}  // namespace ooal

#endif  // OOAL_METRICS_HPP_
