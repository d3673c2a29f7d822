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

#include "ooal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "ooal/errors.hpp"

namespace ooal {

using nlohmann::json;

namespace {

std::vector<double> normalized(std::span<const double> m, const char* what) {
  double total = 0.0;
  for (double v : m) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw InvalidArgument(std::string(what) + ": map must be finite and nonnegative");
    }
    total += v;
  }
  if (total <= 0.0) throw InvalidArgument(std::string(what) + ": all-zero map");
  std::vector<double> out(m.begin(), m.end());
  for (double& v : out) v /= total;
  return out;
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": map sizes differ");
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

double kld(std::span<const double> pred, std::span<const double> gt) {
  require_same_size(pred, gt, "kld");
  const auto p = normalized(pred, "kld");
  const auto g = normalized(gt, "kld");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total += g[i] * std::log(g[i] / (p[i] + kMetricEps) + kMetricEps);
  }
  return total;
}

double sim(std::span<const double> pred, std::span<const double> gt) {
  require_same_size(pred, gt, "sim");
  const auto p = normalized(pred, "sim");
  const auto g = normalized(gt, "sim");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::min(p[i], g[i]);
  return total;
}

double nss(std::span<const double> pred, std::span<const double> fixations) {
  require_same_size(pred, fixations, "nss");
  const double n = static_cast<double>(pred.size());
  double mean = 0.0;
  for (double v : pred) {
    if (!std::isfinite(v)) throw InvalidArgument("nss: non-finite prediction");
    mean += v;
  }
  mean /= n;
  double var = 0.0;
  for (double v : pred) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / n);

  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (fixations[i] != 0.0) {
      ++count;
      total += pred[i] - mean;
    }
  }
  if (count == 0) throw InvalidArgument("nss: empty fixation set");
  if (stddev < 1e-12) return 0.0;
  return total / stddev / static_cast<double>(count);
}

std::vector<double> fixations_from_map(std::span<const double> gt) {
  const double mx = gt.empty() ? 0.0 : *std::max_element(gt.begin(), gt.end());
  std::vector<double> f(gt.size(), 0.0);
  if (mx <= 0.0) return f;
  for (std::size_t i = 0; i < gt.size(); ++i) f[i] = gt[i] >= 0.5 * mx ? 1.0 : 0.0;
  return f;
}

std::vector<double> fixations_from_keypoints(const std::vector<Keypoint>& points,
                                             GridSize image_size) {
  std::vector<double> f(image_size.area(), 0.0);
  for (const auto& p : points) {
    const auto x = std::min<long>(std::lround(p.x), static_cast<long>(image_size.cols) - 1);
    const auto y = std::min<long>(std::lround(p.y), static_cast<long>(image_size.rows) - 1);
    if (x < 0 || y < 0) throw InvalidArgument("fixations_from_keypoints: negative coordinate");
    f[static_cast<std::size_t>(y) * image_size.cols + static_cast<std::size_t>(x)] = 1.0;
  }
  return f;
}

std::vector<double> channel(const Matrix& m, std::size_t n) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, n);
  return out;
}

void IouAccumulator::add(const Matrix& scores, const AffordanceTarget& gt, double threshold) {
  if (gt.kind != TargetKind::kDenseBinary) {
    throw InvalidArgument("IoU needs dense-binary ground truth");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("IoU threshold outside (0,1)");
  if (!scores.same_shape(gt.values) || scores.cols() != intersection_.size()) {
    throw ShapeError("IoU: scores " + scores.shape_string() + " vs target " +
                     gt.values.shape_string());
  }
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t n = 0; n < scores.cols(); ++n) {
      const bool p = scores(i, n) > threshold;
      const bool g = gt.values(i, n) == 1.0;
      intersection_[n] += (p && g) ? 1 : 0;
      union_[n] += (p || g) ? 1 : 0;
    }
  }
}

std::vector<std::optional<double>> IouAccumulator::per_class() const {
  std::vector<std::optional<double>> out(union_.size());
  for (std::size_t n = 0; n < union_.size(); ++n) {
    if (union_[n] > 0) {
      out[n] = static_cast<double>(intersection_[n]) / static_cast<double>(union_[n]);
    }
  }
  return out;
}

std::optional<double> IouAccumulator::mean() const { return miou(per_class()); }

std::vector<std::optional<double>> iou_per_class(const Matrix& scores, const AffordanceTarget& gt,
                                                 double threshold) {
  IouAccumulator acc(scores.cols());
  acc.add(scores, gt, threshold);
  return acc.per_class();
}

std::optional<double> miou(const std::vector<std::optional<double>>& per_class) {
  std::vector<double> present;
  for (const auto& v : per_class) {
    if (v) present.push_back(*v);
  }
  return mean_of(present);
}

double hiou(double seen, double unseen) {
  if (seen < 0.0 || unseen < 0.0) throw InvalidArgument("hiou: negative mIoU");
  if (seen + unseen == 0.0) return 0.0;
  return 2.0 * seen * unseen / (seen + unseen);
}

// ---------------------------------------------------------------------------

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "heatmap") return EvalMode::kHeatmap;
  if (s == "dense") return EvalMode::kDense;
  throw InvalidArgument("unknown eval mode '" + s + "' (heatmap|dense)");
}

MetricsReport evaluate_scores(const std::vector<LoadedItem>& items,
                              const std::vector<Matrix>& scores,
                              const std::vector<std::string>& classes, EvalMode mode,
                              double threshold) {
  if (items.size() != scores.size()) throw ShapeError("evaluate: items vs predictions");
  MetricsReport r;
  r.mode = mode;
  r.num_items = items.size();
  r.classes = classes;
  if (mode == EvalMode::kHeatmap) {
    std::vector<double> klds, sims, nsss;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const LoadedItem& item = items[i];
      if (!scores[i].same_shape(item.target.values)) {
        throw ShapeError("evaluate: prediction shape for " + item.id);
      }
      for (std::size_t n = 0; n < classes.size(); ++n) {
        const std::vector<double> gt = channel(item.target.values, n);
        if (*std::max_element(gt.begin(), gt.end()) <= 0.0) continue;
        const std::vector<double> pred = channel(scores[i], n);
        std::vector<double> fix;
        if (item.keypoints && !item.keypoints->points[n].empty()) {
          fix = fixations_from_keypoints(item.keypoints->points[n], item.target.image_size);
        } else {
          fix = fixations_from_map(gt);
        }
        HeatmapRecord rec{item.id, classes[n], kld(pred, gt), sim(pred, gt), nss(pred, fix)};
        klds.push_back(rec.kld);
        sims.push_back(rec.sim);
        nsss.push_back(rec.nss);
        r.heatmap.push_back(std::move(rec));
      }
    }
    r.mean_kld = mean_of(klds);
    r.mean_sim = mean_of(sims);
    r.mean_nss = mean_of(nsss);
  } else {
    IouAccumulator total(classes.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      total.add(scores[i], items[i].target, threshold);
      r.dense.push_back({items[i].id, iou_per_class(scores[i], items[i].target, threshold)});
    }
    r.class_iou = total.per_class();
    r.miou = total.mean();
  }
  return r;
}

MetricsReport evaluate(const Model& model, const std::vector<LoadedItem>& items, EvalMode mode,
                       double threshold, std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, items.size()));
  std::vector<Matrix> scores(items.size());
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t worker) {
    try {
      for (std::size_t i = worker; i < items.size(); i += threads) {
        scores[i] = forward(model, items[i].features).scores;
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return evaluate_scores(items, scores, model.text.tokens.names, mode, threshold);
}

std::size_t eval_threads_from_env() {
  if (const char* v = std::getenv("OOAL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    throw InvalidArgument("OOAL_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json report_to_json(const MetricsReport& r) {
  json j;
  j["mode"] = r.mode == EvalMode::kHeatmap ? "heatmap" : "dense";
  j["num_items"] = r.num_items;
  j["classes"] = r.classes;
  if (r.mode == EvalMode::kHeatmap) {
    j["aggregate"] = {{"kld", opt(r.mean_kld)}, {"sim", opt(r.mean_sim)}, {"nss", opt(r.mean_nss)}};
    j["records"] = json::array();
    for (const auto& rec : r.heatmap) {
      j["records"].push_back({{"id", rec.id},
                              {"affordance", rec.affordance},
                              {"kld", rec.kld},
                              {"sim", rec.sim},
                              {"nss", rec.nss}});
    }
  } else {
    json per_class = json::object();
    for (std::size_t n = 0; n < r.class_iou.size(); ++n) per_class[r.classes[n]] = opt(r.class_iou[n]);
    j["aggregate"] = {{"miou", opt(r.miou)}, {"class_iou", per_class}};
    j["records"] = json::array();
    for (const auto& rec : r.dense) {
      json ious = json::array();
      for (const auto& v : rec.iou) ious.push_back(opt(v));
      j["records"].push_back({{"id", rec.id}, {"iou", ious}});
    }
  }
  return j;
}

json split_report_to_json(const SplitReport& r) {
  json j;
  j["seen"] = report_to_json(r.seen);
  j["unseen"] = report_to_json(r.unseen);
  if (r.seen.mode == EvalMode::kDense) j["hiou"] = opt(r.hiou);
  return j;
}

SplitReport make_split_report(MetricsReport seen, MetricsReport unseen) {
  SplitReport r{std::move(seen), std::move(unseen), std::nullopt};
  if (r.seen.mode == EvalMode::kDense && r.seen.miou && r.unseen.miou) {
    r.hiou = hiou(*r.seen.miou, *r.unseen.miou);
  }
  return r;
}

std::string format_table(const SplitReport& r) {
  auto cell = [](const std::optional<double>& v, double scale) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof(buf), "%10.3f", *v * scale);
    } else {
      std::snprintf(buf, sizeof(buf), "%10s", "-");
    }
    return std::string(buf);
  };
  std::ostringstream os;
  char line[128];
  if (r.seen.mode == EvalMode::kHeatmap) {
    os << "split         KLD↓      SIM↑      NSS↑\n";
    for (const auto* rep : {&r.seen, &r.unseen}) {
      os << (rep == &r.seen ? "seen    " : "unseen  ") << cell(rep->mean_kld, 1.0)
         << cell(rep->mean_sim, 1.0) << cell(rep->mean_nss, 1.0) << "\n";
    }
  } else {
    std::snprintf(line, sizeof(line), "%10s%10s%10s\n", "Seen", "Unseen", "hIoU");
    os << line << cell(r.seen.miou, 100.0) << cell(r.unseen.miou, 100.0)
       << cell(r.hiou, 100.0) << "\n";
  }
  return os.str();
}

}  // namespace ooal
