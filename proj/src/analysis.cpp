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

#include "ooal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ooal/container.hpp"
#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace {

constexpr double kPcaTolerance = 1e-10;
constexpr std::size_t kPcaMaxIterations = 10000;

// Cyclic Jacobi eigen-decomposition of a small symmetric matrix. Returns
// eigenvalues and writes eigenvectors into the columns of `vectors`.
std::vector<double> jacobi_eigen(Matrix a, Matrix& vectors) {
  const std::size_t n = a.rows();
  vectors = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors(k, p);
          const double vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return values;
}

// Modified Gram-Schmidt on the columns of q, twice for stability. A column
// that collapses is replaced with a fresh random direction.
void orthonormalize_columns(Matrix& q, Rng& rng) {
  const std::size_t d = q.rows();
  for (std::size_t c = 0; c < q.cols(); ++c) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double before = [&] {
        double s = 0.0;
        for (std::size_t r = 0; r < d; ++r) s += q(r, c) * q(r, c);
        return std::sqrt(s);
      }();
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t prev = 0; prev < c; ++prev) {
          double proj = 0.0;
          for (std::size_t r = 0; r < d; ++r) proj += q(r, prev) * q(r, c);
          for (std::size_t r = 0; r < d; ++r) q(r, c) -= proj * q(r, prev);
        }
      }
      double len = 0.0;
      for (std::size_t r = 0; r < d; ++r) len += q(r, c) * q(r, c);
      len = std::sqrt(len);
      if (len > 1e-8 * std::max(before, 1e-300) && len > 1e-280) {
        for (std::size_t r = 0; r < d; ++r) q(r, c) /= len;
        break;
      }
      for (std::size_t r = 0; r < d; ++r) q(r, c) = rng.normal();
      if (attempt == 7) throw NumericError("pca: cannot build an orthonormal basis");
    }
  }
}

}  // namespace

Matrix concat_rows(const std::vector<Matrix>& parts) {
  if (parts.empty()) return {};
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts.front().cols()) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * parts.front().cols());
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Matrix(rows, parts.front().cols(), std::move(data));
}

PcaResult pca_project(const Matrix& features, std::size_t k) {
  const std::size_t L = features.rows();
  const std::size_t C = features.cols();
  if (k == 0) throw InvalidArgument("pca: k must be at least 1");
  if (k >= L) throw InvalidArgument("pca: k=" + std::to_string(k) + " needs more than k rows");
  if (k > C) throw InvalidArgument("pca: k exceeds the feature dimension");
  if (!all_finite(features)) throw NumericError("pca: non-finite features");

  PcaResult res;
  Matrix centered = features;
  res.mean.assign(C, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t c = 0; c < C; ++c) res.mean[c] += features(i, c);
  }
  for (double& m : res.mean) m /= static_cast<double>(L);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t c = 0; c < C; ++c) centered(i, c) -= res.mean[c];
  }
  Matrix cov = matmul_tn(centered, centered) * (1.0 / static_cast<double>(L - 1));
  double total_variance = 0.0;
  for (std::size_t c = 0; c < C; ++c) total_variance += cov(c, c);

  Rng rng(0x9ca);
  Matrix q(C, k);
  for (double& v : q.values()) v = rng.normal();
  orthonormalize_columns(q, rng);

  std::vector<double> lambda(k, 0.0);
  bool converged = false;
  for (std::size_t it = 1; it <= kPcaMaxIterations && !converged; ++it) {
    q = matmul(cov, q);
    orthonormalize_columns(q, rng);
    // Rayleigh-Ritz rotation inside the current subspace.
    Matrix ritz_vectors;
    const std::vector<double> ritz = jacobi_eigen(matmul_tn(q, matmul(cov, q)), ritz_vectors);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ritz[a] > ritz[b]; });
    Matrix sorted(k, k);
    for (std::size_t c = 0; c < k; ++c) {
      lambda[c] = ritz[order[c]];
      for (std::size_t r = 0; r < k; ++r) sorted(r, c) = ritz_vectors(r, order[c]);
    }
    q = matmul(q, sorted);

    const Matrix cq = matmul(cov, q);
    const double scale = std::max(lambda[0], 1e-300);
    converged = true;
    for (std::size_t c = 0; c < k && converged; ++c) {
      double res2 = 0.0;
      for (std::size_t r = 0; r < C; ++r) {
        const double d = cq(r, c) - lambda[c] * q(r, c);
        res2 += d * d;
      }
      converged = std::sqrt(res2) <= kPcaTolerance * scale;
    }
    res.iterations = it;
  }
  if (!converged) throw NumericError("pca: power iteration did not converge in 10000 sweeps");

  res.components = Matrix(k, C);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < C; ++r) {
      if (std::abs(q(r, c)) > std::abs(q(arg, c))) arg = r;
    }
    const double sign = q(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < C; ++r) res.components(c, r) = sign * q(r, c);
  }
  res.scores = matmul_nt(centered, res.components);
  for (std::size_t c = 0; c < k; ++c) {
    const double v = std::max(lambda[c], 0.0);
    res.explained_variance.push_back(v);
    res.explained_ratio.push_back(total_variance > 0.0 ? v / total_variance : 0.0);
  }
  return res;
}

SimilarityMap similarity_map(std::span<const double> query, const FeatureStack& target,
                             int layer) {
  target.validate();
  const int n = static_cast<int>(target.num_layers());
  const int idx = layer < 0 ? n + layer : layer;
  if (idx < 0 || idx >= n) throw InvalidArgument("similarity_map: layer out of range");
  if (query.size() != target.dim()) throw ShapeError("similarity_map: query dimension");
  const Matrix& feats = target.layers[static_cast<std::size_t>(idx)];

  SimilarityMap out{Matrix(target.grid.rows, target.grid.cols), 0};
  const double qn = norm(query);
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    const double pn = norm(feats.row(i));
    if (qn == 0.0 || pn == 0.0) {
      ++out.zero_norm;
      continue;
    }
    out.map[i] = std::clamp(dot(query, feats.row(i)) / (qn * pn), -1.0, 1.0);
  }
  return out;
}

Colormap parse_colormap(const std::string& name) {
  if (name == "heat") return Colormap::kHeat;
  if (name == "coolwarm") return Colormap::kCoolWarm;
  throw InvalidArgument("unknown colormap '" + name + "' (heat|coolwarm)");
}

std::array<unsigned char, 3> colormap_rgb(double t, Colormap cmap) {
  using Rgb = std::array<double, 3>;
  static constexpr Rgb kHeat[3] = {{0, 0, 0}, {255, 0, 0}, {255, 255, 0}};
  static constexpr Rgb kCoolWarm[3] = {{0, 0, 255}, {255, 255, 255}, {255, 0, 0}};
  const Rgb* anchors = cmap == Colormap::kHeat ? kHeat : kCoolWarm;
  t = std::clamp(t, 0.0, 1.0);
  const std::size_t seg = t < 0.5 ? 0 : 1;
  const double s = seg == 0 ? t / 0.5 : (t - 0.5) / 0.5;
  std::array<unsigned char, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double a = anchors[seg][c];
    const double b = anchors[seg + 1][c];
    out[c] = static_cast<unsigned char>(std::lround(a + (b - a) * s));
  }
  return out;
}

std::vector<unsigned char> encode_heatmap(const Matrix& map, Colormap cmap, std::size_t scale) {
  if (map.empty()) throw InvalidArgument("render_heatmap: empty map");
  if (!all_finite(map)) throw NumericError("render_heatmap: non-finite value");
  if (scale == 0) throw InvalidArgument("render_heatmap: scale must be at least 1");
  const auto [lo_it, hi_it] = std::minmax_element(map.values().begin(), map.values().end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;

  const std::size_t w = map.cols() * scale;
  const std::size_t h = map.rows() * scale;
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + w * h * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = map(y / scale, x / scale);
      const double t = range > 0.0 ? (v - lo) / range : 0.0;
      const auto rgb = colormap_rgb(t, cmap);
      out.insert(out.end(), rgb.begin(), rgb.end());
    }
  }
  return out;
}

void render_heatmap(const Matrix& map, const std::filesystem::path& path, Colormap cmap,
                    std::size_t scale) {
  write_file_bytes(path, encode_heatmap(map, cmap, scale));
}

}  // namespace ooal
