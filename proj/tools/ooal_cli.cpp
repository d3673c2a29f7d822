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

// Command-line entry point: synthetic data generation, densification,
// training, evaluation, feature analysis and gradient checking.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ooal/analysis.hpp"
#include "ooal/data.hpp"
#include "ooal/errors.hpp"
#include "ooal/features.hpp"
#include "ooal/metrics.hpp"
#include "ooal/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ooal::IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ooal::InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ooal::IoError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenSynthArgs {
  std::uint64_t seed = 0;
  std::size_t objects = 10;
  std::size_t novel = 2;
  std::size_t items = 3;
  std::size_t parts = 4;
  std::size_t grid = 6;
  std::size_t image = 16;
  std::size_t layers = 4;
  std::size_t dim = 32;
  double noise = 0.05;
  std::string affordances = "grasp,cut,contain,pound";
  std::string out;
};

int run_gen_synth(const GenSynthArgs& a) {
  if (a.novel >= a.objects) throw ooal::InvalidArgument("--novel must be smaller than --objects");
  ooal::SynthDatasetOptions o;
  o.world.seed = a.seed;
  o.world.num_parts = a.parts;
  o.world.num_base = a.objects - a.novel;
  o.world.num_novel = a.novel;
  o.world.num_layers = a.layers;
  o.world.dim = a.dim;
  o.world.grid = {a.grid, a.grid};
  o.world.image_size = {a.image, a.image};
  o.affordances = split_csv(a.affordances);
  o.world.num_affordances = o.affordances.size();
  o.items_per_object = a.items;
  o.noise_scale = a.noise;
  const auto m = ooal::write_synth_dataset(o, a.out);
  std::cout << "wrote " << m.items.size() << " items for " << m.objects.size() << " objects to "
            << (fs::path(a.out) / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run_densify(const std::string& in, double sigma, const std::string& out) {
  const json j = read_json(in);
  static const std::set<std::string> kKeys{"height", "width", "affordances", "keypoints"};
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw ooal::InvalidArgument(in + ": unknown key '" + k + "'");
  }
  try {
    const ooal::GridSize size{j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>()};
    const auto names = j.at("affordances").get<std::vector<std::string>>();
    ooal::KeypointAnnotation kp;
    kp.points.resize(names.size());
    for (const auto& [name, pts] : j.at("keypoints").items()) {
      auto pos = std::find(names.begin(), names.end(), name);
      if (pos == names.end()) throw ooal::InvalidArgument(in + ": unknown affordance " + name);
      for (const auto& p : pts) {
        kp.points[pos - names.begin()].push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
    }
    ooal::save_target(ooal::densify(kp, sigma, size), out);
  } catch (const json::exception& e) {
    throw ooal::InvalidArgument(in + ": " + e.what());
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainJob {
  ooal::TrainConfig cfg;
  fs::path manifest;
  std::optional<fs::path> text_embeddings;
};

TrainJob parse_train_config(const fs::path& path) {
  const json j = read_json(path);
  static const std::set<std::string> kKeys{"lr", "iterations", "seed", "p", "j", "t", "C",
                                           "C_t", "log_every", "manifest", "text_embeddings"};
  if (!j.is_object()) throw ooal::InvalidArgument(path.string() + ": config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw ooal::InvalidArgument(path.string() + ": unknown key '" + k + "'");
  }
  TrainJob job;
  try {
    ooal::TrainConfig& c = job.cfg;
    c.lr = j.value("lr", c.lr);
    c.iterations = j.value("iterations", c.iterations);
    c.seed = j.value("seed", c.seed);
    c.p = j.value("p", c.p);
    c.j = j.value("j", c.j);
    c.t = j.value("t", c.t);
    c.C = j.value("C", c.C);
    c.C_t = j.value("C_t", c.C_t);
    c.log_every = j.value("log_every", c.log_every);
    const fs::path base = path.parent_path();
    const fs::path manifest = j.at("manifest").get<std::string>();
    job.manifest = manifest.is_absolute() ? manifest : base / manifest;
    if (j.contains("text_embeddings")) {
      const fs::path te = j.at("text_embeddings").get<std::string>();
      job.text_embeddings = te.is_absolute() ? te : base / te;
    }
  } catch (const json::exception& e) {
    throw ooal::InvalidArgument(path.string() + ": " + e.what());
  }
  job.cfg.validate();
  return job;
}

// Precomputed text embeddings: container with one layer, L = N rows.
ooal::Matrix load_text_embeddings(const fs::path& path) {
  ooal::FeatureStack s = ooal::load_features(path);
  if (s.num_layers() != 1) throw ooal::FormatError(path.string() + ": expected one layer");
  return s.layers.front();
}

std::vector<ooal::LoadedItem> load_items(const ooal::DatasetManifest& m,
                                         const std::vector<ooal::ManifestItem>& items) {
  std::vector<ooal::LoadedItem> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(ooal::load_item(m, it));
  return out;
}

int run_train(const std::string& config, const std::string& out, const std::string& ablate,
              const std::string& log_path) {
  TrainJob job = parse_train_config(config);
  job.cfg.ablation = ooal::parse_ablation(ablate);
  const ooal::DatasetManifest m = ooal::load_manifest(job.manifest);
  m.validate(true);
  const auto trainset = load_items(m, ooal::build_oneshot_trainset(m, m.oneshot_seed));
  std::optional<ooal::Matrix> text;
  if (job.text_embeddings) text = load_text_embeddings(*job.text_embeddings);
  const ooal::TrainResult res = ooal::train(job.cfg, trainset, m.affordances, std::move(text));
  ooal::save_checkpoint(res.model, out);
  if (!log_path.empty()) ooal::write_loss_csv(res.log, log_path);

  double total = 0.0;
  for (const auto& it : trainset) total += ooal::loss_only(res.model, it.features, it.target);
  std::printf("trained %zu iterations on %zu images (ablation: %s), final train BCE %.6f\n",
              job.cfg.iterations, trainset.size(),
              std::string(ooal::ablation_name(job.cfg.ablation)).c_str(),
              total / static_cast<double>(trainset.size()));
  return 0;
}

// ---------------------------------------------------------------------------

int run_eval(const std::string& ckpt, const std::string& manifest_path, const std::string& mode,
             const std::string& report, double threshold, const std::string& table) {
  const ooal::EvalMode em = ooal::parse_eval_mode(mode);
  const ooal::Model model = ooal::load_checkpoint(ckpt);
  const ooal::DatasetManifest m = ooal::load_manifest(manifest_path);
  if (m.affordances != model.text.tokens.names) {
    throw ooal::ShapeError("checkpoint classes differ from the manifest affordances");
  }
  const ooal::EvalSplits splits = ooal::split_eval_sets(m);
  const std::size_t threads = ooal::eval_threads_from_env();
  auto seen = ooal::evaluate(model, load_items(m, splits.seen), em, threshold, threads);
  auto unseen = ooal::evaluate(model, load_items(m, splits.unseen), em, threshold, threads);
  const ooal::SplitReport r = ooal::make_split_report(std::move(seen), std::move(unseen));
  write_text(report, ooal::split_report_to_json(r).dump(2) + "\n");
  const std::string text = ooal::format_table(r);
  if (!table.empty()) write_text(table, text);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------------------

int run_pca(const std::vector<std::string>& files, std::size_t k, int layer, bool cross,
            const std::string& csv, const std::string& ppm_prefix, const std::string& cmap) {
  std::vector<ooal::FeatureStack> stacks;
  for (const auto& f : files) stacks.push_back(ooal::load_features(f));
  auto pick = [&](const ooal::FeatureStack& s) -> const ooal::Matrix& {
    const int n = static_cast<int>(s.num_layers());
    const int idx = layer < 0 ? n + layer : layer;
    if (idx < 0 || idx >= n) throw ooal::InvalidArgument("--layer out of range");
    return s.layers[static_cast<std::size_t>(idx)];
  };

  std::vector<std::pair<std::vector<std::size_t>, ooal::PcaResult>> runs;
  if (cross) {
    std::vector<ooal::Matrix> parts;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      parts.push_back(pick(stacks[i]));
      which.push_back(i);
    }
    runs.emplace_back(which, ooal::pca_project(ooal::concat_rows(parts), k));
  } else {
    for (std::size_t i = 0; i < stacks.size(); ++i) {
      runs.emplace_back(std::vector<std::size_t>{i}, ooal::pca_project(pick(stacks[i]), k));
    }
  }

  std::ostringstream rows;
  rows << "image,patch";
  for (std::size_t c = 0; c < k; ++c) rows << ",pc" << c;
  rows << "\n";
  rows.precision(17);
  for (const auto& [which, res] : runs) {
    const std::string label =
        which.size() > 1 ? "all " + std::to_string(which.size()) + " images" : files[which.front()];
    std::printf("%s: explained variance ratio", label.c_str());
    for (double r : res.explained_ratio) std::printf(" %.6f", r);
    std::printf("\n");
    std::size_t offset = 0;
    for (std::size_t img : which) {
      const auto& s = stacks[img];
      for (std::size_t p = 0; p < s.num_patches(); ++p) {
        rows << img << "," << p;
        for (std::size_t c = 0; c < k; ++c) rows << "," << res.scores(offset + p, c);
        rows << "\n";
      }
      if (!ppm_prefix.empty()) {
        for (std::size_t c = 0; c < k; ++c) {
          ooal::Matrix map(s.grid.rows, s.grid.cols);
          for (std::size_t p = 0; p < s.num_patches(); ++p) map[p] = res.scores(offset + p, c);
          ooal::render_heatmap(map,
                               ppm_prefix + "_img" + std::to_string(img) + "_pc" +
                                   std::to_string(c) + ".ppm",
                               ooal::parse_colormap(cmap), 8);
        }
      }
      offset += s.num_patches();
    }
  }
  if (!csv.empty()) write_text(csv, rows.str());
  return 0;
}

int run_simmap(const std::string& query_file, std::size_t patch, const std::string& target_file,
               int layer, const std::string& ppm, const std::string& csv, const std::string& cmap) {
  const ooal::FeatureStack q = ooal::load_features(query_file);
  const ooal::FeatureStack t = ooal::load_features(target_file);
  const int n = static_cast<int>(q.num_layers());
  const int idx = layer < 0 ? n + layer : layer;
  if (idx < 0 || idx >= n) throw ooal::InvalidArgument("--layer out of range");
  if (patch >= q.num_patches()) throw ooal::InvalidArgument("--patch out of range");
  const auto res = ooal::similarity_map(q.layers[static_cast<std::size_t>(idx)].row(patch), t, layer);
  if (res.zero_norm > 0) {
    std::fprintf(stderr, "warning: %zu zero-norm cells reported as 0\n", res.zero_norm);
  }
  std::ostringstream os;
  os.precision(6);
  for (std::size_t r = 0; r < res.map.rows(); ++r) {
    for (std::size_t c = 0; c < res.map.cols(); ++c) os << (c ? "," : "") << res.map(r, c);
    os << "\n";
  }
  if (!csv.empty()) write_text(csv, os.str());
  if (!ppm.empty()) ooal::render_heatmap(res.map, ppm, ooal::parse_colormap(cmap), 8);
  if (csv.empty()) std::cout << os.str();
  return 0;
}

// ---------------------------------------------------------------------------

int run_check_grad(std::uint64_t seed, double step) {
  const auto prob = ooal::make_grad_check_problem(seed);
  const auto rep = ooal::finite_difference_check(prob.model, prob.features, prob.target, step);
  for (const auto& e : rep.tensors) {
    std::printf("%-22s max rel err %.3e  max abs err %.3e\n", e.tensor.c_str(), e.max_rel_error,
                e.max_abs_error);
  }
  std::printf("max relative error %.3e (threshold 1e-4)\n", rep.max_rel_error);
  return rep.max_rel_error < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot open affordance learning toolkit"};
  app.require_subcommand(1);

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic planted-part dataset");
  gen->add_option("--seed", gs.seed)->required();
  gen->add_option("--objects", gs.objects, "Total object count (base + novel)")->required();
  gen->add_option("--out", gs.out)->required();
  gen->add_option("--novel", gs.novel, "Novel objects held out of training");
  gen->add_option("--items", gs.items, "Images per object");
  gen->add_option("--parts", gs.parts);
  gen->add_option("--grid", gs.grid, "Patch grid side");
  gen->add_option("--image", gs.image, "Image side in pixels");
  gen->add_option("--layers", gs.layers);
  gen->add_option("--dim", gs.dim, "Visual feature dimension C_v");
  gen->add_option("--noise", gs.noise);
  gen->add_option("--affordances", gs.affordances, "Comma-separated names");

  std::string dens_in, dens_out;
  double sigma = 10.0;
  auto* dens = app.add_subcommand("densify", "Keypoints JSON to dense mask container");
  dens->add_option("--in", dens_in)->required();
  dens->add_option("--sigma", sigma);
  dens->add_option("--out", dens_out)->required();

  std::string cfg_path, ckpt_out, ablate, log_path;
  auto* tr = app.add_subcommand("train", "One-shot training");
  tr->add_option("--config", cfg_path)->required();
  tr->add_option("--out", ckpt_out)->required();
  tr->add_option("--ablate", ablate)->check(CLI::IsMember({"tpl", "mlff", "td", "ctm"}));
  tr->add_option("--log", log_path, "Loss CSV (iteration,loss)");

  std::string ev_ckpt, ev_manifest, ev_mode = "dense", ev_report, ev_table;
  double threshold = 0.5;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the seen and unseen splits");
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--mode", ev_mode)->check(CLI::IsMember({"heatmap", "dense"}));
  ev->add_option("--report", ev_report)->required();
  ev->add_option("--threshold", threshold);
  ev->add_option("--table", ev_table);

  auto* an = app.add_subcommand("analyze", "Feature analysis");
  an->require_subcommand(1);
  std::vector<std::string> pca_files;
  std::size_t pca_k = 3;
  int layer = -1;
  bool cross = false;
  std::string csv, ppm, cmap = "coolwarm";
  auto* pca = an->add_subcommand("pca", "Principal components of patch features");
  pca->add_option("--features", pca_files)->required();
  pca->add_option("--k", pca_k);
  pca->add_option("--layer", layer);
  pca->add_flag("--cross", cross, "One PCA over all images");
  pca->add_option("--csv", csv);
  pca->add_option("--ppm", ppm, "Output prefix for per-component heatmaps");
  pca->add_option("--colormap", cmap);

  std::string sm_query, sm_target;
  std::size_t sm_patch = 0;
  auto* sm = an->add_subcommand("simmap", "Cosine similarity of one patch against an image");
  sm->add_option("--query", sm_query)->required();
  sm->add_option("--patch", sm_patch)->required();
  sm->add_option("--target", sm_target)->required();
  sm->add_option("--layer", layer);
  sm->add_option("--ppm", ppm);
  sm->add_option("--csv", csv);
  sm->add_option("--colormap", cmap);

  std::uint64_t cg_seed = 0;
  double cg_step = 1e-5;
  auto* cg = app.add_subcommand("check-grad", "Finite-difference gradient check");
  cg->add_option("--seed", cg_seed);
  cg->add_option("--step", cg_step);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*gen) return run_gen_synth(gs);
    if (*dens) return run_densify(dens_in, sigma, dens_out);
    if (*tr) return run_train(cfg_path, ckpt_out, ablate, log_path);
    if (*ev) return run_eval(ev_ckpt, ev_manifest, ev_mode, ev_report, threshold, ev_table);
    if (*pca) return run_pca(pca_files, pca_k, layer, cross, csv, ppm, cmap);
    if (*sm) return run_simmap(sm_query, sm_patch, sm_target, layer, ppm, csv, cmap);
    if (*cg) return run_check_grad(cg_seed, cg_step);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
