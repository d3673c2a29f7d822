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

#include "ooal/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "ooal/container.hpp"
#include "ooal/errors.hpp"
#include "ooal/rng.hpp"

namespace ooal {

namespace {

constexpr double kMaxSignatureCosine = 0.5;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Matrix gaussian_row(Rng& rng, std::size_t dim) {
  Matrix m(1, dim);
  for (std::size_t i = 0; i < dim; ++i) m[i] = rng.normal();
  return m;
}

std::uint32_t checked_u32(std::size_t v, const char* field) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError(std::string("save_features: ") + field + " exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void FeatureStack::validate() const {
  if (layers.empty()) throw ShapeError("FeatureStack: no layers");
  const std::size_t L = layers.front().rows();
  const std::size_t C = layers.front().cols();
  if (L == 0 || C == 0) throw ShapeError("FeatureStack: empty layer");
  for (const auto& layer : layers) {
    if (layer.rows() != L || layer.cols() != C) {
      throw ShapeError("FeatureStack: layers differ in shape");
    }
    if (!all_finite(layer)) throw NumericError("FeatureStack: non-finite patch feature");
  }
  if (cls.rows() != 1 || cls.cols() != C) throw ShapeError("FeatureStack: cls shape");
  if (!all_finite(cls)) throw NumericError("FeatureStack: non-finite cls");
  if (grid.area() != L) {
    throw ShapeError("FeatureStack: grid " + std::to_string(grid.rows) + "x" +
                     std::to_string(grid.cols) + " does not hold " + std::to_string(L) +
                     " patches");
  }
}

void ClassTokenTable::validate() const {
  if (names.empty()) throw InvalidArgument("ClassTokenTable: no classes");
  if (tokens.rows() != names.size()) throw ShapeError("ClassTokenTable: row count");
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) throw InvalidArgument("ClassTokenTable: duplicate names");
  if (!all_finite(tokens)) throw NumericError("ClassTokenTable: non-finite token");
}

std::vector<unsigned char> encode_features(const FeatureStack& stack) {
  stack.validate();
  ByteWriter w;
  w.put_bytes(kContainerMagic);
  w.put_u32(checked_u32(stack.num_layers(), "n_layers"));
  w.put_u32(checked_u32(stack.num_patches(), "L"));
  w.put_u32(checked_u32(stack.dim(), "C_v"));
  w.put_u32(checked_u32(stack.grid.rows, "h_p"));
  w.put_u32(checked_u32(stack.grid.cols, "w_p"));
  w.put_u32(checked_u32(stack.image_size.rows, "H"));
  w.put_u32(checked_u32(stack.image_size.cols, "W"));
  for (const auto& layer : stack.layers) {
    for (double v : layer.values()) w.put_f64(v);
  }
  for (double v : stack.cls.values()) w.put_f64(v);
  return w.bytes();
}

FeatureStack decode_features(std::vector<unsigned char> bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  expect_magic(r);
  const std::size_t n_layers = r.get_u32();
  const std::size_t L = r.get_u32();
  const std::size_t C = r.get_u32();
  FeatureStack stack;
  stack.grid.rows = r.get_u32();
  stack.grid.cols = r.get_u32();
  stack.image_size.rows = r.get_u32();
  stack.image_size.cols = r.get_u32();
  if (n_layers == 0 || L == 0 || C == 0) {
    throw FormatError(what + ": header describes no feature payload");
  }
  if (stack.grid.area() != L) {
    throw CorruptionError(what + ": header grid does not match L");
  }
  const std::size_t expected = (n_layers * L * C + C) * sizeof(double);
  if (r.remaining() != expected) {
    throw CorruptionError(what + ": payload holds " + std::to_string(r.remaining()) +
                          " bytes, header implies " + std::to_string(expected));
  }
  stack.layers.reserve(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    Matrix layer(L, C);
    for (double& v : layer.values()) v = r.get_f64();
    stack.layers.push_back(std::move(layer));
  }
  stack.cls = Matrix(1, C);
  for (double& v : stack.cls.values()) v = r.get_f64();
  return stack;
}

void save_features(const FeatureStack& stack, const std::filesystem::path& path) {
  write_file_bytes(path, encode_features(stack));
}

FeatureStack load_features(const std::filesystem::path& path) {
  return decode_features(read_file_bytes(path), path.string());
}

// ---------------------------------------------------------------------------

const ObjectSpec& SynthWorldSpec::object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return o;
  }
  throw InvalidArgument("unknown object id: " + id);
}

int SynthWorldSpec::part_at(const ObjectSpec& object, std::size_t r, std::size_t c) {
  for (const auto& p : object.placements) {
    if (p.covers(r, c)) return static_cast<int>(p.part);
  }
  return -1;
}

void SynthWorldSpec::validate() const {
  if (parts.empty()) throw InvalidArgument("SynthWorldSpec: no parts");
  if (num_layers == 0 || dim == 0 || grid.area() == 0) {
    throw InvalidArgument("SynthWorldSpec: empty geometry");
  }
  for (std::size_t a = 0; a < parts.size(); ++a) {
    if (parts[a].signature.cols() != dim) throw ShapeError("SynthWorldSpec: signature dim");
    if (parts[a].affordance >= num_affordances) {
      throw InvalidArgument("SynthWorldSpec: affordance index out of range");
    }
    for (std::size_t b = a + 1; b < parts.size(); ++b) {
      const double c = cosine_similarity(parts[a].signature.row(0), parts[b].signature.row(0));
      if (std::abs(c) > 1.0 - 1e-9) {
        throw InvalidArgument("SynthWorldSpec: collinear part signatures");
      }
    }
  }
  std::set<std::string> ids;
  for (const auto& o : objects) {
    if (!ids.insert(o.id).second) throw InvalidArgument("SynthWorldSpec: duplicate object " + o.id);
    for (const auto& p : o.placements) {
      if (p.part >= parts.size() || p.row + p.height > grid.rows ||
          p.col + p.width > grid.cols) {
        throw InvalidArgument("SynthWorldSpec: placement out of range in " + o.id);
      }
    }
  }
}

namespace {

// Stacks 2-3 parts along one axis inside a random band, like a tool seen
// side-on (handle then blade, or handle then head).
ObjectSpec random_object(Rng& rng, const std::string& id, std::size_t first_part,
                         std::size_t num_parts, GridSize grid, bool novel) {
  ObjectSpec obj;
  obj.id = id;
  obj.novel = novel;

  std::vector<std::size_t> chosen{first_part};
  const std::size_t want =
      std::min({num_parts, 2 + rng.uniform_index(2), grid.rows, grid.cols});
  while (chosen.size() < want) {
    const std::size_t p = rng.uniform_index(num_parts);
    if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) chosen.push_back(p);
  }
  // Shuffle the stacking order.
  for (std::size_t i = chosen.size(); i > 1; --i) {
    std::swap(chosen[i - 1], chosen[rng.uniform_index(i)]);
  }

  const bool vertical = rng.uniform_index(2) == 0;
  const std::size_t along = vertical ? grid.rows : grid.cols;
  const std::size_t across = vertical ? grid.cols : grid.rows;

  // Segment lengths along the stacking axis, each ≥ 1, total ≤ along.
  std::vector<std::size_t> lengths(chosen.size(), 1);
  const std::size_t slack = along - std::min(along, chosen.size());
  const std::size_t budget = rng.uniform_index(slack + 1);
  for (std::size_t extra = 0; extra < budget; ++extra) {
    lengths[rng.uniform_index(lengths.size())] += 1;
  }
  std::size_t total = 0;
  for (std::size_t l : lengths) total += l;
  const std::size_t band = std::min<std::size_t>(across, 2 + rng.uniform_index(2));
  const std::size_t band_start = rng.uniform_index(across - band + 1);
  std::size_t pos = rng.uniform_index(along - std::min(along, total) + 1);

  for (std::size_t i = 0; i < chosen.size(); ++i) {
    PartPlacement pl;
    pl.part = chosen[i];
    if (vertical) {
      pl.row = pos;
      pl.height = lengths[i];
      pl.col = band_start;
      pl.width = band;
    } else {
      pl.col = pos;
      pl.width = lengths[i];
      pl.row = band_start;
      pl.height = band;
    }
    pos += lengths[i];
    obj.placements.push_back(pl);
  }
  return obj;
}

}  // namespace

SynthWorldSpec make_synth_world(const SynthWorldOptions& o) {
  if (o.num_parts == 0 || o.num_affordances == 0) {
    throw InvalidArgument("make_synth_world: need at least one part and one affordance");
  }
  if (o.grid.rows < 2 || o.grid.cols < 2) throw InvalidArgument("make_synth_world: grid too small");
  SynthWorldSpec w;
  w.seed = o.seed;
  w.num_affordances = o.num_affordances;
  w.num_layers = o.num_layers;
  w.dim = o.dim;
  w.grid = o.grid;
  w.image_size = o.image_size;

  Rng sig_rng(derive_seed(o.seed, {0x5167}));
  while (w.parts.size() < o.num_parts) {
    Matrix candidate = gaussian_row(sig_rng, o.dim);
    const bool separated = std::all_of(w.parts.begin(), w.parts.end(), [&](const PartSpec& p) {
      return std::abs(cosine_similarity(candidate.row(0), p.signature.row(0))) <
             kMaxSignatureCosine;
    });
    if (separated) w.parts.push_back({std::move(candidate), w.parts.size() % o.num_affordances});
  }

  Rng layout_rng(derive_seed(o.seed, {0x1a70}));
  const std::size_t total = o.num_base + o.num_novel;
  for (std::size_t i = 0; i < total; ++i) {
    const bool novel = i >= o.num_base;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%02zu", novel ? "novel" : "base", i);
    const std::size_t first =
        novel ? layout_rng.uniform_index(o.num_parts) : i % o.num_parts;
    w.objects.push_back(random_object(layout_rng, buf, first, o.num_parts, o.grid, novel));
  }
  w.validate();
  return w;
}

FeatureStack synth_vision_encode(const SynthWorldSpec& world, const std::string& object_id,
                                 double noise_scale, std::uint64_t variant) {
  if (!(noise_scale >= 0.0)) throw InvalidArgument("synth_vision_encode: noise_scale < 0");
  const ObjectSpec& obj = world.object(object_id);
  std::size_t object_index = 0;
  while (world.objects[object_index].id != object_id) ++object_index;

  Rng world_rng(derive_seed(world.seed, {0xb6}));
  const Matrix background = gaussian_row(world_rng, world.dim);
  std::vector<Matrix> drift;
  for (std::size_t k = 0; k < world.num_layers; ++k) drift.push_back(gaussian_row(world_rng, world.dim));

  Rng noise_rng(derive_seed(world.seed, {0x401e, object_index, variant}));
  FeatureStack stack;
  stack.grid = world.grid;
  stack.image_size = world.image_size;
  const std::size_t L = world.grid.area();
  for (std::size_t k = 0; k < world.num_layers; ++k) {
    const double mix = static_cast<double>(k + 1) / static_cast<double>(world.num_layers);
    Matrix layer(L, world.dim);
    for (std::size_t r = 0; r < world.grid.rows; ++r) {
      for (std::size_t c = 0; c < world.grid.cols; ++c) {
        const int part = SynthWorldSpec::part_at(obj, r, c);
        const Matrix& sig = part < 0 ? background : world.parts[part].signature;
        auto out = layer.row(r * world.grid.cols + c);
        for (std::size_t d = 0; d < world.dim; ++d) {
          double v = mix == 1.0 ? sig[d] : mix * sig[d] + (1.0 - mix) * drift[k][d];
          if (noise_scale > 0.0) v += noise_scale * noise_rng.normal();
          out[d] = v;
        }
      }
    }
    stack.layers.push_back(std::move(layer));
  }
  stack.cls = column_sums(stack.last_layer()) * (1.0 / static_cast<double>(L));
  return stack;
}

ClassTokenTable synth_text_tokens(const std::vector<std::string>& names, std::size_t dim,
                                  std::uint64_t seed) {
  if (names.empty()) throw InvalidArgument("synth_text_tokens: no names");
  if (dim == 0) throw InvalidArgument("synth_text_tokens: zero dimension");
  ClassTokenTable table;
  table.names = names;
  table.tokens = Matrix(names.size(), dim);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Rng rng(derive_seed(seed, {fnv1a(names[i])}));
    auto row = table.tokens.row(i);
    for (double& v : row) v = rng.normal();
    const double n = norm(row);
    for (double& v : row) v /= n;
  }
  table.validate();
  return table;
}

}  // namespace ooal
