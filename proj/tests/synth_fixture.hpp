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

#ifndef OOAL_TESTS_SYNTH_FIXTURE_HPP_
#define OOAL_TESTS_SYNTH_FIXTURE_HPP_

#include <string>
#include <vector>

#include "ooal/data.hpp"
#include "ooal/features.hpp"

namespace ooal::testing {

// In-memory version of the generated dataset: items of the chosen split,
// one per object per variant.
inline std::vector<LoadedItem> synth_items(const SynthWorldSpec& world, bool novel,
                                           std::size_t variants, double noise,
                                           std::uint64_t first_variant = 0) {
  std::vector<LoadedItem> out;
  for (const auto& obj : world.objects) {
    if (obj.novel != novel) continue;
    for (std::size_t v = first_variant; v < first_variant + variants; ++v) {
      LoadedItem it;
      it.id = obj.id + "_" + std::to_string(v);
      it.features = synth_vision_encode(world, obj.id, noise, v);
      it.target = synth_affordance_target(world, obj.id);
      out.push_back(std::move(it));
    }
  }
  return out;
}

inline const std::vector<std::string>& synth_affordances() {
  static const std::vector<std::string> names{"grasp", "cut", "contain", "pound"};
  return names;
}

}  // namespace ooal::testing

#endif  // OOAL_TESTS_SYNTH_FIXTURE_HPP_
