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

#ifndef OOAL_RNG_HPP_
#define OOAL_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ooal {

// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

// Seeded generator with platform-independent output.
//
// The engine is std::mt19937_64, whose sequence is fixed by the standard.
// Distributions are implemented here rather than taken from <random>
// because libstdc++/libc++/MSVC disagree on std::normal_distribution and
// std::uniform_int_distribution outputs.
//
//   uniform()          = (next() >> 11) * 2^-53, in [0, 1)
//   uniform_index(n)   = next() % n, redrawing while next() >= 2^64 - (2^64 mod n)
//   normal()           = Box-Muller on two uniform() draws, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  std::size_t uniform_index(std::size_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ooal

#endif  // OOAL_RNG_HPP_
