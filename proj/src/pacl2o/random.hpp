// Copyright 2026 The pacl2o Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace pacl2o {

using Rng = std::mt19937_64;

// Counter-based seed split: every (root, stream, index) triple maps to an
// independent 64-bit seed through two SplitMix64 finalizer rounds.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(stream)) + index);
}

inline Rng make_rng(std::uint64_t root, std::uint64_t stream,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

// Stream tags used by the pipeline.
namespace stream {
inline constexpr std::uint64_t kProblems = 1;
inline constexpr std::uint64_t kHyperInit = 2;
inline constexpr std::uint64_t kTraining = 3;
inline constexpr std::uint64_t kPrior = 4;
inline constexpr std::uint64_t kSynthetic = 5;
}  // namespace stream

}  // namespace pacl2o
