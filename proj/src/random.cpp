// Copyright (C) 2026 Thinner Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "thinner/random.hpp"

#include <numeric>
#include <unordered_map>

#include "thinner/error.hpp"

namespace thinner {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : stream) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

std::vector<int> sample_without_replacement(Rng& rng, int population,
                                            int count) {
  if (count < 0 || count > population) {
    throw ConfigError("cannot draw " + std::to_string(count) +
                      " distinct values from " + std::to_string(population));
  }
  // Partial Fisher-Yates over a sparse permutation so large populations
  // stay cheap.
  std::unordered_map<int, int> swapped;
  auto value_at = [&](int i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<int> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, population - 1);
    const int j = pick(rng);
    const int vi = value_at(i);
    const int vj = value_at(j);
    swapped[j] = vi;
    swapped[i] = vj;
    out.push_back(vj);
  }
  return out;
}

}  // namespace thinner
