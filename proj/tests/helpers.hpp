#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rankjoint/dataset.hpp"
#include "rankjoint/schema.hpp"

namespace rjtest {

using namespace rankjoint;

// Schema with `n_attr` attributes of 2..max_levels levels, random baselines.
inline AttributeSchema random_schema(std::mt19937_64& rng, std::size_t n_attr, int max_levels = 4) {
  std::vector<Attribute> attrs;
  for (std::size_t a = 0; a < n_attr; ++a) {
    Attribute at;
    at.name = "attr" + std::to_string(a);
    const int L = std::uniform_int_distribution<int>(2, max_levels)(rng);
    for (int l = 0; l < L; ++l) at.levels.push_back("L" + std::to_string(l));
    at.baseline = std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(L) - 1)(rng);
    attrs.push_back(std::move(at));
  }
  return AttributeSchema(std::move(attrs));
}

// Uniform random rankings of uniformly drawn profiles. K may vary by task
// when k_min < k_max.
inline ConjointDataset random_ranked(std::mt19937_64& rng, const AttributeSchema& schema,
                                     std::size_t N, std::size_t J, int k_min, int k_max) {
  ConjointDataset d(schema, ResponseMode::Ranked);
  std::vector<int> levels(schema.size());
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t j = 0; j < J; ++j) {
      const int K = std::uniform_int_distribution<int>(k_min, k_max)(rng);
      std::vector<int> ranks(static_cast<std::size_t>(K));
      std::iota(ranks.begin(), ranks.end(), 1);
      std::shuffle(ranks.begin(), ranks.end(), rng);
      for (int k = 0; k < K; ++k) {
        for (std::size_t a = 0; a < schema.size(); ++a) {
          levels[a] = std::uniform_int_distribution<int>(
              0, static_cast<int>(schema[a].levels.size()) - 1)(rng);
        }
        d.add_row("s" + std::to_string(s), "t" + std::to_string(j), k + 1, levels,
                  ranks[static_cast<std::size_t>(k)]);
      }
    }
  }
  return d;
}

}  // namespace rjtest
