#pragma once

#include <algorithm>
#include <vector>

#include "proxidist/common.hpp"

namespace proxidist {

// Pool-adjacent-violators: weighted least-squares projection onto
// nondecreasing sequences. Preserves the weighted mean of the input.
inline std::vector<double> pava(const std::vector<double>& values,
                                const std::vector<double>& weights) {
  const std::size_t n = values.size();
  if (weights.size() != n) fail_config("isotonic", "weight length mismatch");
  struct Block {
    double weight;
    double mean;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0)) fail_config("isotonic", "weights must be positive");
    blocks.push_back({weights[i], values[i], 1});
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.weight * prev.mean + top.weight * top.mean) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

// Projection onto {0 <= v_1 <= ... <= v_K <= 1}: PAVA then clipping (clipping
// commutes with the ordering constraints).
inline std::vector<double> isotonic_project(const std::vector<double>& values,
                                            const std::vector<double>& weights) {
  std::vector<double> out = pava(values, weights);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

inline std::vector<double> isotonic_project(const std::vector<double>& values) {
  return isotonic_project(values, std::vector<double>(values.size(), 1.0));
}

}  // namespace proxidist
