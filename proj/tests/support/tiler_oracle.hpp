#pragma once

// Test-only oracle: physically simulates weight-stationary loading of a
// fully-connected layer onto the PE array, segment by segment, and records
// which PE held every weight. Independent of efat::pe_for_weight.

#include <map>
#include <utility>
#include <vector>

#include "efat/faultmap.hpp"
#include "efat/mapping.hpp"

namespace efat::oracle {

struct Placement {
  int neuron;
  int input;
  PeCoord pe;
};

// Neurons are loaded in column groups of `cols`, inputs in row segments of
// `rows`; one (group, segment) pair is one array load.
inline std::vector<Placement> simulate_tiling(const LayerShape& layer,
                                              const HardwareConfig& hw) {
  std::vector<Placement> placements;
  const int groups = (layer.out_dim + hw.cols - 1) / hw.cols;
  const int segments = (layer.in_dim + hw.rows - 1) / hw.rows;
  for (int group = 0; group < groups; ++group) {
    for (int segment = 0; segment < segments; ++segment) {
      // Load: PE (r, c) receives weight of neuron group*cols + c,
      // input segment*rows + r, if that weight exists.
      for (int c = 0; c < hw.cols; ++c) {
        const int neuron = group * hw.cols + c;
        if (neuron >= layer.out_dim) continue;
        for (int r = 0; r < hw.rows; ++r) {
          const int input = segment * hw.rows + r;
          if (input >= layer.in_dim) continue;
          placements.push_back({neuron, input, {r, c}});
        }
      }
    }
  }
  return placements;
}

// keep[n][i] from the simulated placements.
inline std::vector<std::vector<bool>> oracle_mask(const LayerShape& layer,
                                                  const HardwareConfig& hw,
                                                  const FaultMap& map) {
  std::vector<std::vector<bool>> keep(layer.out_dim, std::vector<bool>(layer.in_dim, true));
  for (const auto& p : simulate_tiling(layer, hw)) {
    if (map.is_faulty(p.pe)) keep[p.neuron][p.input] = false;
  }
  return keep;
}

}  // namespace efat::oracle
