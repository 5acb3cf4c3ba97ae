#pragma once

#include <string>
#include <vector>

#include "efat/faultmap.hpp"
#include "efat/random.hpp"

namespace efat::oracle {

// Map with as many faults as `base`, of which `shared` are taken from base's
// faults and the rest from base's fault-free PEs, both chosen at random.
inline FaultMap perturbed_map(const FaultMap& base, std::size_t shared,
                              std::uint64_t seed, std::string chip_id) {
  Rng rng(seed);
  std::vector<PeCoord> faulty = base.faults();
  std::vector<PeCoord> healthy;
  const auto& d = base.dims();
  for (int r = 0; r < d.rows; ++r)
    for (int c = 0; c < d.cols; ++c)
      if (!base.is_faulty(r, c)) healthy.push_back({r, c});
  rng.shuffle(faulty.begin(), faulty.end());
  rng.shuffle(healthy.begin(), healthy.end());
  const std::size_t fresh = faulty.size() - shared;
  std::vector<PeCoord> out(faulty.begin(), faulty.begin() + static_cast<std::ptrdiff_t>(shared));
  out.insert(out.end(), healthy.begin(), healthy.begin() + static_cast<std::ptrdiff_t>(fresh));
  return FaultMap::from_coords(std::move(chip_id), d, out);
}

}  // namespace efat::oracle
