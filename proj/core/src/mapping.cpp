#include "efat/mapping.hpp"

#include <algorithm>
#include <string>

#include "efat/error.hpp"

namespace efat {

void LayerShape::validate() const {
  if (in_dim < 1 || out_dim < 1) {
    throw ValidationError("layer dims must be positive, got " +
                          std::to_string(out_dim) + "x" + std::to_string(in_dim));
  }
}

PruneMask::PruneMask(LayerShape shape, bool keep)
    : shape_(shape), keep_(shape.weight_count(), keep ? 1 : 0) {
  shape_.validate();
}

std::size_t PruneMask::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count(keep_.begin(), keep_.end(), 0));
}

PruneMask derive_weight_mask(const LayerShape& layer, const HardwareConfig& hw,
                             const FaultMap& map) {
  hw.validate();
  if (map.dims() != hw) {
    throw DimensionMismatch(
        "fault map '" + map.chip_id() + "' is " + std::to_string(map.dims().rows) +
        "x" + std::to_string(map.dims().cols) + " but the array is " +
        std::to_string(hw.rows) + "x" + std::to_string(hw.cols));
  }
  PruneMask mask(layer);
  if (map.fault_count() == 0) return mask;
  for (int n = 0; n < layer.out_dim; ++n) {
    for (int i = 0; i < layer.in_dim; ++i) {
      if (map.is_faulty(pe_for_weight(n, i, hw))) mask.set(n, i, false);
    }
  }
  return mask;
}

NetworkMask derive_network_mask(std::span<const LayerShape> layers,
                                const HardwareConfig& hw, const FaultMap& map) {
  NetworkMask masks;
  masks.reserve(layers.size());
  for (const auto& layer : layers) {
    masks.push_back(derive_weight_mask(layer, hw, map));
  }
  return masks;
}

NetworkMask all_kept_mask(std::span<const LayerShape> layers) {
  NetworkMask masks;
  masks.reserve(layers.size());
  for (const auto& layer : layers) masks.emplace_back(layer, true);
  return masks;
}

double masked_fraction(const PruneMask& mask) noexcept {
  const auto total = mask.shape().weight_count();
  if (total == 0) return 0.0;
  return static_cast<double>(mask.masked_count()) / static_cast<double>(total);
}

PruneMask combine_masks(const PruneMask& a, const PruneMask& b) {
  if (a.shape() != b.shape()) {
    throw DimensionMismatch("cannot combine masks of different layer shapes");
  }
  PruneMask out(a.shape());
  const auto& s = a.shape();
  for (int n = 0; n < s.out_dim; ++n) {
    for (int i = 0; i < s.in_dim; ++i) {
      out.set(n, i, a.kept(n, i) && b.kept(n, i));
    }
  }
  return out;
}

}  // namespace efat
