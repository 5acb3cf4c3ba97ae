#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "efat/faultmap.hpp"

namespace efat {

// Fully-connected layer dimensions: out_dim neurons, each with in_dim inputs.
struct LayerShape {
  int in_dim = 1;
  int out_dim = 1;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim);
  }
  void validate() const;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// Per-weight keep flags of one layer, out_dim x in_dim row-major.
// true = weight usable, false = weight sits on a faulty PE and is forced to 0.
class PruneMask {
 public:
  PruneMask() = default;
  explicit PruneMask(LayerShape shape, bool keep = true);

  const LayerShape& shape() const noexcept { return shape_; }
  bool kept(int neuron, int input) const {
    return keep_[index(neuron, input)] != 0;
  }
  void set(int neuron, int input, bool keep) {
    keep_[index(neuron, input)] = keep ? 1 : 0;
  }
  std::span<const std::uint8_t> flags() const noexcept { return keep_; }
  std::size_t masked_count() const noexcept;

  friend bool operator==(const PruneMask&, const PruneMask&) = default;

 private:
  std::size_t index(int neuron, int input) const noexcept {
    return static_cast<std::size_t>(neuron) * static_cast<std::size_t>(shape_.in_dim) +
           static_cast<std::size_t>(input);
  }

  LayerShape shape_{};
  std::vector<std::uint8_t> keep_;
};

// One mask per layer of a network.
using NetworkMask = std::vector<PruneMask>;

// Weight-stationary placement: input i of neuron n sits on PE
// (i mod rows, n mod cols). Inputs are tiled over rows in segments of
// `rows`, neurons over columns in groups of `cols`, so a column only ever
// holds weights of one neuron at a time.
constexpr PeCoord pe_for_weight(int neuron, int input,
                                const HardwareConfig& hw) noexcept {
  return {input % hw.rows, neuron % hw.cols};
}

// FAP masking: a weight is dropped iff the PE it is mapped to is faulty.
// Throws DimensionMismatch if the map was not built for `hw`.
PruneMask derive_weight_mask(const LayerShape& layer, const HardwareConfig& hw,
                             const FaultMap& map);

NetworkMask derive_network_mask(std::span<const LayerShape> layers,
                                const HardwareConfig& hw, const FaultMap& map);

NetworkMask all_kept_mask(std::span<const LayerShape> layers);

double masked_fraction(const PruneMask& mask) noexcept;

// Elementwise AND of keep flags (union of dropped weights).
PruneMask combine_masks(const PruneMask& a, const PruneMask& b);

}  // namespace efat
