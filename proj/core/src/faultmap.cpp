#include "efat/faultmap.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "efat/error.hpp"
#include "efat/random.hpp"
#include "efat/io.hpp"

namespace efat {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t word_count(const HardwareConfig& dims) {
  return (dims.total() + kWordBits - 1) / kWordBits;
}

std::string dims_string(const HardwareConfig& d) {
  return std::to_string(d.rows) + "x" + std::to_string(d.cols);
}

}  // namespace

void HardwareConfig::validate() const {
  if (rows < 1 || cols < 1) {
    throw ValidationError("hardware dims must be positive, got " +
                          dims_string(*this));
  }
}

FaultMap::FaultMap(std::string chip_id, HardwareConfig dims,
                   std::optional<std::uint64_t> seed)
    : chip_id_(std::move(chip_id)), dims_(dims), seed_(seed) {
  dims_.validate();
  bits_.assign(word_count(dims_), 0);
}

FaultMap FaultMap::from_coords(std::string chip_id, HardwareConfig dims,
                               std::span<const PeCoord> faults,
                               std::optional<std::uint64_t> seed) {
  FaultMap map(std::move(chip_id), dims, seed);
  for (const auto& pe : faults) {
    if (pe.row < 0 || pe.row >= dims.rows || pe.col < 0 || pe.col >= dims.cols) {
      throw ValidationError("fault (" + std::to_string(pe.row) + ", " +
                            std::to_string(pe.col) + ") outside " +
                            dims_string(dims) + " array in chip '" +
                            map.chip_id_ + "'");
    }
    const std::size_t idx =
        static_cast<std::size_t>(pe.row) * dims.cols + static_cast<std::size_t>(pe.col);
    auto& word = map.bits_[idx / kWordBits];
    const std::uint64_t bit = std::uint64_t{1} << (idx % kWordBits);
    if (word & bit) {
      throw ValidationError("duplicate fault (" + std::to_string(pe.row) + ", " +
                            std::to_string(pe.col) + ") in chip '" +
                            map.chip_id_ + "'");
    }
    word |= bit;
    ++map.count_;
  }
  return map;
}

FaultMap FaultMap::all_faulty(std::string chip_id, HardwareConfig dims) {
  FaultMap map(std::move(chip_id), dims, std::nullopt);
  const std::size_t total = dims.total();
  for (std::size_t i = 0; i < total; ++i) {
    map.bits_[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
  }
  map.count_ = total;
  return map;
}

FaultMap FaultMap::fault_free(std::string chip_id, HardwareConfig dims) {
  return FaultMap(std::move(chip_id), dims, std::nullopt);
}

bool FaultMap::is_faulty(int row, int col) const {
  if (row < 0 || row >= dims_.rows || col < 0 || col >= dims_.cols) return false;
  const std::size_t idx =
      static_cast<std::size_t>(row) * dims_.cols + static_cast<std::size_t>(col);
  return (bits_[idx / kWordBits] >> (idx % kWordBits)) & 1U;
}

std::vector<PeCoord> FaultMap::faults() const {
  std::vector<PeCoord> out;
  out.reserve(count_);
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    std::uint64_t word = bits_[w];
    while (word != 0) {
      const int bit = std::countr_zero(word);
      const std::size_t idx = w * kWordBits + static_cast<std::size_t>(bit);
      out.push_back({static_cast<int>(idx / dims_.cols),
                     static_cast<int>(idx % dims_.cols)});
      word &= word - 1;
    }
  }
  return out;
}

void FaultMap::require_same_dims(const FaultMap& other) const {
  if (dims_ != other.dims_) {
    throw DimensionMismatch("fault maps '" + chip_id_ + "' (" +
                            dims_string(dims_) + ") and '" + other.chip_id_ +
                            "' (" + dims_string(other.dims_) +
                            ") have different dims");
  }
}

std::size_t FaultMap::overlap_count(const FaultMap& other) const {
  require_same_dims(other);
  std::size_t n = 0;
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    n += static_cast<std::size_t>(std::popcount(bits_[w] & other.bits_[w]));
  }
  return n;
}

bool FaultMap::is_subset_of(const FaultMap& other) const {
  require_same_dims(other);
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    if ((bits_[w] & ~other.bits_[w]) != 0) return false;
  }
  return true;
}

bool FaultMap::same_faults(const FaultMap& other) const {
  return dims_ == other.dims_ && bits_ == other.bits_;
}

FaultMap FaultMap::with_chip_id(std::string chip_id) const {
  FaultMap copy = *this;
  copy.chip_id_ = std::move(chip_id);
  return copy;
}

FaultMap generate_fault_map(const HardwareConfig& config, double target_rate,
                            std::uint64_t seed, std::string chip_id) {
  if (!(target_rate >= 0.0 && target_rate <= 1.0)) {
    throw ValidationError("target fault rate must lie in [0, 1], got " +
                          std::to_string(target_rate));
  }
  FaultMap map(std::move(chip_id), config, seed);
  const std::size_t total = config.total();
  const auto count = static_cast<std::size_t>(
      std::llround(target_rate * static_cast<double>(total)));

  // Partial Fisher-Yates: the first `count` slots become the faulty PEs.
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0U);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(total - i);
    std::swap(order[i], order[j]);
    const std::size_t idx = order[i];
    map.bits_[idx / kWordBits] |= std::uint64_t{1} << (idx % kWordBits);
  }
  map.count_ = count;
  return map;
}

double fault_rate(const FaultMap& map) noexcept {
  return static_cast<double>(map.fault_count()) /
         static_cast<double>(map.total());
}

FaultMap fuse(const FaultMap& a, const FaultMap& b) {
  a.require_same_dims(b);
  FaultMap out(a.chip_id_ + "+" + b.chip_id_, a.dims_, std::nullopt);
  std::size_t n = 0;
  for (std::size_t w = 0; w < out.bits_.size(); ++w) {
    out.bits_[w] = a.bits_[w] | b.bits_[w];
    n += static_cast<std::size_t>(std::popcount(out.bits_[w]));
  }
  out.count_ = n;
  return out;
}

double combined_rate(double p_a, double p_b, double p_overlap) {
  if (p_a < 0.0 || p_a > 1.0 || p_b < 0.0 || p_b > 1.0) {
    throw ValidationError("fault rates must lie in [0, 1]");
  }
  if (p_overlap < 0.0 || p_overlap > std::min(p_a, p_b)) {
    throw ValidationError("overlap probability " + std::to_string(p_overlap) +
                          " must lie in [0, min(pA, pB)]");
  }
  return p_a + p_b - p_overlap;
}

void save_fault_maps(std::span<const FaultMap> maps,
                     const std::filesystem::path& path,
                     std::optional<HardwareConfig> dims) {
  io::write_json_file(path, io::fault_maps_to_json(maps, dims));
}

std::vector<FaultMap> load_fault_maps(const std::filesystem::path& path) {
  return io::fault_maps_from_json(io::read_json_file(path));
}

}  // namespace efat
