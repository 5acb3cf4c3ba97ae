#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace efat {

// Dimensions of the systolic PE array.
struct HardwareConfig {
  int rows = 16;
  int cols = 16;

  std::size_t total() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  void validate() const;

  friend bool operator==(const HardwareConfig&, const HardwareConfig&) = default;
};

struct PeCoord {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const PeCoord&, const PeCoord&) = default;
};

// Set of permanently faulty PEs of one chip. Immutable once built; faults
// are held as a dense bitset over the row-major PE index.
class FaultMap {
 public:
  FaultMap() = default;

  // Throws ValidationError on out-of-range or duplicate coordinates.
  static FaultMap from_coords(std::string chip_id, HardwareConfig dims,
                              std::span<const PeCoord> faults,
                              std::optional<std::uint64_t> seed = std::nullopt);

  // Every PE faulty / no PE faulty.
  static FaultMap all_faulty(std::string chip_id, HardwareConfig dims);
  static FaultMap fault_free(std::string chip_id, HardwareConfig dims);

  const std::string& chip_id() const noexcept { return chip_id_; }
  const HardwareConfig& dims() const noexcept { return dims_; }
  const std::optional<std::uint64_t>& seed() const noexcept { return seed_; }

  bool is_faulty(int row, int col) const;
  bool is_faulty(PeCoord pe) const { return is_faulty(pe.row, pe.col); }
  std::size_t fault_count() const noexcept { return count_; }
  std::size_t total() const noexcept { return dims_.total(); }

  // Row-major sorted coordinates.
  std::vector<PeCoord> faults() const;

  // Number of PEs faulty in both maps. Throws DimensionMismatch.
  std::size_t overlap_count(const FaultMap& other) const;
  bool is_subset_of(const FaultMap& other) const;
  bool same_faults(const FaultMap& other) const;

  FaultMap with_chip_id(std::string chip_id) const;

  friend bool operator==(const FaultMap&, const FaultMap&) = default;

 private:
  friend FaultMap fuse(const FaultMap& a, const FaultMap& b);
  friend FaultMap generate_fault_map(const HardwareConfig&, double, std::uint64_t,
                                     std::string);

  FaultMap(std::string chip_id, HardwareConfig dims,
           std::optional<std::uint64_t> seed);
  void require_same_dims(const FaultMap& other) const;

  std::string chip_id_;
  HardwareConfig dims_{};
  std::optional<std::uint64_t> seed_;
  std::vector<std::uint64_t> bits_;
  std::size_t count_ = 0;
};

// Exactly round(target_rate * rows * cols) distinct faulty PEs, drawn
// uniformly without replacement from a generator seeded with `seed`.
FaultMap generate_fault_map(const HardwareConfig& config, double target_rate,
                            std::uint64_t seed, std::string chip_id);

// Faulty PEs over total PEs.
double fault_rate(const FaultMap& map) noexcept;

// Union of both fault sets; chip id is "<a>+<b>". Seed is dropped.
FaultMap fuse(const FaultMap& a, const FaultMap& b);

// Inclusion-exclusion: pA + pB - p_overlap.
double combined_rate(double p_a, double p_b, double p_overlap);

// Persisted as {"schema_version", "dims": [r, c], "chips": [...]}, with
// coordinates sorted row-major. `dims` is only consulted for an empty list.
void save_fault_maps(std::span<const FaultMap> maps,
                     const std::filesystem::path& path,
                     std::optional<HardwareConfig> dims = std::nullopt);
std::vector<FaultMap> load_fault_maps(const std::filesystem::path& path);

}  // namespace efat
