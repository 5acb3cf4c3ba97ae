#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "efat/faultmap.hpp"
#include "efat/resilience.hpp"

namespace efat {

// How the partner for a fault map is picked among the sampled candidates.
enum class CandidateRule {
  // Candidate whose fused map has the lowest fault rate; merge if its saving
  // is positive. Default.
  LeastFusedRate,
  // Literal reading: candidate with the smallest saving, merged if that
  // saving is positive (i.e. only when every candidate saves).
  MinSaving,
};

struct FusionOptions {
  int comparisons = 5;  // M: candidates sampled per fault map
  int iterations = 1;   // K: sweeps over the list
  std::uint64_t seed = 1;
  Statistic statistic = Statistic::Max;
  CandidateRule rule = CandidateRule::LeastFusedRate;

  void validate() const;
};

struct FusionResult {
  std::vector<FaultMap> merged;            // sorted by ascending fault rate
  std::vector<std::vector<std::size_t>> links;  // original indices per merged map
  std::vector<int> budgets;                // ceil(interpolated epochs) per group
  std::vector<bool> reachable;             // false: budget is e_max, best effort

  std::size_t group_count() const noexcept { return merged.size(); }
  long total_epochs() const noexcept;
};

// cost(a) + cost(b) - cost(a U b), cost = interpolated epochs at the map's
// fault rate. -infinity when the fused rate is unreachable or above the
// table's last row; throws UnreachableConstraint if a or b alone is.
double relative_saving(const FaultMap& a, const FaultMap& b,
                       const ResilienceTable& table, Statistic stat);

// Greedy resilience-driven grouping: sort by fault rate, then for each map
// sample up to M partners from later positions, pick one by `rule`, and fuse
// when the estimated retraining saving is positive. Maps whose own rate is
// unreachable are never merged.
FusionResult group_and_fuse(std::span<const FaultMap> maps,
                            const ResilienceTable& table,
                            const FusionOptions& options);

struct FusionPlan {
  FusionResult fusion;
  long total_epochs = 0;        // sum of integer group budgets
  double estimated_cost = 0.0;  // sum of real-valued group costs
};

// group_and_fuse plus budget totals; throws UnreachableConstraint when any
// group has no reachable budget.
FusionPlan plan_with_fusion(std::span<const FaultMap> maps,
                            const ResilienceTable& table,
                            const FusionOptions& options);

}  // namespace efat
