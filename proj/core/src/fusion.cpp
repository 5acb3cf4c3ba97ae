#include "efat/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "efat/error.hpp"
#include "efat/random.hpp"

namespace efat {

namespace {

std::optional<double> cost_of(const FaultMap& map, const ResilienceTable& table,
                              Statistic stat) {
  auto v = try_epochs_for_rate(table, fault_rate(map), stat);
  if (!v) return std::nullopt;
  return v->epochs;
}

// Cost of a candidate fused map. Beyond the last measured rate the table
// carries no evidence, and the clamped value would under-budget a growing
// curve, so such a merge is treated like an unreachable one.
std::optional<double> fused_cost_of(const FaultMap& fused, const ResilienceTable& table,
                                    Statistic stat) {
  if (fault_rate(fused) > table.rows.back().fault_rate) return std::nullopt;
  return cost_of(fused, table, stat);
}

struct Entry {
  FaultMap map;
  std::vector<std::size_t> members;  // sorted original indices
  std::optional<double> cost;
};

bool rate_less(const Entry& a, const Entry& b) {
  if (a.map.fault_count() != b.map.fault_count()) {
    return a.map.fault_count() < b.map.fault_count();
  }
  return a.members.front() < b.members.front();
}

}  // namespace

void FusionOptions::validate() const {
  if (comparisons < 1) throw ValidationError("comparisons per map (M) must be >= 1");
  if (iterations < 1) throw ValidationError("iterations (K) must be >= 1");
}

long FusionResult::total_epochs() const noexcept {
  return std::accumulate(budgets.begin(), budgets.end(), 0L);
}

double relative_saving(const FaultMap& a, const FaultMap& b,
                       const ResilienceTable& table, Statistic stat) {
  const double cost_a = epochs_for_rate(table, fault_rate(a), stat).epochs;
  const double cost_b = epochs_for_rate(table, fault_rate(b), stat).epochs;
  if (table.rows.empty()) throw ValidationError("resilience table has no rows");
  const auto fused = fused_cost_of(fuse(a, b), table, stat);
  if (!fused) return -std::numeric_limits<double>::infinity();
  return cost_a + cost_b - *fused;
}

FusionResult group_and_fuse(std::span<const FaultMap> maps,
                            const ResilienceTable& table,
                            const FusionOptions& options) {
  options.validate();
  if (table.rows.empty()) throw ValidationError("resilience table has no rows");
  for (std::size_t k = 1; k < maps.size(); ++k) {
    if (maps[k].dims() != maps[0].dims()) {
      throw DimensionMismatch("fault map '" + maps[k].chip_id() +
                              "' does not share the population's array dims");
    }
  }

  std::vector<Entry> list;
  list.reserve(maps.size());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    list.push_back({maps[k], {k}, cost_of(maps[k], table, options.statistic)});
  }
  std::stable_sort(list.begin(), list.end(), rate_less);

  Rng rng(options.seed);
  const auto m = static_cast<std::size_t>(options.comparisons);
  std::vector<std::size_t> pool;

  for (int sweep = 0; sweep < options.iterations; ++sweep) {
    std::size_t i = 0;
    while (i + 1 < list.size()) {
      // Sample up to M distinct partners from positions after i.
      pool.resize(list.size() - i - 1);
      std::iota(pool.begin(), pool.end(), i + 1);
      const std::size_t take = std::min(m, pool.size());
      for (std::size_t s = 0; s < take; ++s) {
        std::swap(pool[s], pool[s + rng.index(pool.size() - s)]);
      }
      pool.resize(take);

      const Entry& current = list[i];
      std::optional<std::size_t> pick;
      std::optional<FaultMap> pick_fused;
      double pick_saving = 0.0;
      std::size_t pick_fused_count = 0;
      const double neg_inf = -std::numeric_limits<double>::infinity();

      for (std::size_t cand : pool) {
        const Entry& other = list[cand];
        FaultMap fused = fuse(current.map, other.map);
        double saving = neg_inf;
        if (current.cost && other.cost) {
          if (auto fc = fused_cost_of(fused, table, options.statistic)) {
            saving = *current.cost + *other.cost - *fc;
          }
        }
        bool better = false;
        if (!pick) {
          better = true;
        } else if (options.rule == CandidateRule::LeastFusedRate) {
          better = fused.fault_count() < pick_fused_count ||
                   (fused.fault_count() == pick_fused_count &&
                    other.members.front() < list[*pick].members.front());
        } else {
          better = saving < pick_saving ||
                   (saving == pick_saving &&
                    other.members.front() < list[*pick].members.front());
        }
        if (better) {
          pick = cand;
          pick_saving = saving;
          pick_fused_count = fused.fault_count();
          pick_fused = std::move(fused);
        }
      }

      ++i;
      if (pick && pick_saving > 0.0) {
        Entry merged;
        merged.members = list[i - 1].members;
        merged.members.insert(merged.members.end(), list[*pick].members.begin(),
                              list[*pick].members.end());
        std::sort(merged.members.begin(), merged.members.end());
        merged.map = std::move(*pick_fused);
        merged.cost = cost_of(merged.map, table, options.statistic);

        // *pick > i - 1, so erase the later position first.
        list.erase(list.begin() + static_cast<std::ptrdiff_t>(*pick));
        list.erase(list.begin() + static_cast<std::ptrdiff_t>(i - 1));
        const auto where = std::upper_bound(list.begin(), list.end(), merged, rate_less);
        list.insert(where, std::move(merged));
        --i;
      }
    }
  }

  FusionResult result;
  for (auto& e : list) {
    const auto value = try_epochs_for_rate(table, fault_rate(e.map), options.statistic);
    result.budgets.push_back(value ? static_cast<int>(std::ceil(value->epochs))
                                   : table.e_max);
    result.reachable.push_back(value.has_value());
    result.links.push_back(std::move(e.members));
    result.merged.push_back(std::move(e.map));
  }
  return result;
}

FusionPlan plan_with_fusion(std::span<const FaultMap> maps,
                            const ResilienceTable& table,
                            const FusionOptions& options) {
  FusionPlan plan;
  plan.fusion = group_and_fuse(maps, table, options);
  for (std::size_t g = 0; g < plan.fusion.group_count(); ++g) {
    const auto& map = plan.fusion.merged[g];
    plan.estimated_cost += epochs_for_rate(table, fault_rate(map), options.statistic).epochs;
  }
  plan.total_epochs = plan.fusion.total_epochs();
  return plan;
}

}  // namespace efat
