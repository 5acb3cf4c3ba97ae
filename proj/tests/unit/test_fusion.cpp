#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "efat/error.hpp"
#include "efat/fusion.hpp"
#include "efat/random.hpp"
#include "support/overlap_maps.hpp"
#include "support/synthetic_table.hpp"

using namespace efat;
using oracle::exponential_table;
using oracle::exponential_table_cost;
using oracle::perturbed_map;

namespace {

const HardwareConfig k16{16, 16};

FusionOptions opts(std::uint64_t seed = 1, int m = 5, int k = 1) {
  FusionOptions o;
  o.seed = seed;
  o.comparisons = m;
  o.iterations = k;
  return o;
}

double oracle_cost(const FaultMap& m) { return exponential_table_cost(fault_rate(m)); }

// Independent maps mixed with families of heavily overlapping ones.
std::vector<FaultMap> mixed_population(std::uint64_t seed, int n = 50) {
  Rng rng(seed);
  std::vector<FaultMap> maps;
  while (static_cast<int>(maps.size()) < n) {
    const double rate = std::clamp(rng.normal(0.1, 0.02), 0.001, 1.0);
    auto base = generate_fault_map(k16, rate, rng.next(), "c" + std::to_string(maps.size()));
    maps.push_back(base);
    const int family = static_cast<int>(rng.index(3));
    for (int f = 0; f < family && static_cast<int>(maps.size()) < n; ++f) {
      const auto shared = static_cast<std::size_t>(base.fault_count() * rng.uniform(0.6, 1.0));
      maps.push_back(perturbed_map(base, shared, rng.next(), "c" + std::to_string(maps.size())));
    }
  }
  return maps;
}

void expect_invariants(std::span<const FaultMap> maps, const ResilienceTable& table,
                       const FusionResult& r) {
  ASSERT_EQ(r.merged.size(), r.links.size());
  ASSERT_EQ(r.merged.size(), r.budgets.size());
  // Partition of 0..n-1.
  std::set<std::size_t> seen;
  std::size_t count = 0;
  for (const auto& g : r.links) {
    EXPECT_FALSE(g.empty());
    for (auto id : g) {
      seen.insert(id);
      ++count;
    }
  }
  EXPECT_EQ(count, maps.size());
  EXPECT_EQ(seen.size(), maps.size());
  if (!seen.empty()) EXPECT_EQ(*seen.rbegin(), maps.size() - 1);
  // Merged map is the member union.
  for (std::size_t g = 0; g < r.merged.size(); ++g) {
    FaultMap u = maps[r.links[g].front()];
    for (auto id : r.links[g]) u = fuse(u, maps[id]);
    EXPECT_TRUE(r.merged[g].same_faults(u)) << "group " << g;
  }
  // Sorted by rate.
  for (std::size_t g = 1; g < r.merged.size(); ++g)
    EXPECT_LE(r.merged[g - 1].fault_count(), r.merged[g].fault_count());
  // Real-valued cost never grows; integer totals within #groups of it.
  double before = 0, after = 0;
  for (const auto& m : maps) before += epochs_for_rate(table, fault_rate(m), Statistic::Max).epochs;
  for (const auto& m : r.merged) after += epochs_for_rate(table, fault_rate(m), Statistic::Max).epochs;
  EXPECT_LE(after, before + 1e-9);
  EXPECT_LE(static_cast<double>(r.total_epochs()),
            after + static_cast<double>(r.group_count()));
}

}  // namespace

TEST(RelativeSaving, IdenticalMapsSaveOneCost) {
  auto t = exponential_table();
  auto a = generate_fault_map(k16, 0.1, 1, "a");
  EXPECT_NEAR(relative_saving(a, a, t, Statistic::Max), oracle_cost(a), 1e-9);
}

TEST(RelativeSaving, DisjointMapsOnConvexCurveNeverSave) {
  auto t = exponential_table();
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = generate_fault_map(k16, rng.uniform(0.0, 0.4), rng.next(), "a");
    auto b = perturbed_map(a, 0, rng.next(), "b");
    ASSERT_EQ(a.overlap_count(b), 0u);
    const double oracle = oracle_cost(a) + oracle_cost(b) - oracle_cost(fuse(a, b));
    EXPECT_LE(oracle, 1e-9);
    EXPECT_LE(relative_saving(a, b, t, Statistic::Max), 1e-9);
  }
}

TEST(RelativeSaving, OverlapSweepHasOneSignChange) {
  auto t = exponential_table();
  auto a = generate_fault_map(k16, 0.1, 4, "a");
  const std::size_t n = a.fault_count();
  int changes = 0;
  double prev = 0;
  std::size_t break_even = n + 1;
  for (std::size_t shared = 0; shared <= n; ++shared) {
    auto b = perturbed_map(a, shared, 100 + shared, "b");
    const double oracle = oracle_cost(a) + oracle_cost(b) - oracle_cost(fuse(a, b));
    const double got = relative_saving(a, b, t, Statistic::Max);
    EXPECT_NEAR(got, oracle, 1e-9);
    if (shared > 0 && (prev > 0) != (got > 0)) ++changes;
    if (got > 0 && break_even > n) break_even = shared;
    prev = got;
  }
  EXPECT_EQ(changes, 1);
  // Every overlap beyond the break-even point saves.
  for (std::size_t shared = break_even; shared <= n; ++shared)
    EXPECT_GT(relative_saving(a, perturbed_map(a, shared, 7 + shared, "b"), t, Statistic::Max), 0.0);
  EXPECT_LT(static_cast<double>(break_even), 0.8 * n);
}

TEST(RelativeSaving, UnreachableFusedRateIsMinusInfinity) {
  ResilienceTable t = exponential_table(20.0, 1.0, 1.0, 11);
  for (auto& r : t.rows)
    if (r.fault_rate > 0.25) r.reachable = false;
  auto a = generate_fault_map(k16, 0.15, 1, "a");
  auto b = perturbed_map(a, 0, 2, "b");
  EXPECT_EQ(relative_saving(a, b, t, Statistic::Max), -INFINITY);
  auto c = generate_fault_map(k16, 0.5, 3, "c");
  EXPECT_THROW(relative_saving(a, c, t, Statistic::Max), UnreachableConstraint);
}

TEST(RelativeSaving, FusedRateAboveTableIsMinusInfinity) {
  ResilienceTable t = exponential_table(1.0, 1.0, 0.2, 21);
  auto a = generate_fault_map(k16, 0.15, 1, "a");
  auto b = perturbed_map(a, a.fault_count() / 2, 2, "b");
  ASSERT_GT(fault_rate(fuse(a, b)), 0.2);
  EXPECT_EQ(relative_saving(a, b, t, Statistic::Max), -INFINITY);
}

TEST(GroupAndFuse, SingleMapUnchanged) {
  auto t = exponential_table();
  std::vector<FaultMap> maps{generate_fault_map(k16, 0.1, 1, "only")};
  auto r = group_and_fuse(maps, t, opts());
  ASSERT_EQ(r.group_count(), 1u);
  EXPECT_EQ(r.links, (std::vector<std::vector<std::size_t>>{{0}}));
  EXPECT_TRUE(r.merged[0].same_faults(maps[0]));
  EXPECT_EQ(r.budgets[0], static_cast<int>(std::ceil(oracle_cost(maps[0]))));
}

TEST(GroupAndFuse, EmptyPopulation) {
  auto r = group_and_fuse({}, exponential_table(), opts());
  EXPECT_EQ(r.group_count(), 0u);
}

TEST(GroupAndFuse, TwoIdenticalMapsMerge) {
  auto t = exponential_table();
  auto a = generate_fault_map(k16, 0.1, 1, "a");
  std::vector<FaultMap> maps{a, a.with_chip_id("b")};
  auto r = group_and_fuse(maps, t, opts());
  ASSERT_EQ(r.group_count(), 1u);
  EXPECT_EQ(r.links[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.budgets[0], static_cast<int>(std::ceil(oracle_cost(a))));
}

TEST(GroupAndFuse, IndependentMapsNeverMerge) {
  auto t = exponential_table();
  for (std::uint64_t s = 0; s < 5; ++s) {
    std::vector<FaultMap> maps;
    for (int k = 0; k < 50; ++k)
      maps.push_back(generate_fault_map(k16, 0.1, derive_seed(s, {std::uint64_t(k)}),
                                        "c" + std::to_string(k)));
    auto r = group_and_fuse(maps, t, opts(s));
    EXPECT_EQ(r.group_count(), 50u);
  }
}

TEST(GroupAndFuse, InvariantsOnMixedPopulations) {
  auto t = exponential_table();
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto maps = mixed_population(s);
    auto r = group_and_fuse(maps, t, opts(s));
    EXPECT_LT(r.group_count(), maps.size());
    expect_invariants(maps, t, r);
  }
}

TEST(GroupAndFuse, MinSavingRuleKeepsInvariants) {
  auto t = exponential_table();
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto maps = mixed_population(s);
    auto o = opts(s);
    o.rule = CandidateRule::MinSaving;
    expect_invariants(maps, t, group_and_fuse(maps, t, o));
  }
}

TEST(GroupAndFuse, MinSavingNeedsEveryCandidateToSave) {
  // One partner overlaps fully, the other not at all: the least-fused-rate
  // rule merges with the first, the literal rule sees the negative saving.
  auto t = exponential_table();
  auto a = generate_fault_map(k16, 0.1, 1, "a");
  std::vector<FaultMap> maps{a, a.with_chip_id("twin"), perturbed_map(a, 0, 5, "stranger")};
  auto o = opts(1, 5, 1);
  auto prose = group_and_fuse(maps, t, o);
  EXPECT_EQ(prose.group_count(), 2u);
  o.rule = CandidateRule::MinSaving;
  auto literal = group_and_fuse(maps, t, o);
  EXPECT_EQ(literal.group_count(), 3u);
}

TEST(GroupAndFuse, Deterministic) {
  auto t = exponential_table();
  auto maps = mixed_population(3);
  auto a = group_and_fuse(maps, t, opts(9));
  auto b = group_and_fuse(maps, t, opts(9));
  EXPECT_EQ(a.links, b.links);
  EXPECT_EQ(a.budgets, b.budgets);
  EXPECT_EQ(a.merged, b.merged);
}

TEST(GroupAndFuse, UnreachableMapsAreLeftAlone) {
  ResilienceTable t = exponential_table(20.0, 1.0, 1.0, 101);
  for (auto& r : t.rows)
    if (r.fault_rate > 0.3) {
      r.reachable = false;
      r.epochs_max = t.e_max;
    }
  auto hot = generate_fault_map(k16, 0.5, 1, "hot");
  std::vector<FaultMap> maps{hot, hot.with_chip_id("hot2"), generate_fault_map(k16, 0.1, 2, "ok")};
  auto r = group_and_fuse(maps, t, opts());
  ASSERT_EQ(r.group_count(), 3u);
  EXPECT_TRUE(r.reachable[0]);
  EXPECT_FALSE(r.reachable[1]);
  EXPECT_EQ(r.budgets[1], t.e_max);
  EXPECT_THROW(plan_with_fusion(maps, t, opts()), UnreachableConstraint);
}

TEST(GroupAndFuse, RejectsMixedDims) {
  std::vector<FaultMap> maps{FaultMap::fault_free("a", k16), FaultMap::fault_free("b", {8, 8})};
  EXPECT_THROW(group_and_fuse(maps, exponential_table(), opts()), DimensionMismatch);
}

TEST(GroupAndFuse, RejectsBadOptions) {
  std::vector<FaultMap> maps{FaultMap::fault_free("a", k16)};
  EXPECT_THROW(group_and_fuse(maps, exponential_table(), opts(1, 0, 1)), ValidationError);
  EXPECT_THROW(group_and_fuse(maps, exponential_table(), opts(1, 1, 0)), ValidationError);
}

TEST(PlanWithFusion, NoMergesEqualsChipPlan) {
  auto t = exponential_table();
  std::vector<FaultMap> maps;
  for (int k = 0; k < 20; ++k)
    maps.push_back(generate_fault_map(k16, 0.08 + 0.002 * k, k, "c" + std::to_string(k)));
  auto plan = plan_with_fusion(maps, t, opts());
  ASSERT_EQ(plan.fusion.group_count(), maps.size());
  EXPECT_EQ(plan.total_epochs, select_retraining_amounts(t, maps).total_epochs());
}

TEST(PlanWithFusion, ForcedOverlapPairsSave) {
  auto t = exponential_table();
  std::vector<FaultMap> maps;
  Rng rng(6);
  for (int k = 0; k < 10; ++k) {
    auto base = generate_fault_map(k16, 0.1, rng.next(), "b" + std::to_string(k));
    const auto shared = static_cast<std::size_t>(std::ceil(0.8 * base.fault_count()));
    maps.push_back(base);
    maps.push_back(perturbed_map(base, shared, rng.next(), "p" + std::to_string(k)));
  }
  auto plan = plan_with_fusion(maps, t, opts());
  EXPECT_LT(plan.total_epochs, select_retraining_amounts(t, maps).total_epochs());
  EXPECT_LT(plan.fusion.group_count(), maps.size());
}

TEST(PlanWithFusion, MoreSweepsNeverCostMore) {
  auto t = exponential_table();
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto maps = mixed_population(s);
    auto one = plan_with_fusion(maps, t, opts(s, 5, 1));
    auto two = plan_with_fusion(maps, t, opts(s, 5, 2));
    EXPECT_LE(two.estimated_cost, one.estimated_cost + 1e-9);
    EXPECT_LE(two.total_epochs, one.total_epochs);
  }
}
