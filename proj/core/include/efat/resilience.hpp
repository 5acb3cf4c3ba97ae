#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "efat/faultmap.hpp"
#include "efat/tinynet.hpp"

namespace efat {

enum class Statistic { Min, Mean, Max };

std::string_view to_string(Statistic s) noexcept;
Statistic parse_statistic(std::string_view text);

// Fault rates at which resilience is measured. Starts at min(rates) and keeps
// growing by min(current * step, max_interval) while the current value is
// <= max(max(rates), max_rate); the value appended last may overshoot that
// bound. A zero start grows by max_interval instead of stalling.
std::vector<double> fault_rate_list(std::span<const double> rates, double max_rate,
                                    double max_interval, double step);

struct ResilienceRow {
  double fault_rate = 0.0;
  double epochs_min = 0.0;
  double epochs_mean = 0.0;
  double epochs_max = 0.0;
  double acc_no_retrain = 0.0;  // mean over repetitions, masked, no retraining
  bool reachable = true;        // false if any repetition exhausted e_max
  std::vector<int> rep_epochs;  // e_max stands in for unreachable repetitions

  double value(Statistic s) const noexcept;
};

// Epochs of fault-aware retraining needed to reach `constraint`, by fault rate.
struct ResilienceTable {
  double constraint = 0.0;
  int reps = 5;
  int e_max = 50;
  std::vector<ResilienceRow> rows;  // sorted by fault_rate, unique

  void validate() const;
};

struct ResilienceOptions {
  HardwareConfig hw;
  double constraint = 0.9;
  int reps = 5;
  int e_max = 50;
  std::uint64_t seed = 1;
  double learning_rate = 0.05;
  int batch_size = 32;
  int workers = 1;
};

// One job per (rate, repetition): random fault map at that rate, FAP mask,
// retrain from the pretrained weights until the constraint is met or e_max
// epochs pass. Sub-seeds depend only on (seed, rate index, repetition), so
// the table is independent of `workers`.
ResilienceTable build_resilience_table(const TinyModel& pretrained,
                                       const SyntheticDataset& data,
                                       std::span<const double> rates,
                                       const ResilienceOptions& options);

struct InterpolatedEpochs {
  double epochs = 0.0;
  bool clamped = false;  // query fell outside the table's rate range
};

// Piecewise-linear in fault rate between the two bracketing rows, clamped to
// the end rows outside the table. Returns nullopt when the bracket touches an
// unreachable row.
std::optional<InterpolatedEpochs> try_epochs_for_rate(const ResilienceTable& table,
                                                      double rate, Statistic stat);
// As above, but throws UnreachableConstraint instead of returning nullopt.
InterpolatedEpochs epochs_for_rate(const ResilienceTable& table, double rate,
                                   Statistic stat);

struct ChipBudget {
  std::string chip_id;
  double fault_rate = 0.0;
  int epochs = 0;
  bool clamped = false;
};

struct ChipPlan {
  Statistic statistic = Statistic::Max;
  std::vector<ChipBudget> chips;  // input order

  long total_epochs() const noexcept;
};

// ceil(interpolated epochs) per chip. Throws UnreachableConstraint listing
// every chip whose rate cannot be planned.
ChipPlan select_retraining_amounts(const ResilienceTable& table,
                                   std::span<const FaultMap> maps,
                                   Statistic stat = Statistic::Max);

// rate,min,mean,max,acc_no_retrain[,reachable]
std::string resilience_csv(const ResilienceTable& table);

}  // namespace efat
