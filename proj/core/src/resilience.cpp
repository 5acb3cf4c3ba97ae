#include "efat/resilience.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "efat/error.hpp"
#include "efat/parallel.hpp"
#include "efat/random.hpp"

namespace efat {

std::string_view to_string(Statistic s) noexcept {
  switch (s) {
    case Statistic::Min: return "min";
    case Statistic::Mean: return "mean";
    case Statistic::Max: return "max";
  }
  return "max";
}

Statistic parse_statistic(std::string_view text) {
  if (text == "min") return Statistic::Min;
  if (text == "mean") return Statistic::Mean;
  if (text == "max") return Statistic::Max;
  throw ValidationError("unknown statistic '" + std::string(text) +
                        "' (expected min, mean or max)");
}

std::vector<double> fault_rate_list(std::span<const double> rates, double max_rate,
                                    double max_interval, double step) {
  if (rates.empty()) throw ValidationError("fault rate list needs at least one rate");
  if (!(step > 0.0)) throw ValidationError("step ratio must be positive");
  if (!(max_interval > 0.0)) throw ValidationError("max interval must be positive");
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("fault rates must lie in [0, 1]");
  }

  const double bound = std::max(*std::max_element(rates.begin(), rates.end()), max_rate);
  double current = *std::min_element(rates.begin(), rates.end());
  std::vector<double> list{current};
  while (current <= bound) {
    const double increment =
        current > 0.0 ? std::min(current * step, max_interval) : max_interval;
    current += increment;
    list.push_back(current);
  }
  return list;
}

double ResilienceRow::value(Statistic s) const noexcept {
  switch (s) {
    case Statistic::Min: return epochs_min;
    case Statistic::Mean: return epochs_mean;
    case Statistic::Max: return epochs_max;
  }
  return epochs_max;
}

void ResilienceTable::validate() const {
  if (rows.empty()) throw ValidationError("resilience table has no rows");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (k > 0 && !(rows[k - 1].fault_rate < r.fault_rate)) {
      throw ValidationError("resilience table rates must be strictly increasing");
    }
    if (!(r.epochs_min <= r.epochs_mean && r.epochs_mean <= r.epochs_max)) {
      throw ValidationError("resilience row needs min <= mean <= max epochs");
    }
  }
}

ResilienceTable build_resilience_table(const TinyModel& pretrained,
                                       const SyntheticDataset& data,
                                       std::span<const double> rates,
                                       const ResilienceOptions& options) {
  if (options.reps < 1) throw ValidationError("repetitions must be >= 1");
  if (options.e_max < 0) throw ValidationError("e_max must be >= 0");
  options.hw.validate();

  std::vector<double> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.empty()) throw ValidationError("no fault rates to measure");

  const auto shapes = pretrained.layer_shapes();
  const auto reps = static_cast<std::size_t>(options.reps);

  struct Outcome {
    int epochs = 0;
    bool reached = false;
    double acc_no_retrain = 0.0;
  };
  std::vector<Outcome> outcomes(sorted.size() * reps);

  parallel_for(outcomes.size(), options.workers, [&](std::size_t job) {
    const std::size_t rate_idx = job / reps;
    const std::size_t rep = job % reps;
    // Fault rates above 1 (Algorithm overshoot) saturate the array.
    const double rate = std::min(sorted[rate_idx], 1.0);
    const FaultMap map = generate_fault_map(
        options.hw, rate, derive_seed(options.seed, {rate_idx, rep, 0}),
        "rate" + std::to_string(rate_idx) + "-rep" + std::to_string(rep));
    const NetworkMask mask = derive_network_mask(shapes, options.hw, map);

    TrainConfig config;
    config.learning_rate = options.learning_rate;
    config.batch_size = options.batch_size;
    config.max_epochs = options.e_max;
    config.seed = derive_seed(options.seed, {rate_idx, rep, 1});
    config.target_accuracy = options.constraint;
    const TrainResult trained = train_fat(pretrained, mask, data, config);

    Outcome& out = outcomes[job];
    out.acc_no_retrain = trained.initial_accuracy;
    out.reached = trained.epochs_to_target.has_value();
    out.epochs = out.reached ? *trained.epochs_to_target : options.e_max;
  });

  ResilienceTable table;
  table.constraint = options.constraint;
  table.reps = options.reps;
  table.e_max = options.e_max;
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    ResilienceRow row;
    row.fault_rate = sorted[r];
    double acc_sum = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const Outcome& o = outcomes[r * reps + rep];
      row.rep_epochs.push_back(o.epochs);
      row.reachable = row.reachable && o.reached;
      acc_sum += o.acc_no_retrain;
    }
    const auto [lo, hi] = std::minmax_element(row.rep_epochs.begin(), row.rep_epochs.end());
    row.epochs_min = *lo;
    row.epochs_max = *hi;
    row.epochs_mean =
        std::accumulate(row.rep_epochs.begin(), row.rep_epochs.end(), 0.0) /
        static_cast<double>(reps);
    row.acc_no_retrain = acc_sum / static_cast<double>(reps);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::optional<InterpolatedEpochs> try_epochs_for_rate(const ResilienceTable& table,
                                                      double rate, Statistic stat) {
  const auto& rows = table.rows;
  if (rows.empty()) throw ValidationError("resilience table has no rows");

  const auto single = [&](const ResilienceRow& row,
                          bool clamped) -> std::optional<InterpolatedEpochs> {
    if (!row.reachable) return std::nullopt;
    return InterpolatedEpochs{row.value(stat), clamped};
  };

  if (rate <= rows.front().fault_rate) {
    return single(rows.front(), rate < rows.front().fault_rate);
  }
  if (rate >= rows.back().fault_rate) {
    return single(rows.back(), rate > rows.back().fault_rate);
  }
  // First row with fault_rate >= rate; rows.front() < rate < rows.back().
  const auto upper = std::lower_bound(
      rows.begin(), rows.end(), rate,
      [](const ResilienceRow& row, double r) { return row.fault_rate < r; });
  if (upper->fault_rate == rate) return single(*upper, false);
  const auto& hi = *upper;
  const auto& lo = *(upper - 1);
  if (!lo.reachable || !hi.reachable) return std::nullopt;
  const double t = (rate - lo.fault_rate) / (hi.fault_rate - lo.fault_rate);
  const double a = lo.value(stat);
  const double b = hi.value(stat);
  return InterpolatedEpochs{a + t * (b - a), false};
}

InterpolatedEpochs epochs_for_rate(const ResilienceTable& table, double rate,
                                   Statistic stat) {
  auto value = try_epochs_for_rate(table, rate, stat);
  if (!value) {
    std::ostringstream msg;
    msg << "fault rate " << rate
        << " falls in a table bracket where the accuracy constraint was not reached";
    throw UnreachableConstraint(msg.str());
  }
  return *value;
}

long ChipPlan::total_epochs() const noexcept {
  long total = 0;
  for (const auto& c : chips) total += c.epochs;
  return total;
}

ChipPlan select_retraining_amounts(const ResilienceTable& table,
                                   std::span<const FaultMap> maps, Statistic stat) {
  ChipPlan plan;
  plan.statistic = stat;
  std::vector<std::string> unreachable;
  for (const auto& map : maps) {
    const double rate = fault_rate(map);
    const auto value = try_epochs_for_rate(table, rate, stat);
    if (!value) {
      unreachable.push_back(map.chip_id());
      continue;
    }
    plan.chips.push_back({map.chip_id(), rate,
                          static_cast<int>(std::ceil(value->epochs)), value->clamped});
  }
  if (!unreachable.empty()) {
    std::string ids;
    for (const auto& id : unreachable) ids += (ids.empty() ? "" : ", ") + id;
    throw UnreachableConstraint("no retraining amount can meet the constraint for chips: " + ids,
                                std::move(unreachable));
  }
  return plan;
}

std::string resilience_csv(const ResilienceTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "rate,min,mean,max,acc_no_retrain,reachable\n";
  for (const auto& r : table.rows) {
    out << r.fault_rate << ',' << r.epochs_min << ',' << r.epochs_mean << ','
        << r.epochs_max << ',' << r.acc_no_retrain << ','
        << (r.reachable ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace efat
