#include "efat/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "efat/error.hpp"
#include "efat/parallel.hpp"
#include "efat/random.hpp"

namespace efat {

namespace {

// Sub-seed tags of the master seed, one per pipeline stage.
enum SeedTag : std::uint64_t {
  kDatasetSeed = 1,
  kPretrainSeed = 2,
  kPopulationRates = 3,
  kPopulationMaps = 4,
  kResilienceSeed = 5,
  kFusionSeed = 6,
  kEfatTraining = 7,
  kIndividualTraining = 8,
  kPairing = 9,
  kPairTraining = 10,
};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  hardware.validate();
  if (population.chips < 1) throw ValidationError("chip count must be positive");
  if (!(population.sigma >= 0.0)) throw ValidationError("sigma must be non-negative");
  if (!(population.min_rate >= 0.0 && population.min_rate <= population.max_rate &&
        population.max_rate <= 1.0)) {
    throw ValidationError("population rate bounds must satisfy 0 <= min <= max <= 1");
  }
  experiment_dataset_spec(*this).validate();
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden layer widths must be positive");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (pretrain_epochs < 0) throw ValidationError("pretrain epochs must be >= 0");
  if (constraint && !(*constraint > 0.0 && *constraint < 1.0)) {
    throw ValidationError("accuracy constraint must lie in (0, 1)");
  }
  if (!(constraint_margin >= 0.0)) throw ValidationError("constraint margin must be >= 0");
  if (!(max_interval > 0.0) || !(step > 0.0)) {
    throw ValidationError("fault-rate list interval and step must be positive");
  }
  if (comparisons < 1 || iterations < 1) {
    throw ValidationError("fusion comparisons and iterations must be positive");
  }
  if (reps < 1) throw ValidationError("repetitions must be positive");
  if (e_max < 0) throw ValidationError("e_max must be >= 0");
  for (int b : baseline_budgets) {
    if (b < 0) throw ValidationError("baseline budgets must be >= 0");
  }
  if (workers < 1) throw ValidationError("workers must be positive");
}

ExperimentConfig ExperimentConfig::toy() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.hardware = {256, 256};
  c.population.chips = 100;
  c.features = 256;
  c.hidden = {256, 256};
  c.samples = 4000;
  return c;
}

DatasetSpec experiment_dataset_spec(const ExperimentConfig& config) {
  return {config.dataset_kind, config.samples, config.features, config.classes,
          config.noise, derive_seed(config.seed, {kDatasetSeed})};
}

ModelSpec experiment_model_spec(const ExperimentConfig& config) {
  return {config.features, config.hidden, config.classes};
}

SyntheticDataset experiment_dataset(const ExperimentConfig& config) {
  return make_dataset(experiment_dataset_spec(config));
}

std::vector<FaultMap> generate_population(const ExperimentConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, {kPopulationRates}));
  std::vector<FaultMap> maps;
  maps.reserve(static_cast<std::size_t>(config.population.chips));
  for (int i = 0; i < config.population.chips; ++i) {
    const double rate =
        std::clamp(rng.normal(config.population.mean, config.population.sigma),
                   config.population.min_rate, config.population.max_rate);
    char id[32];
    std::snprintf(id, sizeof id, "chip%03d", i);
    maps.push_back(generate_fault_map(
        config.hardware, rate,
        derive_seed(config.seed, {kPopulationMaps, static_cast<std::uint64_t>(i)}), id));
  }
  return maps;
}

PretrainResult pretrain_model(const ExperimentConfig& config, const SyntheticDataset& data) {
  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.batch_size = config.batch_size;
  tc.max_epochs = config.pretrain_epochs;
  tc.seed = derive_seed(config.seed, {kPretrainSeed});
  return pretrain(experiment_model_spec(config), data, tc);
}

double resolve_constraint(const ExperimentConfig& config, double baseline_accuracy) {
  const double c = config.constraint.value_or(baseline_accuracy - config.constraint_margin);
  if (!(c > 0.0 && c < 1.0)) {
    throw ValidationError("resolved accuracy constraint " + std::to_string(c) +
                          " is outside (0, 1)");
  }
  return c;
}

ResilienceTable build_table(const ExperimentConfig& config, const TinyModel& pretrained,
                            const SyntheticDataset& data, std::span<const FaultMap> maps,
                            double constraint) {
  if (maps.empty()) throw ValidationError("no fault maps to build a table for");
  std::vector<double> rates;
  rates.reserve(maps.size());
  for (const auto& m : maps) rates.push_back(fault_rate(m));
  const auto lfr =
      fault_rate_list(rates, config.max_fault_rate, config.max_interval, config.step);

  ResilienceOptions opts;
  opts.hw = config.hardware;
  opts.constraint = constraint;
  opts.reps = config.reps;
  opts.e_max = config.e_max;
  opts.seed = derive_seed(config.seed, {kResilienceSeed});
  opts.learning_rate = config.learning_rate;
  opts.batch_size = config.batch_size;
  opts.workers = config.workers;
  return build_resilience_table(pretrained, data, lfr, opts);
}

ChipPlan plan_chips(const ExperimentConfig& config, const ResilienceTable& table,
                    std::span<const FaultMap> maps) {
  ChipPlan plan;
  plan.statistic = config.statistic;
  for (const auto& m : maps) {
    const double rate = fault_rate(m);
    const auto v = try_epochs_for_rate(table, rate, config.statistic);
    plan.chips.push_back({m.chip_id(), rate,
                          v ? static_cast<int>(std::ceil(v->epochs)) : table.e_max,
                          v ? v->clamped : false});
  }
  return plan;
}

FusionResult plan_groups(const ExperimentConfig& config, const ResilienceTable& table,
                         std::span<const FaultMap> maps) {
  FusionOptions opts;
  opts.comparisons = config.comparisons;
  opts.iterations = config.iterations;
  opts.seed = derive_seed(config.seed, {kFusionSeed});
  opts.statistic = config.statistic;
  opts.rule = config.rule;
  return group_and_fuse(maps, table, opts);
}

long Report::total_executed() const {
  std::map<int, int> per_group;
  for (const auto& c : chips) per_group[c.group] = c.executed;
  long total = 0;
  for (const auto& [g, e] : per_group) total += e;
  return total;
}

long Report::total_budgeted() const {
  std::map<int, int> per_group;
  for (const auto& c : chips) per_group[c.group] = c.budget;
  long total = 0;
  for (const auto& [g, b] : per_group) total += b;
  return total;
}

double Report::met_fraction() const {
  if (chips.empty()) return 0.0;
  const auto met = std::count_if(chips.begin(), chips.end(),
                                 [](const ChipOutcome& c) { return c.met; });
  return static_cast<double>(met) / static_cast<double>(chips.size());
}

std::size_t Report::group_count() const {
  std::map<int, int> groups;
  for (const auto& c : chips) groups[c.group] = 0;
  return groups.size();
}

Report execute_groups(const GroupSchedule& schedule, std::span<const FaultMap> maps,
                      const TinyModel& pretrained, const SyntheticDataset& data,
                      const ExperimentConfig& config, double constraint,
                      const ExecutionOptions& options,
                      std::vector<TinyModel>* group_models) {
  const std::size_t groups = schedule.merged.size();
  if (schedule.members.size() != groups || schedule.budgets.size() != groups) {
    throw ValidationError("group schedule fields are not index-aligned");
  }
  std::vector<int> owner(maps.size(), -1);
  for (std::size_t g = 0; g < groups; ++g) {
    for (auto idx : schedule.members[g]) {
      if (idx >= maps.size() || owner[idx] != -1) {
        throw ValidationError("group schedule is not a partition of the chips");
      }
      owner[idx] = static_cast<int>(g);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw ValidationError("group schedule leaves chips unassigned");
  }

  const auto shapes = pretrained.layer_shapes();
  std::vector<TrainResult> runs(groups);
  parallel_for(groups, options.workers, [&](std::size_t g) {
    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.batch_size = config.batch_size;
    tc.max_epochs = schedule.budgets[g];
    tc.seed = derive_seed(options.seed, {static_cast<std::uint64_t>(g)});
    if (options.early_stop) tc.target_accuracy = constraint;
    runs[g] = train_fat(pretrained,
                        derive_network_mask(shapes, config.hardware, schedule.merged[g]),
                        data, tc);
  });

  Report report;
  report.strategy = options.strategy;
  report.constraint = constraint;
  report.chips.resize(maps.size());
  parallel_for(maps.size(), options.workers, [&](std::size_t i) {
    const auto g = static_cast<std::size_t>(owner[i]);
    const double acc = evaluate(
        runs[g].model, derive_network_mask(shapes, config.hardware, maps[i]), data.test);
    report.chips[i] = {maps[i].chip_id(), fault_rate(maps[i]), owner[i],
                       schedule.budgets[g], runs[g].epochs_run(), acc, acc >= constraint};
  });

  if (group_models) {
    group_models->clear();
    for (auto& r : runs) group_models->push_back(std::move(r.model));
  }
  return report;
}

Report train_groups(const ExperimentConfig& config, const TinyModel& pretrained,
                    const SyntheticDataset& data, std::span<const FaultMap> maps,
                    const FusionResult& fusion, double constraint,
                    std::vector<TinyModel>* group_models) {
  GroupSchedule schedule{fusion.merged, fusion.links, fusion.budgets};
  ExecutionOptions opts{"efat-" + std::string(to_string(config.statistic)), true,
                        derive_seed(config.seed, {kEfatTraining}), config.workers};
  return execute_groups(schedule, maps, pretrained, data, config, constraint, opts,
                        group_models);
}

ExperimentContext prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentContext ctx;
  ctx.data = experiment_dataset(config);
  ctx.pretrained = pretrain_model(config, ctx.data);
  ctx.maps = generate_population(config);
  ctx.constraint = resolve_constraint(config, ctx.pretrained.baseline_accuracy);
  return ctx;
}

EfatRun run_efat(const ExperimentConfig& config, const ExperimentContext& context) {
  EfatRun run;
  run.table = build_table(config, context.pretrained.model, context.data, context.maps,
                          context.constraint);
  run.chip_plan = plan_chips(config, run.table, context.maps);
  run.fusion = plan_groups(config, run.table, context.maps);
  run.report = train_groups(config, context.pretrained.model, context.data, context.maps,
                            run.fusion, context.constraint);
  return run;
}

Report run_efat(const ExperimentConfig& config) {
  return run_efat(config, prepare_experiment(config)).report;
}

Report run_baseline_individual(const ExperimentConfig& config,
                               const ExperimentContext& context, int epochs_per_chip) {
  if (epochs_per_chip < 0) throw ValidationError("epochs per chip must be >= 0");
  GroupSchedule schedule;
  for (std::size_t i = 0; i < context.maps.size(); ++i) {
    schedule.merged.push_back(context.maps[i]);
    schedule.members.push_back({i});
    schedule.budgets.push_back(epochs_per_chip);
  }
  ExecutionOptions opts{"individual@" + std::to_string(epochs_per_chip), false,
                        derive_seed(config.seed, {kIndividualTraining}), config.workers};
  return execute_groups(schedule, context.maps, context.pretrained.model, context.data,
                        config, context.constraint, opts);
}

Report run_baseline_individual(const ExperimentConfig& config, int epochs_per_chip) {
  return run_baseline_individual(config, prepare_experiment(config), epochs_per_chip);
}

Report run_baseline_random_pairs(const ExperimentConfig& config,
                                 const ExperimentContext& context, int epochs_per_group) {
  if (epochs_per_group < 0) throw ValidationError("epochs per group must be >= 0");
  const auto& maps = context.maps;
  std::vector<std::size_t> order(maps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(config.seed, {kPairing}));
  rng.shuffle(order.begin(), order.end());

  GroupSchedule schedule;
  for (std::size_t k = 0; k < order.size(); k += 2) {
    if (k + 1 < order.size()) {
      const auto a = order[k];
      const auto b = order[k + 1];
      schedule.merged.push_back(fuse(maps[a], maps[b]));
      schedule.members.push_back({std::min(a, b), std::max(a, b)});
    } else {
      schedule.merged.push_back(maps[order[k]]);
      schedule.members.push_back({order[k]});
    }
    schedule.budgets.push_back(epochs_per_group);
  }
  ExecutionOptions opts{"random-pairs@" + std::to_string(epochs_per_group), false,
                        derive_seed(config.seed, {kPairTraining}), config.workers};
  return execute_groups(schedule, maps, context.pretrained.model, context.data, config,
                        context.constraint, opts);
}

Report run_baseline_random_pairs(const ExperimentConfig& config, int epochs_per_group) {
  return run_baseline_random_pairs(config, prepare_experiment(config), epochs_per_group);
}

std::string report_csv(const Report& report) {
  std::string out = "# schema_version=1 strategy=" + report.strategy +
                    " constraint=" + format_number(report.constraint) + "\n";
  out += "chip_id,rate,group,budget,executed,accuracy,met\n";
  for (const auto& c : report.chips) {
    out += c.chip_id + ',' + format_number(c.rate) + ',' + std::to_string(c.group) + ',' +
           std::to_string(c.budget) + ',' + std::to_string(c.executed) + ',' +
           format_number(c.accuracy) + ',' + (c.met ? "1" : "0") + '\n';
  }
  return out;
}

Report parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Report report;
  if (!std::getline(in, line) || line.rfind("# schema_version=", 0) != 0) {
    throw FormatError("report CSV: missing '# schema_version=' line");
  }
  std::istringstream meta(line.substr(2));
  std::string token;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "schema_version" && value != "1") {
      throw FormatError("report CSV: unsupported schema_version " + value);
    } else if (key == "strategy") {
      report.strategy = value;
    } else if (key == "constraint") {
      report.constraint = std::stod(value);
    }
  }
  if (!std::getline(in, line) || line != "chip_id,rate,group,budget,executed,accuracy,met") {
    throw FormatError("report CSV: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw FormatError("report CSV: expected 7 fields in '" + line + "'");
    try {
      report.chips.push_back({f[0], std::stod(f[1]), std::stoi(f[2]), std::stoi(f[3]),
                              std::stoi(f[4]), std::stod(f[5]), f[6] == "1"});
    } catch (const std::logic_error&) {
      throw FormatError("report CSV: malformed row '" + line + "'");
    }
  }
  return report;
}

std::string summary_csv(std::span<const Report> reports) {
  std::string out = "strategy,total_epochs,constraint_met_pct\n";
  for (const auto& r : reports) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", 100.0 * r.met_fraction());
    out += r.strategy + ',' + std::to_string(r.total_executed()) + ',' + pct + '\n';
  }
  return out;
}

}  // namespace efat
