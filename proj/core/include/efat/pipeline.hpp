#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efat/faultmap.hpp"
#include "efat/fusion.hpp"
#include "efat/resilience.hpp"
#include "efat/tinynet.hpp"

namespace efat {

// Per-chip fault rates ~ N(mean, sigma), truncated to [min_rate, max_rate].
struct PopulationConfig {
  int chips = 40;
  double mean = 0.1;
  double sigma = 0.02;
  double min_rate = 0.001;
  double max_rate = 1.0;
};

struct ExperimentConfig {
  HardwareConfig hardware;
  PopulationConfig population;

  DatasetKind dataset_kind = DatasetKind::Blobs;
  int samples = 10000;
  int features = 16;
  int classes = 8;
  double noise = 0.4;

  std::vector<int> hidden{64, 64};
  double learning_rate = 0.003;
  int batch_size = 32;
  int pretrain_epochs = 300;

  // Absolute accuracy constraint; when absent, baseline - constraint_margin.
  std::optional<double> constraint;
  double constraint_margin = 0.01;
  Statistic statistic = Statistic::Max;

  // Fault-rate list generation.
  double max_fault_rate = 0.3;
  double max_interval = 0.05;
  double step = 0.5;

  // Grouping and fusion.
  int comparisons = 5;
  int iterations = 1;
  CandidateRule rule = CandidateRule::LeastFusedRate;

  int reps = 5;
  int e_max = 50;

  // Fixed per-run budgets tried by the baselines.
  std::vector<int> baseline_budgets{1, 2, 4, 8};

  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;

  // Desk-scale default (the member defaults above): 40 chips on a 16x16
  // array, 8-class blobs, 64-64 MLP.
  static ExperimentConfig toy();
  // 100 chips on a 256x256 array.
  static ExperimentConfig paper_scale();
};

DatasetSpec experiment_dataset_spec(const ExperimentConfig& config);
ModelSpec experiment_model_spec(const ExperimentConfig& config);
SyntheticDataset experiment_dataset(const ExperimentConfig& config);

std::vector<FaultMap> generate_population(const ExperimentConfig& config);
PretrainResult pretrain_model(const ExperimentConfig& config,
                              const SyntheticDataset& data);
double resolve_constraint(const ExperimentConfig& config, double baseline_accuracy);

// Step 1: fault-rate list over the population plus the measured table.
ResilienceTable build_table(const ExperimentConfig& config, const TinyModel& pretrained,
                            const SyntheticDataset& data,
                            std::span<const FaultMap> maps, double constraint);

// Steps 2 and 3.
ChipPlan plan_chips(const ExperimentConfig& config, const ResilienceTable& table,
                    std::span<const FaultMap> maps);
FusionResult plan_groups(const ExperimentConfig& config, const ResilienceTable& table,
                         std::span<const FaultMap> maps);

struct ChipOutcome {
  std::string chip_id;
  double rate = 0.0;
  int group = 0;
  int budget = 0;
  int executed = 0;
  double accuracy = 0.0;
  bool met = false;

  friend bool operator==(const ChipOutcome&, const ChipOutcome&) = default;
};

struct Report {
  std::string strategy;
  double constraint = 0.0;
  std::vector<ChipOutcome> chips;  // population order

  // Each group's epochs counted once.
  long total_executed() const;
  long total_budgeted() const;
  double met_fraction() const;
  std::size_t group_count() const;
};

// One training run per group: the pretrained model is retrained with the
// group's merged mask for at most its budget, then every member chip is
// evaluated with its own mask.
struct GroupSchedule {
  std::vector<FaultMap> merged;
  std::vector<std::vector<std::size_t>> members;
  std::vector<int> budgets;
};

struct ExecutionOptions {
  std::string strategy;
  bool early_stop = true;
  std::uint64_t seed = 1;
  int workers = 1;
};

Report execute_groups(const GroupSchedule& schedule, std::span<const FaultMap> maps,
                      const TinyModel& pretrained, const SyntheticDataset& data,
                      const ExperimentConfig& config, double constraint,
                      const ExecutionOptions& options,
                      std::vector<TinyModel>* group_models = nullptr);

// Step 4 for a fusion plan (early stop at the constraint, budget is a cap).
Report train_groups(const ExperimentConfig& config, const TinyModel& pretrained,
                    const SyntheticDataset& data, std::span<const FaultMap> maps,
                    const FusionResult& fusion, double constraint,
                    std::vector<TinyModel>* group_models = nullptr);

// Shared inputs of every strategy: same dataset, checkpoint and fault maps.
struct ExperimentContext {
  SyntheticDataset data;
  PretrainResult pretrained;
  std::vector<FaultMap> maps;
  double constraint = 0.0;
};

ExperimentContext prepare_experiment(const ExperimentConfig& config);

struct EfatRun {
  ResilienceTable table;
  ChipPlan chip_plan;
  FusionResult fusion;
  Report report;
};

EfatRun run_efat(const ExperimentConfig& config, const ExperimentContext& context);
Report run_efat(const ExperimentConfig& config);

// Fixed budget per chip, no early stop.
Report run_baseline_individual(const ExperimentConfig& config,
                               const ExperimentContext& context, int epochs_per_chip);
Report run_baseline_individual(const ExperimentConfig& config, int epochs_per_chip);

// Seeded random pairing (odd count leaves one singleton); each pair's fused
// map is trained once for the fixed budget, no early stop.
Report run_baseline_random_pairs(const ExperimentConfig& config,
                                 const ExperimentContext& context, int epochs_per_group);
Report run_baseline_random_pairs(const ExperimentConfig& config, int epochs_per_group);

// Report CSV: a "# schema_version=1 strategy=<s> constraint=<c>" line, then
// chip_id,rate,group,budget,executed,accuracy,met.
std::string report_csv(const Report& report);
Report parse_report_csv(const std::string& text);

// strategy,total_epochs,constraint_met_pct
std::string summary_csv(std::span<const Report> reports);

}  // namespace efat
