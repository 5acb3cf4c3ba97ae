// efat: plan and execute fault-aware retraining for a population of faulty
// accelerator chips. Each subcommand reads its inputs from --out (or explicit
// paths), validates everything, and only then writes its outputs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "efat/error.hpp"
#include "efat/io.hpp"
#include "efat/pipeline.hpp"

namespace fs = std::filesystem;
using efat::io::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

struct Inputs {
  std::string maps;
  std::string model;
  std::string table;
  std::string plan;
};

efat::ExperimentConfig load_config(const GlobalOptions& g) {
  efat::ExperimentConfig config = g.config_path.empty()
                                      ? efat::ExperimentConfig::toy()
                                      : efat::io::config_from_json(
                                            efat::io::read_json_file(g.config_path));
  if (g.seed) config.seed = *g.seed;
  if (g.workers) config.workers = *g.workers;
  config.validate();
  return config;
}

fs::path out_path(const GlobalOptions& g, const std::string& name) {
  return fs::path(g.out_dir) / name;
}

fs::path input_path(const GlobalOptions& g, const std::string& given,
                    const std::string& default_name) {
  return given.empty() ? out_path(g, default_name) : fs::path(given);
}

std::vector<efat::FaultMap> load_maps(const GlobalOptions& g, const Inputs& in,
                                      const efat::ExperimentConfig& config) {
  auto maps = efat::load_fault_maps(input_path(g, in.maps, "faultmaps.json"));
  if (maps.empty()) throw efat::ValidationError("fault map file holds no chips");
  if (maps.front().dims() != config.hardware) {
    throw efat::DimensionMismatch("fault maps do not match the configured array dims");
  }
  return maps;
}

efat::io::Checkpoint load_checkpoint(const GlobalOptions& g, const Inputs& in) {
  auto cp = efat::io::model_from_json(
      efat::io::read_json_file(input_path(g, in.model, "model.json")));
  if (!cp.baseline_accuracy) {
    throw efat::FormatError("checkpoint has no baseline_accuracy; produce it with 'pretrain'");
  }
  return cp;
}

std::string budget_file(const std::string& strategy, int epochs) {
  return "report_" + strategy + "_" + std::to_string(epochs) + ".csv";
}

void emit_error(const std::string& command, const std::string& kind,
                const std::string& message) {
  json record = {{"error", {{"command", command}, {"kind", kind}, {"message", message}}}};
  std::cerr << record.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilience-driven fault-aware retraining planner"};
  app.require_subcommand(1);

  GlobalOptions g;
  Inputs in;
  app.add_option("--config", g.config_path, "Experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--seed", g.seed, "Override the master seed");
  app.add_option("--workers", g.workers, "Parallel training jobs")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-faultmaps", "Sample the chip population's fault maps");
  auto* pre = app.add_subcommand("pretrain", "Train the fault-free baseline checkpoint");
  auto* res = app.add_subcommand("resilience", "Build the retraining-vs-fault-rate table");
  res->add_option("--maps", in.maps, "Fault map JSON (default <out>/faultmaps.json)");
  res->add_option("--model", in.model, "Checkpoint (default <out>/model.json)");

  auto* plan = app.add_subcommand("plan", "Per-chip budgets plus grouping and fusion");
  plan->add_option("--maps", in.maps, "Fault map JSON");
  plan->add_option("--table", in.table, "Resilience table (default <out>/table.json)");

  auto* train = app.add_subcommand("train", "Retrain once per group and report");
  train->add_option("--maps", in.maps, "Fault map JSON");
  train->add_option("--model", in.model, "Checkpoint");
  train->add_option("--plan", in.plan, "Plan (default <out>/plan.json)");

  std::string strategy = "individual";
  std::vector<int> budgets;
  auto* base = app.add_subcommand("baseline", "Fixed-policy baselines");
  base->add_option("--strategy", strategy, "individual | random-pairs")
      ->check(CLI::IsMember({"individual", "random-pairs"}));
  base->add_option("--epochs", budgets, "Per-run budgets (default: config baselines.budgets)");
  base->add_option("--maps", in.maps, "Fault map JSON");
  base->add_option("--model", in.model, "Checkpoint");

  std::vector<std::string> report_inputs;
  std::string summary_name = "summary.csv";
  auto* rep = app.add_subcommand("report", "Summarize strategy reports into one CSV");
  rep->add_option("inputs", report_inputs, "Report CSV files")->required()->check(CLI::ExistingFile);
  rep->add_option("--name", summary_name, "Summary file name inside --out");

  auto* run = app.add_subcommand("run", "Whole pipeline in one process");

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto config = load_config(g);

    if (*gen) {
      const auto maps = efat::generate_population(config);
      efat::save_fault_maps(maps, out_path(g, "faultmaps.json"), config.hardware);
    } else if (*pre) {
      const auto data = efat::experiment_dataset(config);
      const auto result = efat::pretrain_model(config, data);
      efat::io::write_json_file(out_path(g, "model.json"),
                                efat::io::model_to_json(result.model, result.baseline_accuracy));
      std::printf("baseline accuracy %.4f\n", result.baseline_accuracy);
    } else if (*res) {
      const auto maps = load_maps(g, in, config);
      const auto cp = load_checkpoint(g, in);
      const auto data = efat::experiment_dataset(config);
      const double constraint = efat::resolve_constraint(config, *cp.baseline_accuracy);
      const auto table = efat::build_table(config, cp.model, data, maps, constraint);
      efat::io::write_json_file(out_path(g, "table.json"), efat::io::table_to_json(table));
      efat::io::write_text_file(out_path(g, "table.csv"), efat::resilience_csv(table));
    } else if (*plan) {
      const auto maps = load_maps(g, in, config);
      const auto table = efat::io::table_from_json(
          efat::io::read_json_file(input_path(g, in.table, "table.json")));
      efat::io::PlanDocument doc;
      doc.constraint = table.constraint;
      doc.chip_plan = efat::plan_chips(config, table, maps);
      doc.fusion = efat::plan_groups(config, table, maps);
      efat::io::write_json_file(out_path(g, "plan.json"), efat::io::plan_to_json(doc, maps));
      std::printf("%zu chips -> %zu groups, %ld epochs (per-chip plan %ld)\n", maps.size(),
                  doc.fusion.group_count(), doc.fusion.total_epochs(),
                  doc.chip_plan.total_epochs());
    } else if (*train) {
      const auto maps = load_maps(g, in, config);
      const auto cp = load_checkpoint(g, in);
      const auto doc = efat::io::plan_from_json(
          efat::io::read_json_file(input_path(g, in.plan, "plan.json")));
      const auto data = efat::experiment_dataset(config);
      std::vector<efat::TinyModel> models;
      const auto report = efat::train_groups(config, cp.model, data, maps, doc.fusion,
                                             doc.constraint, &models);
      for (std::size_t k = 0; k < models.size(); ++k) {
        char name[48];
        std::snprintf(name, sizeof name, "models/group_%03zu.json", k);
        efat::io::write_json_file(out_path(g, name), efat::io::model_to_json(models[k]));
      }
      efat::io::write_text_file(out_path(g, "report_efat.csv"), efat::report_csv(report));
      std::printf("total epochs %ld, constraint met %.1f%%\n", report.total_executed(),
                  100.0 * report.met_fraction());
    } else if (*base) {
      efat::ExperimentContext ctx;
      ctx.maps = load_maps(g, in, config);
      auto cp = load_checkpoint(g, in);
      ctx.data = efat::experiment_dataset(config);
      ctx.constraint = efat::resolve_constraint(config, *cp.baseline_accuracy);
      ctx.pretrained = {std::move(cp.model), *cp.baseline_accuracy};
      if (budgets.empty()) budgets = config.baseline_budgets;
      std::vector<std::pair<fs::path, std::string>> outputs;
      for (int b : budgets) {
        const auto report = strategy == "individual"
                                ? efat::run_baseline_individual(config, ctx, b)
                                : efat::run_baseline_random_pairs(config, ctx, b);
        outputs.emplace_back(out_path(g, budget_file(strategy, b)), efat::report_csv(report));
      }
      for (const auto& [path, text] : outputs) efat::io::write_text_file(path, text);
    } else if (*rep) {
      std::vector<efat::Report> reports;
      for (const auto& p : report_inputs) {
        reports.push_back(efat::parse_report_csv(efat::io::read_text_file(p)));
      }
      const auto text = efat::summary_csv(reports);
      efat::io::write_text_file(out_path(g, summary_name), text);
      std::cout << text;
    } else if (*run) {
      const auto ctx = efat::prepare_experiment(config);
      const auto result = efat::run_efat(config, ctx);
      efat::io::write_json_file(out_path(g, "table.json"), efat::io::table_to_json(result.table));
      efat::io::write_text_file(out_path(g, "table.csv"), efat::resilience_csv(result.table));
      efat::io::write_text_file(out_path(g, "report_efat.csv"), efat::report_csv(result.report));
      std::printf("total epochs %ld, constraint met %.1f%%\n", result.report.total_executed(),
                  100.0 * result.report.met_fraction());
    }
  } catch (const efat::Error& e) {
    emit_error(command, e.kind(), e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error(command, "internal", e.what());
    return 3;
  }
  return 0;
}
