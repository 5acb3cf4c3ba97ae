#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "efat/io.hpp"
#include "efat/pipeline.hpp"

namespace fs = std::filesystem;

#ifndef EFAT_CLI_PATH
#error "EFAT_CLI_PATH must point at the efat executable"
#endif

namespace {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "efat_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Result run_cli(const std::string& args, const fs::path& log_dir) {
  const auto out = log_dir / "stdout.txt";
  const auto err = log_dir / "stderr.txt";
  const std::string cmd = std::string(EFAT_CLI_PATH) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Tiny experiment so the whole chain runs in a few seconds.
fs::path write_config(const fs::path& dir) {
  efat::ExperimentConfig c = efat::ExperimentConfig::toy();
  c.samples = 400;
  c.classes = 4;
  c.noise = 0.5;
  c.hidden = {16};
  c.learning_rate = 0.05;
  c.pretrain_epochs = 10;
  c.population.chips = 6;
  c.reps = 2;
  c.e_max = 6;
  c.max_fault_rate = 0.15;
  c.baseline_budgets = {1, 2};
  const auto path = dir / "config.json";
  efat::io::write_json_file(path, efat::io::config_to_json(c));
  return path;
}

}  // namespace

TEST(Cli, ChainedSubcommandsReproduceRun) {
  const auto root = scratch("chain");
  const auto cfg = write_config(root);
  const auto chain = root / "chain";
  const auto whole = root / "whole";
  const std::string common = "--config " + cfg.string() + " --seed 3 --out ";

  for (const char* sub : {"gen-faultmaps", "pretrain", "resilience", "plan", "train"}) {
    auto r = run_cli(common + chain.string() + " " + sub, root);
    ASSERT_EQ(r.status, 0) << sub << ": " << r.err;
  }
  auto r = run_cli(common + whole.string() + " run", root);
  ASSERT_EQ(r.status, 0) << r.err;

  EXPECT_EQ(slurp(chain / "report_efat.csv"), slurp(whole / "report_efat.csv"));
  EXPECT_EQ(slurp(chain / "table.json"), slurp(whole / "table.json"));
  EXPECT_FALSE(slurp(chain / "report_efat.csv").empty());
  EXPECT_TRUE(fs::exists(chain / "models" / "group_000.json"));
  for (const char* f : {"faultmaps.json", "model.json", "table.json", "table.csv", "plan.json"})
    EXPECT_TRUE(fs::exists(chain / f)) << f;

  // Re-running a subcommand gives the same bytes.
  const auto plan_before = slurp(chain / "plan.json");
  ASSERT_EQ(run_cli(common + chain.string() + " plan", root).status, 0);
  EXPECT_EQ(slurp(chain / "plan.json"), plan_before);

  // Baselines and the summary.
  ASSERT_EQ(run_cli(common + chain.string() + " baseline --strategy individual", root).status, 0);
  ASSERT_EQ(run_cli(common + chain.string() + " baseline --strategy random-pairs --epochs 2", root)
                .status,
            0);
  for (const char* f : {"report_individual_1.csv", "report_individual_2.csv",
                        "report_random-pairs_2.csv"})
    EXPECT_TRUE(fs::exists(chain / f)) << f;
  auto rep = run_cli(common + chain.string() + " report " + (chain / "report_efat.csv").string() +
                      " " + (chain / "report_individual_2.csv").string() + " " +
                      (chain / "report_random-pairs_2.csv").string(),
                  root);
  ASSERT_EQ(rep.status, 0) << rep.err;
  const auto summary = slurp(chain / "summary.csv");
  EXPECT_EQ(summary, rep.out);
  std::istringstream lines(summary);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "strategy,total_epochs,constraint_met_pct");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("efat-max,", 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("individual@2,12,", 0), 0u);
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("random-pairs@2,6,", 0), 0u);
}

TEST(Cli, MissingInputFailsWithoutOutputs) {
  const auto root = scratch("missing");
  const auto cfg = write_config(root);
  const auto out = root / "out";
  auto r = run_cli("--config " + cfg.string() + " --out " + out.string() + " resilience", root);
  EXPECT_NE(r.status, 0);
  auto record = nlohmann::json::parse(r.err);
  EXPECT_EQ(record["error"]["command"], "resilience");
  EXPECT_EQ(record["error"]["kind"], "io");
  EXPECT_FALSE(record["error"]["message"].get<std::string>().empty());
  EXPECT_FALSE(fs::exists(out / "table.json"));
  EXPECT_FALSE(fs::exists(out / "table.csv"));
}

TEST(Cli, InvalidConfigIsValidationError) {
  const auto root = scratch("badconfig");
  const auto cfg = root / "config.json";
  std::ofstream(cfg) << R"({"schema_version": 1, "resilience": {"reps": 0}})";
  auto r = run_cli("--config " + cfg.string() + " --out " + (root / "out").string() +
                    " gen-faultmaps",
                root);
  EXPECT_NE(r.status, 0);
  auto record = nlohmann::json::parse(r.err);
  EXPECT_EQ(record["error"]["kind"], "validation");
  EXPECT_FALSE(fs::exists(root / "out" / "faultmaps.json"));
}

TEST(Cli, MismatchedMapsAreRejected) {
  const auto root = scratch("dims");
  const auto cfg = write_config(root);
  const auto out = root / "out";
  std::vector<efat::FaultMap> maps{efat::FaultMap::fault_free("x", {8, 8})};
  efat::save_fault_maps(maps, out / "faultmaps.json");
  ASSERT_EQ(run_cli("--config " + cfg.string() + " --out " + out.string() + " pretrain", root)
                .status,
            0);
  auto r = run_cli("--config " + cfg.string() + " --out " + out.string() + " resilience", root);
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["kind"], "dimension_mismatch");
  EXPECT_FALSE(fs::exists(out / "table.json"));
}
