#include <gtest/gtest.h>

#include <filesystem>

#include "efat/error.hpp"
#include "efat/io.hpp"
#include "support/synthetic_table.hpp"

using namespace efat;
using io::json;

TEST(Io, TableRoundTrip) {
  auto t = oracle::exponential_table(3.0, 1.0, 0.5, 7);
  t.rows[3].reachable = false;
  t.rows[2].rep_epochs = {1, 2, 3, 4, 5};
  t.rows[2].acc_no_retrain = 0.8125;
  auto back = io::table_from_json(io::table_to_json(t));
  EXPECT_EQ(back.constraint, t.constraint);
  EXPECT_EQ(back.reps, t.reps);
  EXPECT_EQ(back.e_max, t.e_max);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].fault_rate, t.rows[k].fault_rate);
    EXPECT_EQ(back.rows[k].epochs_max, t.rows[k].epochs_max);
    EXPECT_EQ(back.rows[k].reachable, t.rows[k].reachable);
    EXPECT_EQ(back.rows[k].rep_epochs, t.rows[k].rep_epochs);
    EXPECT_EQ(back.rows[k].acc_no_retrain, t.rows[k].acc_no_retrain);
  }
}

TEST(Io, ModelRoundTripIsBitExact) {
  auto m = TinyModel::initialize({5, {7, 3}, 4}, 12);
  auto cp = io::model_from_json(io::model_to_json(m, 0.91234567890123));
  EXPECT_EQ(cp.model, m);
  EXPECT_EQ(cp.baseline_accuracy, 0.91234567890123);
  auto plain = io::model_from_json(io::model_to_json(m));
  EXPECT_FALSE(plain.baseline_accuracy.has_value());
}

TEST(Io, ConfigRoundTripAndDefaults) {
  auto c = ExperimentConfig::toy();
  c.seed = 99;
  c.hidden = {12, 7};
  c.constraint = 0.77;
  c.rule = CandidateRule::MinSaving;
  c.statistic = Statistic::Mean;
  c.baseline_budgets = {3, 5};
  auto back = io::config_from_json(io::config_to_json(c));
  EXPECT_EQ(io::config_to_json(back), io::config_to_json(c));

  json partial = {{"schema_version", 1}, {"seed", 4}};
  auto d = io::config_from_json(partial);
  EXPECT_EQ(d.seed, 4u);
  EXPECT_EQ(io::config_to_json(d)["model"], io::config_to_json(ExperimentConfig::toy())["model"]);
}

TEST(Io, ConfigRejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(io::config_from_json(json{{"schema_version", 1}, {"sede", 4}}), ValidationError);
  EXPECT_THROW(io::config_from_json(json{{"schema_version", 1}, {"fusion", {{"m", 3}}}}), ValidationError);
  EXPECT_THROW(io::config_from_json(json{{"schema_version", 1}, {"resilience", {{"reps", 0}}}}), ValidationError);
  EXPECT_THROW(io::config_from_json(json{{"schema_version", 1}, {"statistic", "median"}}), ValidationError);
  EXPECT_THROW(io::config_from_json(json{{"schema_version", 1}, {"seed", "x"}}), FormatError);
  EXPECT_THROW(io::config_from_json(json{{"seed", 4}}), FormatError);
}

TEST(Io, SchemaVersionChecked) {
  auto doc = io::table_to_json(oracle::exponential_table());
  doc["schema_version"] = 2;
  EXPECT_THROW(io::table_from_json(doc), FormatError);
  doc.erase("schema_version");
  EXPECT_THROW(io::table_from_json(doc), FormatError);
}

TEST(Io, PlanRoundTrip) {
  const HardwareConfig hw{16, 16};
  std::vector<FaultMap> maps{generate_fault_map(hw, 0.1, 1, "a"),
                             generate_fault_map(hw, 0.1, 2, "b"),
                             generate_fault_map(hw, 0.2, 3, "c")};
  auto table = oracle::exponential_table();
  io::PlanDocument doc;
  doc.constraint = 0.93;
  doc.chip_plan = select_retraining_amounts(table, maps);
  doc.fusion = group_and_fuse(maps, table, FusionOptions{});
  const auto j = io::plan_to_json(doc, maps);
  auto back = io::plan_from_json(j);
  EXPECT_EQ(back.constraint, doc.constraint);
  EXPECT_EQ(back.fusion.links, doc.fusion.links);
  EXPECT_EQ(back.fusion.budgets, doc.fusion.budgets);
  EXPECT_EQ(back.fusion.merged, doc.fusion.merged);
  ASSERT_EQ(back.chip_plan.chips.size(), 3u);
  EXPECT_EQ(back.chip_plan.chips[2].epochs, doc.chip_plan.chips[2].epochs);
  EXPECT_EQ(j["groups"][0]["chip_ids"].size(), doc.fusion.links[0].size());
}

TEST(Io, WriteIsAtomicAndCreatesDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "efat_unit" / "nested" / "deeper";
  std::filesystem::remove_all(dir);
  const auto path = dir / "x.txt";
  io::write_text_file(path, "hello\n");
  EXPECT_EQ(io::read_text_file(path), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "x.txt.tmp"));
}
