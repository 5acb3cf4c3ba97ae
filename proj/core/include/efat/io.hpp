#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "efat/faultmap.hpp"
#include "efat/fusion.hpp"
#include "efat/pipeline.hpp"
#include "efat/resilience.hpp"
#include "efat/tinynet.hpp"

// JSON/CSV persistence. Every document carries "schema_version"; parse
// failures surface as FormatError, semantic ones as ValidationError.
namespace efat::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Written to a sibling temporary and renamed, so readers never see a
// partially written file.
void write_json_file(const std::filesystem::path& path, const json& doc);
void write_text_file(const std::filesystem::path& path, std::string_view text);

json fault_maps_to_json(std::span<const FaultMap> maps,
                        std::optional<HardwareConfig> dims = std::nullopt);
std::vector<FaultMap> fault_maps_from_json(const json& doc);

json table_to_json(const ResilienceTable& table);
ResilienceTable table_from_json(const json& doc);

struct Checkpoint {
  TinyModel model;
  std::optional<double> baseline_accuracy;
};
json model_to_json(const TinyModel& model,
                   std::optional<double> baseline_accuracy = std::nullopt);
Checkpoint model_from_json(const json& doc);

// Missing keys keep their ExperimentConfig::toy() defaults; unknown keys are
// rejected.
json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& doc);

struct PlanDocument {
  double constraint = 0.0;
  ChipPlan chip_plan;
  FusionResult fusion;
};
json plan_to_json(const PlanDocument& plan, std::span<const FaultMap> maps);
PlanDocument plan_from_json(const json& doc);

}  // namespace efat::io
