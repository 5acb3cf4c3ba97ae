#include "efat/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "efat/error.hpp"

namespace efat::io {

namespace fs = std::filesystem;

namespace {

void check_schema(const json& doc, std::string_view what) {
  if (!doc.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
  if (!doc.contains("schema_version")) {
    throw FormatError(std::string(what) + ": missing schema_version");
  }
  const int version = doc.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw FormatError(std::string(what) + ": unsupported schema_version " +
                      std::to_string(version));
  }
}

template <typename Fn>
auto parsing(std::string_view what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

HardwareConfig dims_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("dims must be [rows, cols]");
  HardwareConfig dims{j.at(0).get<int>(), j.at(1).get<int>()};
  dims.validate();
  return dims;
}

json chip_to_json(const FaultMap& map) {
  json faults = json::array();
  for (const auto& pe : map.faults()) faults.push_back({pe.row, pe.col});
  return {{"chip_id", map.chip_id()},
          {"seed", map.seed() ? json(*map.seed()) : json(nullptr)},
          {"faults", std::move(faults)}};
}

FaultMap chip_from_json(const json& c, const HardwareConfig& dims) {
  std::optional<std::uint64_t> seed;
  if (c.contains("seed") && !c.at("seed").is_null()) seed = c.at("seed").get<std::uint64_t>();
  std::vector<PeCoord> coords;
  for (const auto& f : c.at("faults")) {
    if (!f.is_array() || f.size() != 2) throw FormatError("fault must be [row, col]");
    coords.push_back({f.at(0).get<int>(), f.at(1).get<int>()});
  }
  return FaultMap::from_coords(c.at("chip_id").get<std::string>(), dims, coords, seed);
}

std::string_view kind_name(DatasetKind k) {
  return k == DatasetKind::Blobs ? "blobs" : "spirals";
}

DatasetKind parse_kind(const std::string& s) {
  if (s == "blobs") return DatasetKind::Blobs;
  if (s == "spirals") return DatasetKind::Spirals;
  throw ValidationError("unknown dataset kind '" + s + "'");
}

std::string_view rule_name(CandidateRule r) {
  return r == CandidateRule::LeastFusedRate ? "least_fused_rate" : "min_saving";
}

CandidateRule parse_rule(const std::string& s) {
  if (s == "least_fused_rate") return CandidateRule::LeastFusedRate;
  if (s == "min_saving") return CandidateRule::MinSaving;
  throw ValidationError("unknown candidate rule '" + s + "'");
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ValidationError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " +
                  ec.message());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

json fault_maps_to_json(std::span<const FaultMap> maps, std::optional<HardwareConfig> dims) {
  const HardwareConfig d = !maps.empty() ? maps.front().dims() : dims.value_or(HardwareConfig{});
  json chips = json::array();
  for (const auto& m : maps) {
    if (m.dims() != d) {
      throw DimensionMismatch("all fault maps in one file must share dims");
    }
    chips.push_back(chip_to_json(m));
  }
  return {{"schema_version", kSchemaVersion},
          {"dims", {d.rows, d.cols}},
          {"chips", std::move(chips)}};
}

std::vector<FaultMap> fault_maps_from_json(const json& doc) {
  return parsing("fault map file", [&] {
    check_schema(doc, "fault map file");
    const HardwareConfig dims = dims_from_json(doc.at("dims"));
    std::vector<FaultMap> maps;
    for (const auto& c : doc.at("chips")) {
      if (c.contains("dims") && dims_from_json(c.at("dims")) != dims) {
        throw DimensionMismatch("chip '" + c.value("chip_id", std::string{}) +
                                "' dims differ from the file's dims");
      }
      maps.push_back(chip_from_json(c, dims));
    }
    return maps;
  });
}

json table_to_json(const ResilienceTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"fault_rate", r.fault_rate},
                    {"epochs_min", r.epochs_min},
                    {"epochs_mean", r.epochs_mean},
                    {"epochs_max", r.epochs_max},
                    {"acc_no_retrain", r.acc_no_retrain},
                    {"reachable", r.reachable},
                    {"rep_epochs", r.rep_epochs}});
  }
  return {{"schema_version", kSchemaVersion},
          {"constraint", table.constraint},
          {"reps", table.reps},
          {"e_max", table.e_max},
          {"rows", std::move(rows)}};
}

ResilienceTable table_from_json(const json& doc) {
  auto table = parsing("resilience table", [&] {
    check_schema(doc, "resilience table");
    ResilienceTable t;
    t.constraint = doc.at("constraint").get<double>();
    t.reps = doc.at("reps").get<int>();
    t.e_max = doc.at("e_max").get<int>();
    for (const auto& r : doc.at("rows")) {
      ResilienceRow row;
      row.fault_rate = r.at("fault_rate").get<double>();
      row.epochs_min = r.at("epochs_min").get<double>();
      row.epochs_mean = r.at("epochs_mean").get<double>();
      row.epochs_max = r.at("epochs_max").get<double>();
      row.acc_no_retrain = r.at("acc_no_retrain").get<double>();
      row.reachable = r.at("reachable").get<bool>();
      read_opt(r, "rep_epochs", row.rep_epochs);
      t.rows.push_back(std::move(row));
    }
    return t;
  });
  table.validate();
  return table;
}

json model_to_json(const TinyModel& model, std::optional<double> baseline_accuracy) {
  json layers = json::array();
  for (const auto& l : model.layers()) {
    layers.push_back({{"in_dim", l.shape.in_dim},
                      {"out_dim", l.shape.out_dim},
                      {"weights", l.weights},
                      {"bias", l.bias}});
  }
  json doc = {{"schema_version", kSchemaVersion}, {"layers", std::move(layers)}};
  if (baseline_accuracy) doc["baseline_accuracy"] = *baseline_accuracy;
  return doc;
}

Checkpoint model_from_json(const json& doc) {
  return parsing("model checkpoint", [&] {
    check_schema(doc, "model checkpoint");
    std::vector<DenseLayer> layers;
    for (const auto& l : doc.at("layers")) {
      layers.push_back({{l.at("in_dim").get<int>(), l.at("out_dim").get<int>()},
                        l.at("weights").get<std::vector<double>>(),
                        l.at("bias").get<std::vector<double>>()});
    }
    Checkpoint cp{TinyModel(std::move(layers)), std::nullopt};
    if (doc.contains("baseline_accuracy")) {
      cp.baseline_accuracy = doc.at("baseline_accuracy").get<double>();
    }
    return cp;
  });
}

json config_to_json(const ExperimentConfig& c) {
  return {
      {"schema_version", kSchemaVersion},
      {"hardware", {{"rows", c.hardware.rows}, {"cols", c.hardware.cols}}},
      {"population",
       {{"chips", c.population.chips},
        {"mean", c.population.mean},
        {"sigma", c.population.sigma},
        {"min_rate", c.population.min_rate},
        {"max_rate", c.population.max_rate}}},
      {"dataset",
       {{"kind", kind_name(c.dataset_kind)},
        {"samples", c.samples},
        {"features", c.features},
        {"classes", c.classes},
        {"noise", c.noise}}},
      {"model", {{"hidden", c.hidden}}},
      {"training",
       {{"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"pretrain_epochs", c.pretrain_epochs}}},
      {"constraint",
       {{"accuracy", c.constraint ? json(*c.constraint) : json(nullptr)},
        {"margin", c.constraint_margin}}},
      {"statistic", to_string(c.statistic)},
      {"fault_rate_list",
       {{"max_fault_rate", c.max_fault_rate},
        {"max_interval", c.max_interval},
        {"step", c.step}}},
      {"fusion",
       {{"comparisons", c.comparisons},
        {"iterations", c.iterations},
        {"rule", rule_name(c.rule)}}},
      {"resilience", {{"reps", c.reps}, {"e_max", c.e_max}}},
      {"baselines", {{"budgets", c.baseline_budgets}}},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

ExperimentConfig config_from_json(const json& doc) {
  auto config = parsing("experiment config", [&] {
    check_schema(doc, "experiment config");
    reject_unknown(doc,
                   {"schema_version", "hardware", "population", "dataset", "model",
                    "training", "constraint", "statistic", "fault_rate_list", "fusion",
                    "resilience", "baselines", "seed", "workers"},
                   "config");
    ExperimentConfig c = ExperimentConfig::toy();
    if (doc.contains("hardware")) {
      const auto& h = doc.at("hardware");
      reject_unknown(h, {"rows", "cols"}, "hardware");
      read_opt(h, "rows", c.hardware.rows);
      read_opt(h, "cols", c.hardware.cols);
    }
    if (doc.contains("population")) {
      const auto& p = doc.at("population");
      reject_unknown(p, {"chips", "mean", "sigma", "min_rate", "max_rate"}, "population");
      read_opt(p, "chips", c.population.chips);
      read_opt(p, "mean", c.population.mean);
      read_opt(p, "sigma", c.population.sigma);
      read_opt(p, "min_rate", c.population.min_rate);
      read_opt(p, "max_rate", c.population.max_rate);
    }
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      reject_unknown(d, {"kind", "samples", "features", "classes", "noise"}, "dataset");
      if (d.contains("kind")) c.dataset_kind = parse_kind(d.at("kind").get<std::string>());
      read_opt(d, "samples", c.samples);
      read_opt(d, "features", c.features);
      read_opt(d, "classes", c.classes);
      read_opt(d, "noise", c.noise);
    }
    if (doc.contains("model")) {
      reject_unknown(doc.at("model"), {"hidden"}, "model");
      read_opt(doc.at("model"), "hidden", c.hidden);
    }
    if (doc.contains("training")) {
      const auto& t = doc.at("training");
      reject_unknown(t, {"learning_rate", "batch_size", "pretrain_epochs"}, "training");
      read_opt(t, "learning_rate", c.learning_rate);
      read_opt(t, "batch_size", c.batch_size);
      read_opt(t, "pretrain_epochs", c.pretrain_epochs);
    }
    if (doc.contains("constraint")) {
      const auto& k = doc.at("constraint");
      reject_unknown(k, {"accuracy", "margin"}, "constraint");
      if (k.contains("accuracy")) {
        c.constraint = k.at("accuracy").is_null()
                           ? std::nullopt
                           : std::optional<double>(k.at("accuracy").get<double>());
      }
      read_opt(k, "margin", c.constraint_margin);
    }
    if (doc.contains("statistic")) {
      c.statistic = parse_statistic(doc.at("statistic").get<std::string>());
    }
    if (doc.contains("fault_rate_list")) {
      const auto& f = doc.at("fault_rate_list");
      reject_unknown(f, {"max_fault_rate", "max_interval", "step"}, "fault_rate_list");
      read_opt(f, "max_fault_rate", c.max_fault_rate);
      read_opt(f, "max_interval", c.max_interval);
      read_opt(f, "step", c.step);
    }
    if (doc.contains("fusion")) {
      const auto& f = doc.at("fusion");
      reject_unknown(f, {"comparisons", "iterations", "rule"}, "fusion");
      read_opt(f, "comparisons", c.comparisons);
      read_opt(f, "iterations", c.iterations);
      if (f.contains("rule")) c.rule = parse_rule(f.at("rule").get<std::string>());
    }
    if (doc.contains("resilience")) {
      const auto& r = doc.at("resilience");
      reject_unknown(r, {"reps", "e_max"}, "resilience");
      read_opt(r, "reps", c.reps);
      read_opt(r, "e_max", c.e_max);
    }
    if (doc.contains("baselines")) {
      reject_unknown(doc.at("baselines"), {"budgets"}, "baselines");
      read_opt(doc.at("baselines"), "budgets", c.baseline_budgets);
    }
    read_opt(doc, "seed", c.seed);
    read_opt(doc, "workers", c.workers);
    return c;
  });
  config.validate();
  return config;
}

json plan_to_json(const PlanDocument& plan, std::span<const FaultMap> maps) {
  json chips = json::array();
  for (const auto& c : plan.chip_plan.chips) {
    chips.push_back({{"chip_id", c.chip_id},
                     {"fault_rate", c.fault_rate},
                     {"epochs", c.epochs},
                     {"clamped", c.clamped}});
  }
  json groups = json::array();
  const auto& f = plan.fusion;
  for (std::size_t g = 0; g < f.group_count(); ++g) {
    json ids = json::array();
    for (auto idx : f.links[g]) ids.push_back(maps[idx].chip_id());
    groups.push_back({{"chip_ids", std::move(ids)},
                      {"members", f.links[g]},
                      {"budget", f.budgets[g]},
                      {"reachable", static_cast<bool>(f.reachable[g])}});
  }
  return {{"schema_version", kSchemaVersion},
          {"constraint", plan.constraint},
          {"statistic", to_string(plan.chip_plan.statistic)},
          {"chip_plan", std::move(chips)},
          {"groups", std::move(groups)},
          {"merged_fault_maps", fault_maps_to_json(f.merged)}};
}

PlanDocument plan_from_json(const json& doc) {
  return parsing("plan file", [&] {
    check_schema(doc, "plan file");
    PlanDocument plan;
    plan.constraint = doc.at("constraint").get<double>();
    plan.chip_plan.statistic = parse_statistic(doc.at("statistic").get<std::string>());
    for (const auto& c : doc.at("chip_plan")) {
      plan.chip_plan.chips.push_back({c.at("chip_id").get<std::string>(),
                                      c.at("fault_rate").get<double>(),
                                      c.at("epochs").get<int>(),
                                      c.at("clamped").get<bool>()});
    }
    plan.fusion.merged = fault_maps_from_json(doc.at("merged_fault_maps"));
    for (const auto& g : doc.at("groups")) {
      plan.fusion.links.push_back(g.at("members").get<std::vector<std::size_t>>());
      plan.fusion.budgets.push_back(g.at("budget").get<int>());
      plan.fusion.reachable.push_back(g.at("reachable").get<bool>());
    }
    if (plan.fusion.links.size() != plan.fusion.merged.size()) {
      throw FormatError("plan file: groups and merged maps are not index-aligned");
    }
    return plan;
  });
}

}  // namespace efat::io
