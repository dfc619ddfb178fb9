#pragma once

// Dataset files, run configuration, scenario documents and trace output.
//
// File schemas (UTF-8, comma separated, header row):
//   districts.csv               id,name,total_pop,rural_pop,urban_pop,avg_family_size
//   fractions.csv               id,rural_aay,urban_aay,rural_priority,urban_priority (blank = missing)
//   adjacency.csv               id,neighbor_id
//   drivetimes.csv              id,<id_1>,...,<id_n> then one row per district (minutes)
//   state_totals.json           {rural_aay_households, rural_priority_persons,
//                                urban_aay_households, urban_priority_persons}
//   undernourishment_states.csv state,ratio,pct (or ratio_aay_priority,pct_undernourished)
//   storage_truth.csv           month,tonnes (or state_storage_tonnes; month = YYYY-MM)
//   yields.csv                  id,produced_tonnes
//   harvest_history.csv         id,last_year_nonwasted_tonnes,last_year_procured_tonnes (optional)
//   initial_stock.csv           id,procured_tonnes (optional)

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdsim/calibration.hpp"
#include "pdsim/demand.hpp"
#include "pdsim/ration_estimation.hpp"
#include "pdsim/scenario.hpp"

namespace pdsim {

struct DatasetPaths {
  std::filesystem::path districts;
  std::filesystem::path fractions;
  std::filesystem::path adjacency;
  std::filesystem::path drive_times;
  std::filesystem::path state_totals;
  std::optional<std::filesystem::path> undernourishment_states;
  std::optional<std::filesystem::path> storage_truth;
  std::optional<std::filesystem::path> yields;
  std::optional<std::filesystem::path> harvest_history;
  std::optional<std::filesystem::path> initial_stock;
};

/// How the undernourishment line is obtained from the state table.
enum class LineFitMode {
  Fixed,          // slope and intercept as configured
  FitIntercept,   // slope pinned, intercept by least squares
  FitBoth,        // ordinary least squares on both
};

struct RunConfig {
  DatasetPaths dataset;
  EngineParams engine;
  AllocationStrategy allocation = AllocationStrategy::PairSorted;
  bool flood_hits_farm_storage = false;
  EntitlementPolicy policy;
  UndernourishmentModel undernourishment;
  LineFitMode line_fit = LineFitMode::FitIntercept;
  bool fit_with_intercept = true;
  ScaleOptions ration;
  std::optional<std::filesystem::path> scenario;
  std::filesystem::path output_dir = "out";
};

/// Relative paths resolve against the directory of the config file.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct DriveTimeTable {
  std::vector<int> ids;
  DriveTimeMatrix matrix;
};

std::vector<DistrictRecord> read_districts(const std::filesystem::path& path);
std::vector<FractionRow> read_fractions(const std::filesystem::path& path);
AdjacencyList read_adjacency(const std::filesystem::path& path);
DriveTimeTable read_drive_times(const std::filesystem::path& path);
StateTotals read_state_totals(const std::filesystem::path& path);
std::vector<StateObservation> read_undernourishment_states(const std::filesystem::path& path);
std::vector<StoragePoint> read_storage_truth(const std::filesystem::path& path);
/// id -> kg (the file is in tonnes).
std::map<int, double> read_yields(const std::filesystem::path& path);
std::map<int, HarvestRecord> read_harvest_history(const std::filesystem::path& path);
std::map<int, double> read_initial_stock(const std::filesystem::path& path);

void write_districts(std::ostream& out, const std::vector<DistrictRecord>& districts);
void write_drive_times(std::ostream& out, const std::vector<int>& ids,
                       const DriveTimeMatrix& matrix);

/// Parsed, cross-referenced and validated input files. Districts are sorted by id.
struct Dataset {
  std::vector<DistrictRecord> districts;
  DriveTimeMatrix drive_times;
  std::vector<FractionRow> fractions;
  AdjacencyList adjacency;
  StateTotals state_totals;
  std::vector<StateObservation> undernourishment_states;
  std::vector<StoragePoint> storage_truth;
  std::map<int, double> yields_kg;
  std::map<int, HarvestRecord> harvest_history;
  std::map<int, double> initial_stock_kg;
};

/// Throws ParseError, IoError or ValidationFailed.
Dataset load_dataset(const RunConfig& config);

/// Lint without throwing on validation problems (parse errors still throw).
ValidationReport validate_files(const RunConfig& config);

struct PreparedModel {
  RationPipelineResult rations;
  SimulationInputs inputs;
  std::optional<LineFit> line_fit;
};

/// Runs the ration pipeline and assembles the simulation inputs.
PreparedModel prepare_model(const Dataset& dataset, const RunConfig& config);

/// Stable content fingerprint of a dataset (hex FNV-1a over its canonical form).
std::string dataset_fingerprint(const Dataset& dataset);

std::string fnv1a_hex(std::string_view bytes);

// Scenario documents. Masses are tonnes on disk.
ScenarioSpec scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec load_scenario(const std::filesystem::path& path);

enum class TraceFormat { CsvLong, Json };

/// Long format: week,district_id,metric,value; ordered by week, district, metric.
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);
void write_trace_json(std::ostream& out, const SimulationTrace& trace);
/// Rebuilds the week x district grid from a long-format CSV.
SimulationTrace read_trace_csv(const std::filesystem::path& path);

/// Writes trace.csv and/or trace.json under `dir`. Throws IoError.
std::vector<std::filesystem::path> emit_trace(const SimulationTrace& trace,
                                              const std::vector<TraceFormat>& formats,
                                              const std::filesystem::path& dir);

/// One row per district and stage: id,stage,<four area series>,aay_households,priority_persons.
void write_cardholders_csv(std::ostream& out, const RationPipelineResult& result);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace pdsim
