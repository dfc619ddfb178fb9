#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdsim/demand.hpp"
#include "pdsim/domain.hpp"
#include "pdsim/engine.hpp"
#include "pdsim/transport.hpp"

namespace pdsim {

/// Destroys a fraction of the stored PDS wheat in the listed districts.
struct FloodEvent {
  int week = 0;
  std::vector<int> district_ids;
  double destroyed_fraction = 0.0;
};

/// Replaces the current MSP from `effective_week` onward.
struct MspChangeEvent {
  int effective_week = 0;
  double new_msp = 0.0;
};

/// Replaces produced wheat before week 0, optionally rescaled to a state total.
struct YieldSeedEvent {
  std::map<int, double> produced_kg;
  std::optional<double> state_total_kg;
};

using ScenarioEvent = std::variant<FloodEvent, MspChangeEvent, YieldSeedEvent>;

struct ParameterOverrides {
  std::optional<double> waste_fraction;
  std::optional<int> reserve_weeks;
  std::optional<std::vector<int>> harvest_window;
  std::optional<int> transport_latency;
  std::optional<Eq2Convention> eq2_convention;
  std::optional<AllocationStrategy> allocation;
  std::optional<double> slope;
  std::optional<double> intercept;
  std::optional<double> spike_gain;
  std::optional<bool> flood_hits_farm_storage;
};

struct ScenarioSpec {
  std::string name = "baseline";
  int horizon_weeks = 52;
  Calendar calendar;
  PriceContext prices;
  /// Fallback share of last year's non-wasted harvest that was procured, used
  /// for districts without a harvest-history record.
  double last_year_procured_fraction = 0.3;
  /// Final normalisation of produced wheat (applied after yield seeds).
  std::optional<double> state_production_kg;
  /// When set, district demand is rescaled so the state drains at this rate.
  std::optional<double> state_depletion_kg_per_week;
  std::vector<ScenarioEvent> events;
  ParameterOverrides overrides;

  /// Throws InvalidArgument or UnknownDistrict.
  void validate(const DistrictIndex& index) const;
};

/// Everything a run needs besides the scenario. Vectors are aligned with
/// `districts`, which must be sorted by ascending id. Optional-per-district
/// vectors may be left empty.
struct SimulationInputs {
  std::vector<DistrictRecord> districts;
  DriveTimeMatrix drive_times;
  std::vector<CardholderEstimate> cardholders;
  std::vector<double> produced_kg;
  std::vector<std::optional<HarvestRecord>> harvest_history;
  std::vector<std::optional<double>> initial_procured_kg;
  EngineParams engine;
  EntitlementPolicy policy;
  UndernourishmentModel undernourishment;
  AllocationStrategy allocation = AllocationStrategy::PairSorted;
  bool flood_hits_farm_storage = false;
};

/// Proportional rescale of district production to a state total.
std::vector<double> scale_production(std::span<const double> district_yields_kg,
                                     double state_total_kg);

struct RunState {
  int week = 0;
  PriceContext prices;
  std::vector<DistrictStockState> stocks;
};

struct EventOutcome {
  RunState state;
  /// Wheat destroyed per district position (floods only).
  std::vector<double> destroyed_kg;
};

struct EventOptions {
  bool flood_hits_farm_storage = false;
};

EventOutcome apply_event(const RunState& state, const ScenarioEvent& event,
                         const DistrictIndex& index, EventOptions options = {});

enum class Metric : std::size_t {
  ProducedWheat,
  FarmStorage,
  FarmWaste,
  MarketPurchased,
  ProcuredStorage,
  SurplusWheat,
  ImportedProcured,
  ConsumerPurchased,
  Consumed,
  WeeklyConsumption,
  Request,
  SurplusOffered,
  ShippedIn,
  ShippedOut,
  Unmet,
  PctUndernourished,
  FloodLoss,
};
inline constexpr std::size_t kMetricCount = 17;

const std::array<Metric, kMetricCount>& all_metrics();
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

struct TraceCell {
  DistrictStockState stocks;
  double request = 0.0;
  double surplus_offered = 0.0;
  double shipped_in = 0.0;
  double shipped_out = 0.0;
  double unmet = 0.0;
  double pct_undernourished = 0.0;
  double flood_loss = 0.0;

  double value(Metric m) const;
  void set(Metric m, double v);
};

struct SimulationTrace {
  std::string scenario_name;
  Calendar calendar;
  int horizon_weeks = 0;
  std::vector<int> district_ids;
  /// Week-major grid: cells[week * districts + position].
  std::vector<TraceCell> cells;
  /// Wheat dispatched but not yet delivered at the end of each week.
  std::vector<double> in_flight_kg;
  std::vector<Shipment> shipments;
  std::vector<DistrictStockState> initial;
  std::vector<double> baseline_pct;

  std::size_t district_count() const { return district_ids.size(); }
  const TraceCell& at(int week, std::size_t position) const {
    return cells[static_cast<std::size_t>(week) * district_count() + position];
  }
  TraceCell& at(int week, std::size_t position) {
    return cells[static_cast<std::size_t>(week) * district_count() + position];
  }
  double initial_mass() const;
};

/// Parameters after scenario overrides.
struct EffectiveParams {
  EngineParams engine;
  UndernourishmentModel undernourishment;
  AllocationStrategy allocation = AllocationStrategy::PairSorted;
  bool flood_hits_farm_storage = false;
};

EffectiveParams resolve_params(const SimulationInputs& inputs, const ParameterOverrides& overrides);

/// Runs the scenario week by week:
/// events -> district steps -> requests/surpluses -> shipments -> record.
SimulationTrace run(const ScenarioSpec& spec, const SimulationInputs& inputs);

}  // namespace pdsim
