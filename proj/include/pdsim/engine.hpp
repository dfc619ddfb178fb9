#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pdsim/domain.hpp"

namespace pdsim {

/// Direction of the year-over-year price adjustment on market purchases.
///
/// AsStatedText: a rising MSP pulls wheat away from the market
///   (factor = msp_last/msp * market_price/market_price_last).
/// AsPrintedFormula: the literal product msp/msp_last * market_last/market.
enum class Eq2Convention { AsStatedText, AsPrintedFormula };

const char* to_string(Eq2Convention c);
Eq2Convention parse_eq2_convention(const std::string& text);

struct EngineParams {
  double waste_fraction = 0.05;
  int reserve_weeks = 4;
  std::vector<int> harvest_window{0, 1, 2, 3, 4};
  int transport_latency = 1;
  Eq2Convention eq2_convention = Eq2Convention::AsStatedText;

  /// Throws InvalidArgument.
  void validate() const;
  bool in_harvest(int week) const;
  /// Harvest-window weeks at or after `week`.
  int harvest_weeks_from(int week) const;
};

double price_factor(const PriceContext& prices, Eq2Convention convention);

/// Annual market-purchased wheat: last year's market quantity times the price
/// factor, clamped to [0, available_kg].
double market_split(const HarvestRecord& harvest, const PriceContext& prices,
                    Eq2Convention convention = Eq2Convention::AsStatedText,
                    double available_kg = std::numeric_limits<double>::infinity());

/// Exogenous per-district inputs for one week.
struct DistrictContext {
  HarvestRecord last_year;
  PriceContext prices;
};

/// Every flow moved by one district step.
struct StepDelta {
  double harvest_inflow = 0.0;
  double waste = 0.0;
  double to_market = 0.0;
  double to_procurement = 0.0;
  double consumption = 0.0;
  double unmet = 0.0;
  double arrivals = 0.0;
};

struct StepResult {
  DistrictStockState state;
  StepDelta delta;
};

/// Advances one district by one week:
///  1. harvest inflow (remaining produced wheat spread over the remaining window weeks)
///  2. waste_fraction of the inflow to farm waste
///  3. market / procurement split of the rest
///  4. consumption of min(weekly_consumption, procured_storage)
///  5. arrivals through imported_procured into procured_storage
///  6. surplus earmark recomputed
/// Arrivals land after the week's consumption, so imports serve the next week.
StepResult step_district(const DistrictStockState& state, const DistrictContext& context,
                         const EngineParams& params, int week, double arrivals_kg);

/// Shortfall against the reserve: max(0, reserve_weeks * weekly_consumption - procured).
double compute_request(const DistrictStockState& state, const EngineParams& params);

/// Stock above the reserve: max(0, procured - reserve_weeks * weekly_consumption).
double compute_surplus(const DistrictStockState& state, const EngineParams& params);

}  // namespace pdsim
