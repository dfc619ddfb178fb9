#include "pdsim/engine.hpp"

#include <algorithm>
#include <cmath>

namespace pdsim {

const char* to_string(Eq2Convention c) {
  return c == Eq2Convention::AsStatedText ? "as_stated_text" : "as_printed_formula";
}

Eq2Convention parse_eq2_convention(const std::string& text) {
  if (text == "as_stated_text") return Eq2Convention::AsStatedText;
  if (text == "as_printed_formula") return Eq2Convention::AsPrintedFormula;
  throw InvalidArgument("unknown eq2_convention '" + text +
                        "' (expected as_stated_text or as_printed_formula)");
}

void EngineParams::validate() const {
  if (!(waste_fraction >= 0 && waste_fraction < 1)) {
    throw InvalidArgument("waste_fraction must be in [0, 1)");
  }
  if (reserve_weeks < 0) throw InvalidArgument("reserve_weeks must be >= 0");
  if (harvest_window.empty()) throw InvalidArgument("harvest_window must not be empty");
  for (int w : harvest_window) {
    if (w < 0) throw InvalidArgument("harvest_window weeks must be >= 0");
  }
  if (transport_latency < 0) throw InvalidArgument("transport_latency must be >= 0");
}

bool EngineParams::in_harvest(int week) const {
  return std::find(harvest_window.begin(), harvest_window.end(), week) != harvest_window.end();
}

int EngineParams::harvest_weeks_from(int week) const {
  return static_cast<int>(
      std::count_if(harvest_window.begin(), harvest_window.end(), [&](int w) { return w >= week; }));
}

double price_factor(const PriceContext& p, Eq2Convention convention) {
  if (!p.valid()) throw InvalidArgument("all prices must be positive");
  if (convention == Eq2Convention::AsPrintedFormula) {
    return (p.msp / p.msp_last_year) * (p.market_price_last_year / p.market_price);
  }
  return (p.msp_last_year / p.msp) * (p.market_price / p.market_price_last_year);
}

double market_split(const HarvestRecord& harvest, const PriceContext& prices,
                    Eq2Convention convention, double available_kg) {
  if (!harvest.valid()) {
    throw InvalidArgument("last year's procured wheat must lie in [0, non-wasted harvest]");
  }
  const double last_year_market = harvest.last_year_nonwasted_harvest - harvest.last_year_procured;
  const double estimate = last_year_market * price_factor(prices, convention);
  return std::clamp(estimate, 0.0, std::max(0.0, available_kg));
}

StepResult step_district(const DistrictStockState& state, const DistrictContext& context,
                         const EngineParams& params, int week, double arrivals_kg) {
  if (!(arrivals_kg >= 0)) throw InvalidArgument("arrivals must be non-negative");
  StepResult r{state, {}};
  auto& s = r.state;
  auto& d = r.delta;

  if (params.in_harvest(week) && s.produced_wheat > 0) {
    const int remaining = params.harvest_weeks_from(week);
    d.harvest_inflow = s.produced_wheat / remaining;
    s.produced_wheat -= d.harvest_inflow;

    // Farm storage passes the whole inflow on within the week.
    d.waste = params.waste_fraction * d.harvest_inflow;
    s.farm_waste += d.waste;

    const double nonwasted = d.harvest_inflow - d.waste;
    const double window = static_cast<double>(params.harvest_window.size());
    const double annual_market =
        market_split(context.last_year, context.prices, params.eq2_convention);
    d.to_market = std::min(nonwasted, annual_market / window);
    d.to_procurement = nonwasted - d.to_market;
    s.market_purchased += d.to_market;
    s.procured_storage += d.to_procurement;
  }

  d.consumption = std::min(s.weekly_consumption, s.procured_storage);
  d.unmet = s.weekly_consumption - d.consumption;
  // Consumer purchases and imports are pass-through stocks: they empty
  // into consumed / procured_storage within the same week.
  s.procured_storage -= d.consumption;
  s.consumed += d.consumption;

  d.arrivals = arrivals_kg;
  s.procured_storage += arrivals_kg;

  s.surplus_wheat = compute_surplus(s, params);
  return r;
}

double compute_request(const DistrictStockState& state, const EngineParams& params) {
  const double need = params.reserve_weeks * state.weekly_consumption;
  return std::max(0.0, need - state.procured_storage);
}

double compute_surplus(const DistrictStockState& state, const EngineParams& params) {
  const double need = params.reserve_weeks * state.weekly_consumption;
  return std::max(0.0, state.procured_storage - need);
}

}  // namespace pdsim
