#include "pdsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdsim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::array<Metric, kMetricCount> kMetrics{
    Metric::ProducedWheat,   Metric::FarmStorage,       Metric::FarmWaste,
    Metric::MarketPurchased, Metric::ProcuredStorage,   Metric::SurplusWheat,
    Metric::ImportedProcured, Metric::ConsumerPurchased, Metric::Consumed,
    Metric::WeeklyConsumption, Metric::Request,         Metric::SurplusOffered,
    Metric::ShippedIn,       Metric::ShippedOut,        Metric::Unmet,
    Metric::PctUndernourished, Metric::FloodLoss,
};

constexpr std::array<std::string_view, kMetricCount> kMetricNames{
    "produced_wheat",   "farm_storage",       "farm_waste",   "market_purchased",
    "procured_storage", "surplus_wheat",      "imported_procured", "consumer_purchased",
    "consumed",         "weekly_consumption", "request",      "surplus_offered",
    "shipped_in",       "shipped_out",        "unmet",        "pct_undernourished",
    "flood_loss",
};

void check_week(int week, int horizon, const char* what) {
  if (week < 0 || week >= horizon) {
    throw InvalidArgument(std::string(what) + " week " + std::to_string(week) +
                          " is outside the horizon [0, " + std::to_string(horizon) + ")");
  }
}

}  // namespace

const std::array<Metric, kMetricCount>& all_metrics() { return kMetrics; }

std::string_view metric_name(Metric m) { return kMetricNames[static_cast<std::size_t>(m)]; }

std::optional<Metric> parse_metric(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (kMetricNames[i] == name) return kMetrics[i];
  }
  return std::nullopt;
}

double TraceCell::value(Metric m) const {
  switch (m) {
    case Metric::ProducedWheat: return stocks.produced_wheat;
    case Metric::FarmStorage: return stocks.farm_storage;
    case Metric::FarmWaste: return stocks.farm_waste;
    case Metric::MarketPurchased: return stocks.market_purchased;
    case Metric::ProcuredStorage: return stocks.procured_storage;
    case Metric::SurplusWheat: return stocks.surplus_wheat;
    case Metric::ImportedProcured: return stocks.imported_procured;
    case Metric::ConsumerPurchased: return stocks.consumer_purchased;
    case Metric::Consumed: return stocks.consumed;
    case Metric::WeeklyConsumption: return stocks.weekly_consumption;
    case Metric::Request: return request;
    case Metric::SurplusOffered: return surplus_offered;
    case Metric::ShippedIn: return shipped_in;
    case Metric::ShippedOut: return shipped_out;
    case Metric::Unmet: return unmet;
    case Metric::PctUndernourished: return pct_undernourished;
    case Metric::FloodLoss: return flood_loss;
  }
  return 0.0;
}

void TraceCell::set(Metric m, double v) {
  switch (m) {
    case Metric::ProducedWheat: stocks.produced_wheat = v; break;
    case Metric::FarmStorage: stocks.farm_storage = v; break;
    case Metric::FarmWaste: stocks.farm_waste = v; break;
    case Metric::MarketPurchased: stocks.market_purchased = v; break;
    case Metric::ProcuredStorage: stocks.procured_storage = v; break;
    case Metric::SurplusWheat: stocks.surplus_wheat = v; break;
    case Metric::ImportedProcured: stocks.imported_procured = v; break;
    case Metric::ConsumerPurchased: stocks.consumer_purchased = v; break;
    case Metric::Consumed: stocks.consumed = v; break;
    case Metric::WeeklyConsumption: stocks.weekly_consumption = v; break;
    case Metric::Request: request = v; break;
    case Metric::SurplusOffered: surplus_offered = v; break;
    case Metric::ShippedIn: shipped_in = v; break;
    case Metric::ShippedOut: shipped_out = v; break;
    case Metric::Unmet: unmet = v; break;
    case Metric::PctUndernourished: pct_undernourished = v; break;
    case Metric::FloodLoss: flood_loss = v; break;
  }
}

double SimulationTrace::initial_mass() const {
  double total = 0.0;
  for (const auto& s : initial) total += s.mass();
  return total;
}

void ScenarioSpec::validate(const DistrictIndex& index) const {
  if (horizon_weeks < 0) throw InvalidArgument("horizon_weeks must be >= 0");
  if (!calendar.anchor.ok()) throw InvalidArgument("calendar anchor is not a valid date");
  if (!prices.valid()) throw InvalidArgument("all four prices must be positive");
  if (!(last_year_procured_fraction >= 0 && last_year_procured_fraction <= 1)) {
    throw InvalidArgument("last_year_procured_fraction must be in [0, 1]");
  }
  if (state_production_kg && !(*state_production_kg >= 0)) {
    throw InvalidArgument("state_production must be >= 0");
  }
  if (state_depletion_kg_per_week && !(*state_depletion_kg_per_week >= 0)) {
    throw InvalidArgument("state_depletion must be >= 0");
  }
  for (const auto& event : events) {
    std::visit(Overloaded{
                   [&](const FloodEvent& e) {
                     check_week(e.week, horizon_weeks, "flood");
                     if (e.district_ids.empty()) {
                       throw InvalidArgument("flood event lists no districts");
                     }
                     if (!(e.destroyed_fraction >= 0 && e.destroyed_fraction <= 1)) {
                       throw InvalidArgument("flood destroyed_fraction must be in [0, 1]");
                     }
                     for (int id : e.district_ids) index.at(id);
                   },
                   [&](const MspChangeEvent& e) {
                     check_week(e.effective_week, horizon_weeks, "msp_change");
                     if (!(e.new_msp > 0)) throw InvalidArgument("new_msp must be positive");
                   },
                   [&](const YieldSeedEvent& e) {
                     for (const auto& [id, kg] : e.produced_kg) {
                       index.at(id);
                       if (!(kg >= 0)) throw InvalidArgument("seeded yields must be >= 0");
                     }
                     if (e.state_total_kg && !(*e.state_total_kg >= 0)) {
                       throw InvalidArgument("yield seed state total must be >= 0");
                     }
                   },
               },
               event);
  }
}

std::vector<double> scale_production(std::span<const double> district_yields_kg,
                                     double state_total_kg) {
  if (!(state_total_kg >= 0)) throw InvalidArgument("state production total must be >= 0");
  return scale_to_total(district_yields_kg, state_total_kg, "district production");
}

EventOutcome apply_event(const RunState& state, const ScenarioEvent& event,
                         const DistrictIndex& index, EventOptions options) {
  EventOutcome out{state, std::vector<double>(state.stocks.size(), 0.0)};
  std::visit(Overloaded{
                 [&](const FloodEvent& e) {
                   const double keep = 1.0 - e.destroyed_fraction;
                   for (int id : e.district_ids) {
                     const std::size_t i = index.at(id);
                     auto& s = out.state.stocks[i];
                     double lost = s.procured_storage * e.destroyed_fraction;
                     s.procured_storage *= keep;
                     s.surplus_wheat *= keep;
                     if (options.flood_hits_farm_storage) {
                       lost += s.farm_storage * e.destroyed_fraction;
                       s.farm_storage *= keep;
                     }
                     out.destroyed_kg[i] += lost;
                   }
                 },
                 [&](const MspChangeEvent& e) { out.state.prices.msp = e.new_msp; },
                 [&](const YieldSeedEvent& e) {
                   for (const auto& [id, kg] : e.produced_kg) {
                     out.state.stocks[index.at(id)].produced_wheat = kg;
                   }
                   if (e.state_total_kg) {
                     std::vector<double> produced;
                     produced.reserve(out.state.stocks.size());
                     for (const auto& s : out.state.stocks) produced.push_back(s.produced_wheat);
                     const auto scaled = scale_production(produced, *e.state_total_kg);
                     for (std::size_t i = 0; i < scaled.size(); ++i) {
                       out.state.stocks[i].produced_wheat = scaled[i];
                     }
                   }
                 },
             },
             event);
  return out;
}

EffectiveParams resolve_params(const SimulationInputs& inputs, const ParameterOverrides& o) {
  EffectiveParams p{inputs.engine, inputs.undernourishment, inputs.allocation,
                    inputs.flood_hits_farm_storage};
  if (o.waste_fraction) p.engine.waste_fraction = *o.waste_fraction;
  if (o.reserve_weeks) p.engine.reserve_weeks = *o.reserve_weeks;
  if (o.harvest_window) p.engine.harvest_window = *o.harvest_window;
  if (o.transport_latency) p.engine.transport_latency = *o.transport_latency;
  if (o.eq2_convention) p.engine.eq2_convention = *o.eq2_convention;
  if (o.allocation) p.allocation = *o.allocation;
  if (o.slope) p.undernourishment.slope = *o.slope;
  if (o.intercept) p.undernourishment.intercept = *o.intercept;
  if (o.spike_gain) p.undernourishment.spike_gain = *o.spike_gain;
  if (o.flood_hits_farm_storage) p.flood_hits_farm_storage = *o.flood_hits_farm_storage;
  p.engine.validate();
  if (!std::isfinite(p.undernourishment.slope)) throw InvalidArgument("slope must be finite");
  return p;
}

namespace {

void check_inputs(const SimulationInputs& in) {
  const std::size_t n = in.districts.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (in.districts[i - 1].id >= in.districts[i].id) {
      throw InvalidArgument("districts must be sorted by strictly ascending id");
    }
  }
  if (in.drive_times.size() != n) throw InvalidArgument("drive-time matrix size mismatch");
  if (in.cardholders.size() != n) throw InvalidArgument("cardholder estimates size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (in.cardholders[i].district_id != in.districts[i].id) {
      throw InvalidArgument("cardholder estimates not aligned with districts");
    }
  }
  auto sized = [n](std::size_t size) { return size == 0 || size == n; };
  if (!sized(in.produced_kg.size()) || !sized(in.harvest_history.size()) ||
      !sized(in.initial_procured_kg.size())) {
    throw InvalidArgument("per-district inputs must be empty or match the district count");
  }
  if (!in.policy.valid()) throw InvalidArgument("entitlements must be positive");
}

}  // namespace

SimulationTrace run(const ScenarioSpec& spec, const SimulationInputs& inputs) {
  check_inputs(inputs);
  const DistrictIndex index(inputs.districts);
  spec.validate(index);
  const EffectiveParams params = resolve_params(inputs, spec.overrides);
  const EngineParams& engine = params.engine;
  const std::size_t n = inputs.districts.size();

  // Demand, baseline undernourishment and card coverage per district.
  std::vector<double> demand(n);
  std::vector<double> baseline(n);
  std::vector<double> share(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& card = inputs.cardholders[i];
    demand[i] = weekly_demand(card, inputs.policy);
    baseline[i] = baseline_undernourished(card, params.undernourishment);
    const double pop = static_cast<double>(inputs.districts[i].total_population);
    share[i] = pop > 0 ? std::clamp(card.covered_persons(inputs.districts[i].avg_family_size) / pop,
                                    0.0, 1.0)
                       : 0.0;
  }
  if (spec.state_depletion_kg_per_week) {
    demand = scale_demand_to_state(demand, *spec.state_depletion_kg_per_week);
  }

  RunState state;
  state.prices = spec.prices;
  state.stocks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.stocks[i].produced_wheat = inputs.produced_kg.empty() ? 0.0 : inputs.produced_kg[i];
    state.stocks[i].weekly_consumption = demand[i];
  }
  const EventOptions event_options{params.flood_hits_farm_storage};
  for (const auto& event : spec.events) {
    if (std::holds_alternative<YieldSeedEvent>(event)) {
      state = apply_event(state, event, index, event_options).state;
    }
  }
  if (spec.state_production_kg) {
    std::vector<double> produced(n);
    for (std::size_t i = 0; i < n; ++i) produced[i] = state.stocks[i].produced_wheat;
    produced = scale_production(produced, *spec.state_production_kg);
    for (std::size_t i = 0; i < n; ++i) state.stocks[i].produced_wheat = produced[i];
  }

  std::vector<DistrictContext> contexts(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = state.stocks[i];
    if (!inputs.harvest_history.empty() && inputs.harvest_history[i]) {
      contexts[i].last_year = *inputs.harvest_history[i];
    } else {
      const double nonwasted = s.produced_wheat * (1.0 - engine.waste_fraction);
      contexts[i].last_year = {nonwasted, nonwasted * spec.last_year_procured_fraction};
    }
    const bool has_initial = !inputs.initial_procured_kg.empty() && inputs.initial_procured_kg[i];
    s.procured_storage = has_initial ? *inputs.initial_procured_kg[i]
                                     : engine.reserve_weeks * s.weekly_consumption;
    if (s.procured_storage < 0) throw InvalidArgument("initial procured stock must be >= 0");
    s.surplus_wheat = compute_surplus(s, engine);
  }

  SimulationTrace trace;
  trace.scenario_name = spec.name;
  trace.calendar = spec.calendar;
  trace.horizon_weeks = spec.horizon_weeks;
  trace.district_ids = index.ids();
  trace.initial = state.stocks;
  trace.baseline_pct = baseline;
  trace.cells.resize(static_cast<std::size_t>(spec.horizon_weeks) * n);
  trace.in_flight_kg.reserve(static_cast<std::size_t>(spec.horizon_weeks));

  std::vector<Shipment> pending;
  std::vector<double> requests(n);
  std::vector<double> surpluses(n);
  std::vector<double> inbound(n);

  for (int week = 0; week < spec.horizon_weeks; ++week) {
    state.week = week;
    std::vector<double> flood_loss(n, 0.0);
    for (const auto& event : spec.events) {
      const bool due = std::visit(Overloaded{
                                      [&](const FloodEvent& e) { return e.week == week; },
                                      [&](const MspChangeEvent& e) { return e.effective_week == week; },
                                      [](const YieldSeedEvent&) { return false; },
                                  },
                                  event);
      if (!due) continue;
      auto outcome = apply_event(state, event, index, event_options);
      state = std::move(outcome.state);
      for (std::size_t i = 0; i < n; ++i) flood_loss[i] += outcome.destroyed_kg[i];
    }

    std::vector<double> arrivals(n, 0.0);
    std::erase_if(pending, [&](const Shipment& s) {
      if (s.arrival_week != week) return false;
      arrivals[s.to] += s.kg;
      return true;
    });

    for (auto& c : contexts) c.prices = state.prices;
    for (std::size_t i = 0; i < n; ++i) {
      auto stepped = step_district(state.stocks[i], contexts[i], engine, week, arrivals[i]);
      state.stocks[i] = stepped.state;
      auto& cell = trace.at(week, i);
      cell.unmet = stepped.delta.unmet;
      cell.shipped_in = arrivals[i];
      cell.flood_loss = flood_loss[i];
      cell.pct_undernourished = dynamic_undernourished(
          baseline[i], stepped.delta.unmet, state.stocks[i].weekly_consumption, share[i],
          params.undernourishment);
    }

    std::fill(inbound.begin(), inbound.end(), 0.0);
    for (const auto& s : pending) inbound[s.to] += s.kg;
    for (std::size_t i = 0; i < n; ++i) {
      requests[i] = std::max(0.0, compute_request(state.stocks[i], engine) - inbound[i]);
      surpluses[i] = compute_surplus(state.stocks[i], engine);
    }

    const auto plan = allocate(requests, surpluses, inputs.drive_times, week,
                               engine.transport_latency, params.allocation);
    for (const auto& s : plan) {
      state.stocks[s.from].procured_storage -= s.kg;
      trace.at(week, s.from).shipped_out += s.kg;
      if (s.arrival_week == week) {
        state.stocks[s.to].procured_storage += s.kg;
        trace.at(week, s.to).shipped_in += s.kg;
      } else {
        pending.push_back(s);
      }
    }
    trace.shipments.insert(trace.shipments.end(), plan.begin(), plan.end());

    double in_flight = 0.0;
    for (const auto& s : pending) in_flight += s.kg;
    trace.in_flight_kg.push_back(in_flight);

    for (std::size_t i = 0; i < n; ++i) {
      auto& s = state.stocks[i];
      s.surplus_wheat = compute_surplus(s, engine);
      auto& cell = trace.at(week, i);
      cell.stocks = s;
      cell.request = requests[i];
      cell.surplus_offered = surpluses[i];
    }
  }
  return trace;
}

}  // namespace pdsim
