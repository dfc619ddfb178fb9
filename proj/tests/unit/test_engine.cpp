#include "doctest.h"

#include <random>

#include "pdsim/engine.hpp"

using namespace pdsim;

namespace {

const PriceContext kFlat{1, 1, 1, 1};

DistrictContext context(double nonwasted, double procured, PriceContext p = kFlat) {
  return {{nonwasted, procured}, p};
}

}  // namespace

TEST_CASE("market split: flat prices reproduce last year's market quantity") {
  CHECK(market_split({100, 40}, kFlat) == 60);
  CHECK(market_split({100, 40}, {2, 2, 3, 3}) == 60);
  CHECK(market_split({100, 40}, kFlat, Eq2Convention::AsPrintedFormula) == 60);
}

TEST_CASE("market split: MSP up 10% sends less to market") {
  const double got = market_split({100, 40}, {1.1, 1, 1, 1});
  CHECK(got == doctest::Approx(60 / 1.1).epsilon(1e-15));
  CHECK(got == doctest::Approx(54.545).epsilon(1e-5));
}

TEST_CASE("market split: market price up 10% sends more to market") {
  CHECK(market_split({100, 40}, {1, 1, 1.1, 1}) == doctest::Approx(66).epsilon(1e-15));
}

TEST_CASE("market split: printed-formula convention inverts the factor") {
  CHECK(market_split({100, 40}, {1.1, 1, 1, 1}, Eq2Convention::AsPrintedFormula) ==
        doctest::Approx(66));
  CHECK(market_split({100, 40}, {1, 1, 1.1, 1}, Eq2Convention::AsPrintedFormula) ==
        doctest::Approx(60 / 1.1));
}

TEST_CASE("market split: clamped to the available harvest") {
  CHECK(market_split({100, 40}, {1, 1, 3, 1}, Eq2Convention::AsStatedText, 150) == 150);
  CHECK(market_split({100, 40}, kFlat, Eq2Convention::AsStatedText, 0) == 0);
  CHECK_THROWS_AS(market_split({100, 140}, kFlat), InvalidArgument);
  CHECK_THROWS_AS(market_split({100, 40}, {0, 1, 1, 1}), InvalidArgument);
}

TEST_CASE("property: procured share weakly rises with MSP and falls with market price") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int k = 0; k < 2000; ++k) {
    const HarvestRecord h{100 * u(rng), 0};
    const HarvestRecord rec{h.last_year_nonwasted_harvest,
                            h.last_year_nonwasted_harvest * (u(rng) / 3.0)};
    const PriceContext p{u(rng), u(rng), u(rng), u(rng)};
    const double cap = 100 * u(rng);
    PriceContext msp_up = p;
    msp_up.msp *= 1 + u(rng);
    PriceContext mkt_up = p;
    mkt_up.market_price *= 1 + u(rng);
    const double base = market_split(rec, p, Eq2Convention::AsStatedText, cap);
    CHECK(market_split(rec, msp_up, Eq2Convention::AsStatedText, cap) <= base);
    CHECK(market_split(rec, mkt_up, Eq2Convention::AsStatedText, cap) >= base);
  }
}

TEST_CASE("step: empty state starves") {
  DistrictStockState s;
  s.weekly_consumption = 30;
  const auto r = step_district(s, context(0, 0), EngineParams{}, 10, 0);
  CHECK(r.delta.unmet == 30);
  CHECK(r.delta.consumption == 0);
  CHECK(r.state == s);
}

TEST_CASE("step: sufficient stock") {
  DistrictStockState s;
  s.procured_storage = 100;
  s.weekly_consumption = 30;
  const auto r = step_district(s, context(0, 0), EngineParams{}, 10, 0);
  CHECK(r.state.consumed == 30);
  CHECK(r.state.procured_storage == 70);
  CHECK(r.delta.unmet == 0);
  CHECK(r.state.surplus_wheat == 0);  // 70 < 4 * 30
}

TEST_CASE("step: one-district toy, all nine stocks by hand") {
  // waste 0.1, window {0, 1}, reserve 2; produced 1000, procured 50, consumption 30/week;
  // last year 800 non-wasted with 300 procured; MSP up 10%; 20 kg arrive this week.
  EngineParams p;
  p.waste_fraction = 0.1;
  p.harvest_window = {0, 1};
  p.reserve_weeks = 2;
  DistrictStockState s;
  s.produced_wheat = 1000;
  s.procured_storage = 50;
  s.weekly_consumption = 30;
  const auto r = step_district(s, context(800, 300, {1.1, 1, 1, 1}), p, 0, 20);
  // inflow 500; waste 50; annual market 500/1.1, this week's half 2500/11;
  // procurement 450 - 2500/11 = 2450/11; procured 50 + 2450/11 - 30 + 20 = 2890/11
  const auto& t = r.state;
  CHECK(t.produced_wheat == 500);
  CHECK(t.farm_storage == 0);
  CHECK(t.farm_waste == doctest::Approx(50).epsilon(1e-15));
  CHECK(t.market_purchased == doctest::Approx(2500.0 / 11).epsilon(1e-15));
  CHECK(t.procured_storage == doctest::Approx(2890.0 / 11).epsilon(1e-15));
  CHECK(t.surplus_wheat == doctest::Approx(2230.0 / 11).epsilon(1e-15));
  CHECK(t.imported_procured == 0);
  CHECK(t.consumer_purchased == 0);
  CHECK(t.consumed == 30);
  CHECK(r.delta.harvest_inflow == 500);
  CHECK(r.delta.arrivals == 20);
  CHECK(r.delta.unmet == 0);

  // week 1 takes the rest of the harvest, week 2 none
  const auto r1 = step_district(t, context(800, 300, {1.1, 1, 1, 1}), p, 1, 0);
  CHECK(r1.state.produced_wheat == 0);
  CHECK(r1.delta.harvest_inflow == 500);
  const auto r2 = step_district(r1.state, context(800, 300, {1.1, 1, 1, 1}), p, 2, 0);
  CHECK(r2.delta.harvest_inflow == 0);
}

TEST_CASE("step: arrivals land after the week's consumption") {
  DistrictStockState s;
  s.procured_storage = 10;
  s.weekly_consumption = 30;
  const auto r = step_district(s, context(0, 0), EngineParams{}, 10, 100);
  CHECK(r.delta.unmet == 20);
  CHECK(r.state.procured_storage == 100);
  CHECK_THROWS_AS(step_district(s, context(0, 0), EngineParams{}, 10, -1), InvalidArgument);
}

TEST_CASE("step: a market quantity larger than the inflow sends everything to market") {
  EngineParams p;
  p.waste_fraction = 0;
  p.harvest_window = {0};
  DistrictStockState s;
  s.produced_wheat = 100;
  const auto r = step_district(s, context(1000, 0), p, 0, 0);
  CHECK(r.delta.to_market == 100);
  CHECK(r.delta.to_procurement == 0);
}

TEST_CASE("step does not mutate its input") {
  DistrictStockState s;
  s.produced_wheat = 500;
  s.procured_storage = 40;
  s.weekly_consumption = 10;
  const DistrictStockState copy = s;
  (void)step_district(s, context(400, 100), EngineParams{}, 0, 5);
  CHECK(s == copy);
}

TEST_CASE("property: per-step mass balance and non-negativity") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    EngineParams p;
    p.waste_fraction = 0.2 * u(rng);
    p.reserve_weeks = static_cast<int>(u(rng) * 8);
    p.eq2_convention = u(rng) < 0.5 ? Eq2Convention::AsStatedText : Eq2Convention::AsPrintedFormula;
    DistrictStockState s;
    s.produced_wheat = 1e6 * u(rng);
    s.procured_storage = 1e4 * u(rng);
    s.consumed = 1e4 * u(rng);
    s.farm_waste = 1e3 * u(rng);
    s.market_purchased = 1e5 * u(rng);
    s.weekly_consumption = 1e3 * u(rng);
    const double nonwasted = 1e6 * u(rng);
    const DistrictContext c{{nonwasted, nonwasted * u(rng)},
                            {0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng)}};
    const int week = static_cast<int>(u(rng) * 8);
    const double arrivals = u(rng) < 0.5 ? 0.0 : 1e3 * u(rng);
    const auto r = step_district(s, c, p, week, arrivals);
    const double before = s.mass();
    const double after = r.state.mass();
    // the harvest only moves mass between stocks; arrivals add to it
    CHECK(std::abs(after - before - arrivals) <= 1e-9 * (before + arrivals));
    CHECK(r.state.non_negative());
    CHECK(r.delta.consumption <= s.procured_storage + 1e-9 * s.procured_storage +
                                     r.delta.to_procurement);
    CHECK(r.delta.unmet >= 0);
  }
}

TEST_CASE("request and surplus") {
  const EngineParams p;  // reserve 4
  DistrictStockState s;
  s.weekly_consumption = 10;
  s.procured_storage = 25;
  CHECK(compute_request(s, p) == 15);
  CHECK(compute_surplus(s, p) == 0);
  s.procured_storage = 100;
  CHECK(compute_request(s, p) == 0);
  CHECK(compute_surplus(s, p) == 60);
  s.procured_storage = 40;
  CHECK(compute_surplus(s, p) == 0);
  CHECK(compute_request(s, p) == 0);
  s.procured_storage = 10;
  CHECK(compute_surplus(s, p) == 0);
  s.weekly_consumption = 0;
  CHECK(compute_request(s, p) == 0);
}

TEST_CASE("engine parameter validation") {
  EngineParams p;
  CHECK_NOTHROW(p.validate());
  p.waste_fraction = 1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.harvest_window.clear();
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.reserve_weeks = -1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  CHECK(parse_eq2_convention("as_printed_formula") == Eq2Convention::AsPrintedFormula);
  CHECK_THROWS_AS(parse_eq2_convention("sideways"), InvalidArgument);
}
