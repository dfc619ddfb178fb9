#include "doctest.h"

#include <cmath>

#include "pdsim/calibration.hpp"

using namespace pdsim;
using namespace std::chrono;

namespace {

SimulationTrace procured_trace(const std::vector<std::vector<double>>& by_week,
                               year_month_day anchor = 2019y / April / 1d) {
  SimulationTrace t;
  t.calendar.anchor = anchor;
  t.horizon_weeks = static_cast<int>(by_week.size());
  const std::size_t n = by_week.empty() ? 0 : by_week[0].size();
  for (std::size_t i = 0; i < n; ++i) t.district_ids.push_back(static_cast<int>(i) + 1);
  t.cells.resize(by_week.size() * n);
  for (std::size_t w = 0; w < by_week.size(); ++w) {
    for (std::size_t i = 0; i < n; ++i) {
      t.at(static_cast<int>(w), i).stocks.procured_storage = by_week[w][i];
    }
  }
  return t;
}

std::vector<StoragePoint> monthly_year(int year, double start, double step) {
  std::vector<StoragePoint> out;
  for (unsigned m = 1; m <= 12; ++m) {
    out.push_back({year_month_day{std::chrono::year{year}, month{m}, 1d}, start - step * (m - 1)});
  }
  return out;
}

}  // namespace

TEST_CASE("monthly aggregation takes the last week of each month") {
  // 2019-04-01 + 7w: weeks 0-4 in April (1, 8, 15, 22, 29), weeks 5-7 in May
  std::vector<std::vector<double>> weeks;
  for (int w = 0; w < 8; ++w) weeks.push_back({10.0 * w, 1.0});
  const auto m = aggregate_to_state_monthly(procured_trace(weeks));
  REQUIRE(m.size() == 2);
  CHECK(m[0].month == 2019y / April);
  CHECK(m[0].week == 4);
  CHECK(m[0].kg == 41);
  CHECK(m[1].month == 2019y / May);
  CHECK(m[1].week == 7);
  CHECK(m[1].kg == 71);
}

TEST_CASE("monthly aggregation of a constant trace and additivity") {
  const auto flat = aggregate_to_state_monthly(
      procured_trace(std::vector<std::vector<double>>(52, {100.0})));
  CHECK(flat.size() == 12);
  for (const auto& p : flat) CHECK(p.kg == 100);
  const auto split = aggregate_to_state_monthly(
      procured_trace(std::vector<std::vector<double>>(52, {40.0, 60.0})));
  for (const auto& p : split) CHECK(p.kg == 100);
  CHECK(aggregate_to_state_monthly(procured_trace({})).empty());
}

TEST_CASE("compare_series") {
  const std::vector<double> a{1, 2, 3, 4};
  auto same = compare_series(a, a);
  CHECK(same.rmse == 0);
  CHECK(same.mape == 0);
  REQUIRE(same.pearson_r);
  CHECK(*same.pearson_r == doctest::Approx(1.0));

  const std::vector<double> up{11, 12, 13, 14};
  const auto off = compare_series(up, a);
  CHECK(off.rmse == doctest::Approx(10));
  CHECK(off.mape == doctest::Approx(100.0 * (10 + 5 + 10.0 / 3 + 2.5) / 4));
  CHECK(*off.pearson_r == doctest::Approx(1.0));

  const std::vector<double> down{4, 3, 2, 1};
  CHECK(*compare_series(down, a).pearson_r == doctest::Approx(-1.0));

  CHECK_THROWS_AS(compare_series(std::vector<double>{1, 2}, a), LengthMismatch);
  CHECK_THROWS_AS(compare_series(std::vector<double>{1}, std::vector<double>{1}), LengthMismatch);
  CHECK_FALSE(compare_series(std::vector<double>{5, 5, 5, 5}, a).pearson_r.has_value());
  CHECK_THROWS_AS(pearson_correlation(std::vector<double>{5, 5}, std::vector<double>{1, 2}),
                  ConstantSeries);
}

TEST_CASE("MAPE skips months with zero truth") {
  const std::vector<double> model{1, 12, 30}, truth{0, 10, 20};
  const auto c = compare_series(model, truth);
  CHECK(c.mape == doctest::Approx(100.0 * (0.2 + 0.5) / 2));
  const auto all_zero = compare_series(std::vector<double>{1, 2}, std::vector<double>{0, 0});
  CHECK(std::isnan(all_zero.mape));
}

TEST_CASE("Pearson matches a reference value") {
  // scipy.stats.pearsonr
  const std::vector<double> a{1, 2, 4, 7, 11}, b{2, 1, 5, 6, 13};
  CHECK(std::abs(pearson_correlation(a, b) - 0.964444686579764) < 1e-12);
}

TEST_CASE("depletion rate from a storage year") {
  // 520 kg drained evenly over 52 weeks
  const std::vector<StoragePoint> s{{2019y / January / 1d, 1000},
                                    {year_month_day{sys_days{2019y / January / 1d} + days{364}},
                                     480}};
  CHECK(depletion_rate_from_year(s, YearMode::SameYear, 2019) == doctest::Approx(10));
  CHECK(depletion_rate_from_year(s, YearMode::PriorYear, 2020) == doctest::Approx(10));
  CHECK_THROWS_AS(depletion_rate_from_year(s, YearMode::SameYear, 2018), MissingYear);

  auto two = monthly_year(2017, 1000, 10);
  const auto y18 = monthly_year(2018, 1000, 20);
  two.insert(two.end(), y18.begin(), y18.end());
  const double r17 = depletion_rate_from_year(two, YearMode::SameYear, 2017);
  const double r18 = depletion_rate_from_year(two, YearMode::SameYear, 2018);
  CHECK(r18 == doctest::Approx(2 * r17));
  CHECK(depletion_rate_from_year(two, YearMode::MultiYearAverage, 2019, 2) ==
        doctest::Approx((r17 + r18) / 2));
  CHECK(depletion_rate_from_year(two, YearMode::MultiYearAverage, 2018, 1) ==
        doctest::Approx(r17));
  CHECK_THROWS_AS(depletion_rate_from_year(two, YearMode::MultiYearAverage, 2019, 3),
                  MissingYear);
}

TEST_CASE("drawdown ignores refills") {
  const std::vector<StoragePoint> s{{2019y / January / 1d, 100},
                                    {2019y / January / 8d, 90},
                                    {2019y / January / 15d, 200},
                                    {2019y / January / 22d, 180}};
  CHECK(drawdown_rate(s) == doctest::Approx(15));
  const std::vector<StoragePoint> rising{{2019y / January / 1d, 1}, {2019y / January / 8d, 2}};
  CHECK(drawdown_rate(rising) == 0);
}

TEST_CASE("year mode and month parsing") {
  CHECK(parse_year_mode("same-year") == YearMode::SameYear);
  CHECK(parse_year_mode("prior_year") == YearMode::PriorYear);
  CHECK(parse_year_mode("multi-year") == YearMode::MultiYearAverage);
  CHECK_THROWS_AS(parse_year_mode("leap"), InvalidArgument);
  CHECK(parse_month("2019-09") == 2019y / September);
  CHECK(format_month(2019y / September) == "2019-09");
  CHECK_THROWS_AS(parse_month("2019-13"), InvalidArgument);
  CHECK_THROWS_AS(parse_month("2019-09x"), InvalidArgument);
}

TEST_CASE("align_months keeps the shared months in model order") {
  const std::vector<MonthlyPoint> model{{2019y / April, 1, 4}, {2019y / May, 2, 8},
                                        {2019y / June, 3, 12}};
  const std::vector<StoragePoint> truth{{2019y / June / 1d, 30}, {2019y / April / 1d, 10}};
  const auto a = align_months(model, truth);
  REQUIRE(a.months.size() == 2);
  CHECK(a.months[0] == 2019y / April);
  CHECK(a.months[1] == 2019y / June);
  CHECK(a.model == std::vector<double>{1, 3});
  CHECK(a.truth == std::vector<double>{10, 30});
}
