#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdsim/scenario.hpp"

namespace pdsim {

/// State procured storage at the last simulated week of a calendar month.
struct MonthlyPoint {
  std::chrono::year_month month;
  double kg = 0.0;
  int week = 0;
};

std::string format_month(std::chrono::year_month month);
/// Parses YYYY-MM; throws InvalidArgument.
std::chrono::year_month parse_month(const std::string& text);

/// Sums procured_storage over districts at the last week of each month,
/// using the trace calendar. Partial trailing months are included.
std::vector<MonthlyPoint> aggregate_to_state_monthly(const SimulationTrace& trace);

struct SeriesComparison {
  double rmse = 0.0;
  /// Percent; months with zero truth are skipped. NaN if every month is skipped.
  double mape = 0.0;
  /// Absent when either series is constant.
  std::optional<double> pearson_r;
};

/// Throws LengthMismatch for unequal lengths or fewer than two points.
SeriesComparison compare_series(std::span<const double> model, std::span<const double> truth);

/// Throws LengthMismatch or ConstantSeries.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

struct StoragePoint {
  std::chrono::year_month_day date;
  double kg = 0.0;
};

enum class YearMode { SameYear, PriorYear, MultiYearAverage };

YearMode parse_year_mode(const std::string& text);

/// Mean weekly decrease over the strictly decreasing steps of a series.
/// Zero when the series never decreases.
double drawdown_rate(std::span<const StoragePoint> series);

/// Depletion rate (kg/week) for `target_year`: that year, the previous year,
/// or the mean of the `years_back` previous years. Throws MissingYear.
double depletion_rate_from_year(std::span<const StoragePoint> series, YearMode mode,
                                int target_year, int years_back = 3);

struct AlignedSeries {
  std::vector<std::chrono::year_month> months;
  std::vector<double> model;
  std::vector<double> truth;
};

/// Keeps the months present in both series, in model order.
AlignedSeries align_months(std::span<const MonthlyPoint> model,
                           std::span<const StoragePoint> truth);

}  // namespace pdsim
