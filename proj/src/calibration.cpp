#include "pdsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace pdsim {

using std::chrono::year_month;
using std::chrono::year_month_day;

std::string format_month(year_month month) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(month.year()),
                static_cast<unsigned>(month.month()));
  return buf;
}

year_month parse_month(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u%c", &y, &m, &tail) != 2) {
    throw InvalidArgument("expected a YYYY-MM month, got '" + text + "'");
  }
  year_month ym{std::chrono::year{y}, std::chrono::month{m}};
  if (!ym.ok()) throw InvalidArgument("not a calendar month: '" + text + "'");
  return ym;
}

std::vector<MonthlyPoint> aggregate_to_state_monthly(const SimulationTrace& trace) {
  std::vector<MonthlyPoint> out;
  for (int week = 0; week < trace.horizon_weeks; ++week) {
    const auto date = trace.calendar.date_of(week);
    const year_month month{date.year(), date.month()};
    double total = 0.0;
    for (std::size_t i = 0; i < trace.district_count(); ++i) {
      total += trace.at(week, i).stocks.procured_storage;
    }
    if (!out.empty() && out.back().month == month) {
      out.back().kg = total;
      out.back().week = week;
    } else {
      out.push_back({month, total, week});
    }
  }
  return out;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw LengthMismatch("series need equal length >= 2 (got " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()) + ")");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0;
  double sbb = 0.0;
  double sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw ConstantSeries("correlation undefined for a constant series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

SeriesComparison compare_series(std::span<const double> model, std::span<const double> truth) {
  if (model.size() != truth.size() || model.size() < 2) {
    throw LengthMismatch("model and truth need equal length >= 2 (got " +
                         std::to_string(model.size()) + " and " + std::to_string(truth.size()) +
                         ")");
  }
  SeriesComparison out;
  double sq = 0.0;
  double ape = 0.0;
  std::size_t ape_points = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double err = model[i] - truth[i];
    sq += err * err;
    if (truth[i] != 0.0) {
      ape += std::abs(err / truth[i]);
      ++ape_points;
    }
  }
  out.rmse = std::sqrt(sq / static_cast<double>(model.size()));
  out.mape = ape_points > 0 ? 100.0 * ape / static_cast<double>(ape_points)
                            : std::numeric_limits<double>::quiet_NaN();
  try {
    out.pearson_r = pearson_correlation(model, truth);
  } catch (const ConstantSeries&) {
    out.pearson_r.reset();
  }
  return out;
}

YearMode parse_year_mode(const std::string& text) {
  if (text == "same-year" || text == "same_year") return YearMode::SameYear;
  if (text == "prior-year" || text == "prior_year") return YearMode::PriorYear;
  if (text == "multi-year" || text == "multi_year_average") return YearMode::MultiYearAverage;
  throw InvalidArgument("unknown year mode '" + text +
                        "' (expected same-year, prior-year or multi-year)");
}

double drawdown_rate(std::span<const StoragePoint> series) {
  double drop = 0.0;
  double weeks = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].kg < series[i - 1].kg) {
      const auto days = (std::chrono::sys_days{series[i].date} -
                         std::chrono::sys_days{series[i - 1].date}).count();
      drop += series[i - 1].kg - series[i].kg;
      weeks += static_cast<double>(days) / 7.0;
    }
  }
  return weeks > 0 ? drop / weeks : 0.0;
}

namespace {

double year_rate(std::span<const StoragePoint> series, int year) {
  std::vector<StoragePoint> points;
  for (const auto& p : series) {
    if (static_cast<int>(p.date.year()) == year) points.push_back(p);
  }
  if (points.size() < 2) {
    throw MissingYear("storage series has fewer than two points in " + std::to_string(year));
  }
  std::sort(points.begin(), points.end(), [](const StoragePoint& a, const StoragePoint& b) {
    return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date};
  });
  return drawdown_rate(points);
}

}  // namespace

double depletion_rate_from_year(std::span<const StoragePoint> series, YearMode mode,
                                int target_year, int years_back) {
  switch (mode) {
    case YearMode::SameYear: return year_rate(series, target_year);
    case YearMode::PriorYear: return year_rate(series, target_year - 1);
    case YearMode::MultiYearAverage: {
      if (years_back < 1) throw InvalidArgument("years_back must be >= 1");
      double sum = 0.0;
      for (int y = target_year - years_back; y < target_year; ++y) sum += year_rate(series, y);
      return sum / years_back;
    }
  }
  return 0.0;
}

AlignedSeries align_months(std::span<const MonthlyPoint> model,
                           std::span<const StoragePoint> truth) {
  std::map<year_month, double> truth_by_month;
  for (const auto& p : truth) truth_by_month[year_month{p.date.year(), p.date.month()}] = p.kg;
  AlignedSeries out;
  for (const auto& m : model) {
    auto it = truth_by_month.find(m.month);
    if (it == truth_by_month.end()) continue;
    out.months.push_back(m.month);
    out.model.push_back(m.kg);
    out.truth.push_back(it->second);
  }
  return out;
}

}  // namespace pdsim
