#include "pdsim/domain.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace pdsim {

const char* to_string(EstimateStage stage) {
  switch (stage) {
    case EstimateStage::Raw: return "raw";
    case EstimateStage::Imputed: return "imputed";
    case EstimateStage::Scaled: return "scaled";
    case EstimateStage::Capped: return "capped";
  }
  return "unknown";
}

bool DistrictStockState::non_negative() const {
  return produced_wheat >= 0 && farm_storage >= 0 && farm_waste >= 0 && market_purchased >= 0 &&
         procured_storage >= 0 && surplus_wheat >= 0 && imported_procured >= 0 &&
         consumer_purchased >= 0 && consumed >= 0 && weekly_consumption >= 0;
}

std::string format_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::chrono::year_month_day parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw InvalidArgument("expected a YYYY-MM-DD date, got '" + text + "'");
  }
  std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m},
                                   std::chrono::day{d}};
  if (!date.ok()) throw InvalidArgument("not a calendar date: '" + text + "'");
  return date;
}

DriveTimeMatrix::DriveTimeMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
  if (data_.size() != n * n) {
    throw InvalidArgument("drive-time matrix needs " + std::to_string(n * n) + " entries, got " +
                          std::to_string(data_.size()));
  }
}

bool ValidationReport::mentions(int district_id) const {
  for (const auto& v : violations) {
    if (v.district_id && *v.district_id == district_id) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    if (v.district_id) out << "district " << *v.district_id << ": ";
    out << v.field << ": " << v.message << '\n';
  }
  return out.str();
}

ValidationReport validate_dataset(std::span<const DistrictRecord> districts,
                                  const DriveTimeMatrix& matrix) {
  ValidationReport report;
  auto add = [&](std::optional<int> id, std::string field, std::string message) {
    report.violations.push_back({id, std::move(field), std::move(message), std::nullopt});
  };

  if (districts.empty()) add(std::nullopt, "districts", "no districts");

  std::unordered_set<int> seen;
  for (const auto& d : districts) {
    if (!seen.insert(d.id).second) add(d.id, "id", "duplicate district id");
    if (d.rural_population < 0) add(d.id, "rural_population", "negative population");
    if (d.urban_population < 0) add(d.id, "urban_population", "negative population");
    if (d.total_population < 0) add(d.id, "total_population", "negative population");
    if (d.rural_population + d.urban_population != d.total_population) {
      add(d.id, "total_population,rural_population,urban_population",
          "rural + urban (" + std::to_string(d.rural_population + d.urban_population) +
              ") != total (" + std::to_string(d.total_population) + ")");
    }
    if (!(d.avg_family_size > 0) || !std::isfinite(d.avg_family_size)) {
      add(d.id, "avg_family_size", "must be positive and finite");
    }
  }

  const std::size_t n = matrix.size();
  if (n != districts.size()) {
    add(std::nullopt, "drive_times",
        "matrix is " + std::to_string(n) + "x" + std::to_string(n) + " but there are " +
            std::to_string(districts.size()) + " districts");
  }
  auto id_at = [&](std::size_t i) -> std::optional<int> {
    if (i < districts.size()) return districts[i].id;
    return std::nullopt;
  };
  auto cell_violation = [&](std::size_t i, std::size_t j, std::string message) {
    report.violations.push_back({id_at(i),
                                 "drive_time[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                                 std::move(message), std::make_pair(i, j)});
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (matrix(i, i) != 0.0) cell_violation(i, i, "diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      const double v = matrix(i, j);
      if (!std::isfinite(v)) {
        cell_violation(i, j, "not finite");
      } else if (v < 0) {
        cell_violation(i, j, "negative drive time");
      }
      if (j > i && matrix(i, j) != matrix(j, i)) {
        cell_violation(i, j, "asymmetric: " + std::to_string(matrix(i, j)) + " vs " +
                                 std::to_string(matrix(j, i)));
      }
    }
  }
  return report;
}

DistrictIndex::DistrictIndex(std::span<const DistrictRecord> districts) {
  ids_.reserve(districts.size());
  for (std::size_t i = 0; i < districts.size(); ++i) {
    ids_.push_back(districts[i].id);
    positions_.emplace(districts[i].id, i);
  }
}

std::optional<std::size_t> DistrictIndex::find(int id) const {
  auto it = positions_.find(id);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

std::size_t DistrictIndex::at(int id) const {
  if (auto pos = find(id)) return *pos;
  throw UnknownDistrict(id);
}

std::vector<double> scale_to_total(std::span<const double> values, double total,
                                   const std::string& what) {
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  std::vector<double> out(values.begin(), values.end());
  if (sum == 0.0) {
    if (total == 0.0) return out;
    throw ZeroAggregate(what + " sums to zero but its target total is " + std::to_string(total));
  }
  const double factor = total / sum;
  for (double& v : out) v *= factor;
  return out;
}

}  // namespace pdsim
