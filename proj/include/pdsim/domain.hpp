#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdsim/error.hpp"

namespace pdsim {

// All masses are kilograms. Tonnes only appear at file boundaries.
inline constexpr double kKgPerTonne = 1000.0;
inline constexpr double tonnes_to_kg(double t) { return t * kKgPerTonne; }
inline constexpr double kg_to_tonnes(double kg) { return kg / kKgPerTonne; }

struct DistrictRecord {
  int id = 0;
  std::string name;
  std::int64_t total_population = 0;
  std::int64_t rural_population = 0;
  std::int64_t urban_population = 0;
  double avg_family_size = 1.0;

  friend bool operator==(const DistrictRecord&, const DistrictRecord&) = default;
};

enum class EstimateStage { Raw, Imputed, Scaled, Capped };

const char* to_string(EstimateStage stage);

/// AAY cards are counted in households, Priority cards in persons.
struct CardholderEstimate {
  int district_id = 0;
  double aay_households = 0.0;
  double priority_persons = 0.0;
  EstimateStage stage = EstimateStage::Raw;

  double covered_persons(double avg_family_size) const {
    return aay_households * avg_family_size + priority_persons;
  }
};

/// The node stock-and-flow state of one district.
///
/// `surplus_wheat` is an earmark on `procured_storage` (the part above the
/// reserve that may be shipped), so it does not carry mass of its own.
struct DistrictStockState {
  double produced_wheat = 0.0;
  double farm_storage = 0.0;
  double farm_waste = 0.0;
  double market_purchased = 0.0;
  double procured_storage = 0.0;
  double surplus_wheat = 0.0;
  double imported_procured = 0.0;
  double consumer_purchased = 0.0;
  double consumed = 0.0;
  double weekly_consumption = 0.0;

  /// Total wheat mass held in the district, all terminal stocks included.
  double mass() const {
    return produced_wheat + farm_storage + farm_waste + market_purchased + procured_storage +
           imported_procured + consumer_purchased + consumed;
  }

  bool non_negative() const;

  friend bool operator==(const DistrictStockState&, const DistrictStockState&) = default;
};

struct PriceContext {
  double msp = 1.0;
  double msp_last_year = 1.0;
  double market_price = 1.0;
  double market_price_last_year = 1.0;

  bool valid() const {
    return msp > 0 && msp_last_year > 0 && market_price > 0 && market_price_last_year > 0;
  }
};

struct HarvestRecord {
  double last_year_nonwasted_harvest = 0.0;
  double last_year_procured = 0.0;

  bool valid() const {
    return last_year_procured >= 0 && last_year_procured <= last_year_nonwasted_harvest;
  }
};

/// Maps week numbers to dates. Week 0 starts on the anchor date.
struct Calendar {
  std::chrono::year_month_day anchor{std::chrono::year{2019}, std::chrono::April,
                                     std::chrono::day{1}};

  std::chrono::year_month_day date_of(int week) const {
    return std::chrono::year_month_day{std::chrono::sys_days{anchor} +
                                       std::chrono::days{7 * week}};
  }
};

std::string format_date(const std::chrono::year_month_day& date);
/// Parses YYYY-MM-DD; throws InvalidArgument.
std::chrono::year_month_day parse_date(const std::string& text);

/// Square matrix of drive times in minutes, indexed by district position.
class DriveTimeMatrix {
 public:
  DriveTimeMatrix() = default;
  explicit DriveTimeMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  DriveTimeMatrix(std::size_t n, std::vector<double> row_major);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

  friend bool operator==(const DriveTimeMatrix&, const DriveTimeMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct Violation {
  std::optional<int> district_id;
  std::string field;
  std::string message;
  std::optional<std::pair<std::size_t, std::size_t>> cell;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool mentions(int district_id) const;
  std::string to_string() const;

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(ValidationReport report)
      : Error("dataset validation failed:\n" + report.to_string()), report_(std::move(report)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

/// Checks district and drive-time invariants. Matrix rows follow district order.
ValidationReport validate_dataset(std::span<const DistrictRecord> districts,
                                  const DriveTimeMatrix& matrix);

/// Position lookup for district ids.
class DistrictIndex {
 public:
  DistrictIndex() = default;
  explicit DistrictIndex(std::span<const DistrictRecord> districts);

  std::optional<std::size_t> find(int id) const;
  /// Throws UnknownDistrict.
  std::size_t at(int id) const;
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<int>& ids() const noexcept { return ids_; }

 private:
  std::vector<int> ids_;
  std::unordered_map<int, std::size_t> positions_;
};

/// Multiplies `values` by total / sum(values). A zero sum is only accepted
/// for a zero total; otherwise ZeroAggregate names `what`.
std::vector<double> scale_to_total(std::span<const double> values, double total,
                                   const std::string& what);

}  // namespace pdsim
