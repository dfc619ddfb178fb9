#pragma once

// District-level ration-card estimation.
//
// The pipeline turns census-era card fractions into district cardholder
// counts: multiply fractions by rural/urban populations, fill gaps from
// neighbouring districts, rescale every series to the state totals, add the
// rural and urban parts, and finally clip districts whose implied coverage
// exceeds their population, handing the excess to districts with headroom.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "pdsim/domain.hpp"

namespace pdsim {

enum class CardSeries : std::size_t { RuralAay = 0, UrbanAay = 1, RuralPriority = 2, UrbanPriority = 3 };
inline constexpr std::size_t kCardSeriesCount = 4;
inline constexpr std::array<CardSeries, kCardSeriesCount> kAllCardSeries{
    CardSeries::RuralAay, CardSeries::UrbanAay, CardSeries::RuralPriority,
    CardSeries::UrbanPriority};

const char* to_string(CardSeries series);
inline constexpr bool is_rural(CardSeries s) {
  return s == CardSeries::RuralAay || s == CardSeries::RuralPriority;
}

using MaybeSeries = std::array<std::optional<double>, kCardSeriesCount>;

/// One row of the census fraction table. nullopt marks a missing entry.
struct FractionRow {
  int district_id = 0;
  MaybeSeries fraction{};

  std::optional<double>& operator[](CardSeries s) { return fraction[static_cast<std::size_t>(s)]; }
  const std::optional<double>& operator[](CardSeries s) const {
    return fraction[static_cast<std::size_t>(s)];
  }
};

/// Per-district cardholder estimate split by area and card type.
struct AreaEstimate {
  int district_id = 0;
  MaybeSeries value{};

  std::optional<double>& operator[](CardSeries s) { return value[static_cast<std::size_t>(s)]; }
  const std::optional<double>& operator[](CardSeries s) const {
    return value[static_cast<std::size_t>(s)];
  }
  bool complete() const;
  /// Rural + urban sums; missing parts count as zero.
  CardholderEstimate combined(EstimateStage stage) const;
};

class AdjacencyList {
 public:
  void add(int district_id, int neighbor_id) { neighbors_[district_id].insert(neighbor_id); }
  void add_symmetric(int a, int b) {
    add(a, b);
    add(b, a);
  }
  const std::set<int>& neighbors(int district_id) const;
  const std::map<int, std::set<int>>& edges() const noexcept { return neighbors_; }

  /// Symmetry, self-loops, unknown ids and connectivity.
  ValidationReport validate(const DistrictIndex& index) const;

 private:
  std::map<int, std::set<int>> neighbors_;
};

struct StateTotals {
  double rural_aay_households = 0.0;
  double rural_priority_persons = 0.0;
  double urban_aay_households = 0.0;
  double urban_priority_persons = 0.0;

  double total(CardSeries s) const;
  bool valid() const;
};

struct ScaleOptions {
  /// When false, urban series keep their imputed values.
  bool scale_urban = true;
};

struct ScaledEstimates {
  std::vector<AreaEstimate> areas;
  std::vector<CardholderEstimate> cardholders;
};

/// fraction × (rural|urban) population per district; missing stays missing.
/// Output follows the order of `districts`.
std::vector<AreaEstimate> estimate_raw(std::span<const FractionRow> fractions,
                                       std::span<const DistrictRecord> districts);

/// Fills missing entries with the mean of present neighbour values, sweeping
/// districts in ascending id and reusing values filled earlier in the same
/// sweep. Throws NonConvergent when a sweep fills nothing.
std::vector<AreaEstimate> impute_neighbors(std::vector<AreaEstimate> estimates,
                                           const AdjacencyList& adjacency);

/// Rescales each series to its state total and sums rural + urban per card type.
ScaledEstimates scale_to_state(std::span<const AreaEstimate> estimates, const StateTotals& totals,
                               ScaleOptions options = {});

/// Clips districts whose covered persons exceed total_population and spreads
/// the removed cards equally over districts that still have headroom, until
/// no district overflows. `districts` must be aligned with `estimates`.
std::vector<CardholderEstimate> cap_and_redistribute(std::span<const CardholderEstimate> estimates,
                                                     std::span<const DistrictRecord> districts);

struct RationInputs {
  std::span<const DistrictRecord> districts;
  std::span<const FractionRow> fractions;
  const AdjacencyList* adjacency = nullptr;
  StateTotals totals;
  ScaleOptions options;
};

struct RationPipelineResult {
  std::vector<AreaEstimate> raw;
  std::vector<AreaEstimate> imputed;
  ScaledEstimates scaled;
  std::vector<CardholderEstimate> capped;
};

RationPipelineResult estimate_cardholders(const RationInputs& inputs);

}  // namespace pdsim
