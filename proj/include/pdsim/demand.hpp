#pragma once

#include <span>
#include <vector>

#include "pdsim/domain.hpp"

namespace pdsim {

struct EntitlementPolicy {
  double aay_kg_per_household_per_month = 35.0;
  double priority_kg_per_person_per_month = 5.0;

  bool valid() const {
    return aay_kg_per_household_per_month > 0 && priority_kg_per_person_per_month > 0;
  }
};

/// Linear proxy from the AAY/Priority cardholder ratio to percent undernourished.
struct UndernourishmentModel {
  double slope = 83.67;
  double intercept = 0.0;
  double spike_gain = 1.0;
};

inline constexpr double kMonthsPerYear = 12.0;
inline constexpr double kWeeksPerYear = 52.0;

/// Subsidised wheat entitlement in kg/week (months converted at 12/52).
double weekly_demand(const CardholderEstimate& est, const EntitlementPolicy& policy = {});

/// Throws ZeroAggregate when every demand is zero and the rate is positive.
std::vector<double> scale_demand_to_state(std::span<const double> demands,
                                          double state_depletion_kg_per_week);

double clamp_percent(double pct);

/// Throws DegenerateRatio when the district has no Priority cardholders.
double baseline_undernourished(const CardholderEstimate& est, const UndernourishmentModel& model);

struct StateObservation {
  double ratio_aay_priority = 0.0;
  double pct_undernourished = 0.0;
};

struct LineFit {
  UndernourishmentModel model;
  double slope_p_value = 0.0;  // two-sided t-test on the slope; NaN without residual dof
  double r_squared = 0.0;
  std::size_t observations = 0;
};

/// Ordinary least squares. Throws DegenerateDesign when all ratios coincide
/// (or, without intercept, when all are zero).
LineFit fit_undernourishment_line(std::span<const StateObservation> table,
                                  bool with_intercept = true);

/// Least-squares intercept for a fixed slope: mean(y) - slope * mean(x).
double fit_intercept_for_slope(std::span<const StateObservation> table, double slope);

/// Baseline plus the unmet share of subsidised demand weighted by the share of
/// the population holding cards. Returns the baseline when demand is zero.
double dynamic_undernourished(double baseline_pct, double unmet_kg, double demand_kg,
                              double cardholder_share, const UndernourishmentModel& model);

}  // namespace pdsim
