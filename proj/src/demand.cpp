#include "pdsim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace pdsim {

double weekly_demand(const CardholderEstimate& est, const EntitlementPolicy& policy) {
  const double monthly = est.aay_households * policy.aay_kg_per_household_per_month +
                         est.priority_persons * policy.priority_kg_per_person_per_month;
  return monthly * kMonthsPerYear / kWeeksPerYear;
}

std::vector<double> scale_demand_to_state(std::span<const double> demands,
                                          double state_depletion_kg_per_week) {
  if (state_depletion_kg_per_week < 0) throw InvalidArgument("depletion rate must be >= 0");
  return scale_to_total(demands, state_depletion_kg_per_week, "district weekly demand");
}

double clamp_percent(double pct) { return std::clamp(pct, 0.0, 100.0); }

double baseline_undernourished(const CardholderEstimate& est, const UndernourishmentModel& model) {
  if (!(est.priority_persons > 0)) {
    throw DegenerateRatio("district " + std::to_string(est.district_id) +
                          " has no Priority cardholders; AAY/Priority ratio undefined");
  }
  const double ratio = est.aay_households / est.priority_persons;
  return clamp_percent(model.intercept + model.slope * ratio);
}

LineFit fit_undernourishment_line(std::span<const StateObservation> table, bool with_intercept) {
  const std::size_t n = table.size();
  if (n < 2) throw DegenerateDesign("need at least two observations");

  double mean_x = 0.0;
  double mean_y = 0.0;
  if (with_intercept) {
    for (const auto& o : table) {
      mean_x += o.ratio_aay_priority;
      mean_y += o.pct_undernourished;
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
  }

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& o : table) {
    const double dx = o.ratio_aay_priority - mean_x;
    const double dy = o.pct_undernourished - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  // the mean of identical ratios can round away from them, so compare directly
  const bool all_same = std::all_of(table.begin(), table.end(), [&](const StateObservation& o) {
    return o.ratio_aay_priority == table.front().ratio_aay_priority;
  });
  if ((with_intercept && all_same) || !(sxx > 0)) {
    throw DegenerateDesign("all AAY/Priority ratios are identical");
  }

  LineFit fit;
  fit.observations = n;
  fit.model.slope = sxy / sxx;
  fit.model.intercept = with_intercept ? mean_y - fit.model.slope * mean_x : 0.0;

  double sse = 0.0;
  for (const auto& o : table) {
    const double r =
        o.pct_undernourished - (fit.model.intercept + fit.model.slope * o.ratio_aay_priority);
    sse += r * r;
  }
  fit.r_squared = syy > 0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;

  const std::size_t dof = n - (with_intercept ? 2 : 1);
  if (dof == 0) {
    fit.slope_p_value = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double se = std::sqrt(sse / static_cast<double>(dof) / sxx);
    if (se == 0.0) {
      fit.slope_p_value = fit.model.slope == 0.0 ? 1.0 : 0.0;
    } else {
      const double t = std::abs(fit.model.slope / se);
      boost::math::students_t dist(static_cast<double>(dof));
      fit.slope_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
  }
  return fit;
}

double fit_intercept_for_slope(std::span<const StateObservation> table, double slope) {
  if (table.empty()) throw DegenerateDesign("no observations");
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& o : table) {
    sx += o.ratio_aay_priority;
    sy += o.pct_undernourished;
  }
  const double n = static_cast<double>(table.size());
  return sy / n - slope * sx / n;
}

double dynamic_undernourished(double baseline_pct, double unmet_kg, double demand_kg,
                              double cardholder_share, const UndernourishmentModel& model) {
  if (!(demand_kg > 0)) return clamp_percent(baseline_pct);
  const double unmet_share = std::clamp(unmet_kg / demand_kg, 0.0, 1.0);
  const double share = std::clamp(cardholder_share, 0.0, 1.0);
  return clamp_percent(baseline_pct + model.spike_gain * 100.0 * share * unmet_share);
}

}  // namespace pdsim
