#include "pdsim/ration_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <unordered_map>

namespace pdsim {

namespace {

constexpr double kCapTolerance = 1e-12;

}  // namespace

const char* to_string(CardSeries series) {
  switch (series) {
    case CardSeries::RuralAay: return "rural_aay";
    case CardSeries::UrbanAay: return "urban_aay";
    case CardSeries::RuralPriority: return "rural_priority";
    case CardSeries::UrbanPriority: return "urban_priority";
  }
  return "unknown";
}

bool AreaEstimate::complete() const {
  return std::all_of(value.begin(), value.end(), [](const auto& v) { return v.has_value(); });
}

CardholderEstimate AreaEstimate::combined(EstimateStage stage) const {
  auto get = [&](CardSeries s) { return (*this)[s].value_or(0.0); };
  return {district_id, get(CardSeries::RuralAay) + get(CardSeries::UrbanAay),
          get(CardSeries::RuralPriority) + get(CardSeries::UrbanPriority), stage};
}

const std::set<int>& AdjacencyList::neighbors(int district_id) const {
  static const std::set<int> kNone;
  auto it = neighbors_.find(district_id);
  return it == neighbors_.end() ? kNone : it->second;
}

ValidationReport AdjacencyList::validate(const DistrictIndex& index) const {
  ValidationReport report;
  for (const auto& [id, nbrs] : neighbors_) {
    if (!index.find(id)) {
      report.violations.push_back({id, "adjacency.id", "district id not in districts", {}});
    }
    for (int n : nbrs) {
      if (n == id) report.violations.push_back({id, "adjacency.neighbor_id", "self-loop", {}});
      if (!index.find(n)) {
        report.violations.push_back(
            {n, "adjacency.neighbor_id", "neighbor of " + std::to_string(id) + " not in districts", {}});
      } else if (!neighbors(n).contains(id)) {
        report.violations.push_back({id, "adjacency",
                                     "edge to " + std::to_string(n) + " has no reverse edge", {}});
      }
    }
  }
  if (index.size() > 1) {
    std::vector<bool> seen(index.size(), false);
    std::queue<int> frontier;
    frontier.push(index.ids().front());
    seen[0] = true;
    while (!frontier.empty()) {
      const int cur = frontier.front();
      frontier.pop();
      for (int n : neighbors(cur)) {
        if (auto pos = index.find(n); pos && !seen[*pos]) {
          seen[*pos] = true;
          frontier.push(n);
        }
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) {
        report.violations.push_back(
            {index.ids()[i], "adjacency", "not connected to district " +
                                              std::to_string(index.ids().front()), {}});
      }
    }
  }
  return report;
}

double StateTotals::total(CardSeries s) const {
  switch (s) {
    case CardSeries::RuralAay: return rural_aay_households;
    case CardSeries::UrbanAay: return urban_aay_households;
    case CardSeries::RuralPriority: return rural_priority_persons;
    case CardSeries::UrbanPriority: return urban_priority_persons;
  }
  return 0.0;
}

bool StateTotals::valid() const {
  return rural_aay_households >= 0 && rural_priority_persons >= 0 && urban_aay_households >= 0 &&
         urban_priority_persons >= 0;
}

std::vector<AreaEstimate> estimate_raw(std::span<const FractionRow> fractions,
                                       std::span<const DistrictRecord> districts) {
  std::unordered_map<int, const FractionRow*> by_id;
  for (const auto& row : fractions) by_id[row.district_id] = &row;

  std::vector<AreaEstimate> out;
  out.reserve(districts.size());
  for (const auto& d : districts) {
    AreaEstimate est{d.id, {}};
    auto it = by_id.find(d.id);
    if (it != by_id.end()) {
      for (CardSeries s : kAllCardSeries) {
        const auto& f = (*it->second)[s];
        if (!f) continue;
        const auto pop = is_rural(s) ? d.rural_population : d.urban_population;
        est[s] = *f * static_cast<double>(pop);
      }
    }
    out.push_back(est);
  }
  return out;
}

std::vector<AreaEstimate> impute_neighbors(std::vector<AreaEstimate> estimates,
                                           const AdjacencyList& adjacency) {
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t i = 0; i < estimates.size(); ++i) pos[estimates[i].district_id] = i;

  std::vector<std::size_t> order(estimates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return estimates[a].district_id < estimates[b].district_id;
  });

  for (CardSeries s : kAllCardSeries) {
    std::size_t missing = 0;
    for (const auto& e : estimates) missing += e[s].has_value() ? 0 : 1;

    while (missing > 0) {
      std::size_t filled = 0;
      for (std::size_t i : order) {
        auto& est = estimates[i];
        if (est[s]) continue;
        double sum = 0.0;
        std::size_t count = 0;
        for (int n : adjacency.neighbors(est.district_id)) {
          auto it = pos.find(n);
          if (it == pos.end()) continue;
          if (const auto& v = estimates[it->second][s]) {
            sum += *v;
            ++count;
          }
        }
        if (count > 0) {
          est[s] = sum / static_cast<double>(count);
          ++filled;
        }
      }
      if (filled == 0) {
        std::string ids;
        for (std::size_t i : order) {
          if (!estimates[i][s]) ids += (ids.empty() ? "" : ", ") + std::to_string(estimates[i].district_id);
        }
        throw NonConvergent(std::string("cannot impute ") + to_string(s) +
                            ": no neighbour values reachable for districts " + ids);
      }
      missing -= filled;
    }
  }
  return estimates;
}

ScaledEstimates scale_to_state(std::span<const AreaEstimate> estimates, const StateTotals& totals,
                               ScaleOptions options) {
  if (!totals.valid()) throw InvalidArgument("state totals must be non-negative");
  std::vector<AreaEstimate> areas(estimates.begin(), estimates.end());
  for (CardSeries s : kAllCardSeries) {
    if (!is_rural(s) && !options.scale_urban) continue;
    std::vector<double> column;
    column.reserve(areas.size());
    for (const auto& a : areas) {
      if (!a[s]) {
        throw InvalidArgument("district " + std::to_string(a.district_id) + " has no " +
                              to_string(s) + " estimate; impute before scaling");
      }
      column.push_back(*a[s]);
    }
    const auto scaled = scale_to_total(column, totals.total(s), to_string(s));
    for (std::size_t i = 0; i < areas.size(); ++i) areas[i][s] = scaled[i];
  }

  ScaledEstimates out;
  out.cardholders.reserve(areas.size());
  for (const auto& a : areas) out.cardholders.push_back(a.combined(EstimateStage::Scaled));
  out.areas = std::move(areas);
  return out;
}

std::vector<CardholderEstimate> cap_and_redistribute(std::span<const CardholderEstimate> estimates,
                                                     std::span<const DistrictRecord> districts) {
  if (estimates.size() != districts.size()) {
    throw InvalidArgument("cardholder estimates and districts differ in length");
  }
  const std::size_t n = estimates.size();
  std::vector<CardholderEstimate> out(estimates.begin(), estimates.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (out[i].district_id != districts[i].id) {
      throw InvalidArgument("cardholder estimates are not aligned with districts at position " +
                            std::to_string(i));
    }
    if (out[i].aay_households < 0 || out[i].priority_persons < 0) {
      throw InvalidArgument("negative cardholder count for district " +
                            std::to_string(out[i].district_id));
    }
    out[i].stage = EstimateStage::Capped;
  }

  double covered_total = 0.0;
  double population_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    covered_total += out[i].covered_persons(districts[i].avg_family_size);
    population_total += static_cast<double>(districts[i].total_population);
  }
  if (covered_total > population_total * (1 + kCapTolerance)) {
    throw Infeasible("cardholders cover " + std::to_string(covered_total) +
                     " persons but the state has only " + std::to_string(population_total));
  }

  auto covered = [&](std::size_t i) { return out[i].covered_persons(districts[i].avg_family_size); };
  auto cap = [&](std::size_t i) { return static_cast<double>(districts[i].total_population); };

  // Every pass saturates at least one more district, so n + 1 passes suffice.
  for (std::size_t pass = 0; pass <= n + 1; ++pass) {
    std::vector<bool> overflowing(n, false);
    double excess_aay = 0.0;
    double excess_priority = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = covered(i);
      if (c > cap(i) * (1 + kCapTolerance)) {
        const double keep = cap(i) / c;
        const double aay = out[i].aay_households * keep;
        const double priority = out[i].priority_persons * keep;
        excess_aay += out[i].aay_households - aay;
        excess_priority += out[i].priority_persons - priority;
        out[i].aay_households = aay;
        out[i].priority_persons = priority;
        overflowing[i] = true;
        any = true;
      }
    }
    if (!any) return out;

    std::vector<std::size_t> receivers;
    for (std::size_t i = 0; i < n; ++i) {
      if (!overflowing[i] && covered(i) < cap(i) * (1 - kCapTolerance)) receivers.push_back(i);
    }
    if (receivers.empty()) {
      throw Infeasible("no district has headroom left for the excess ration cards");
    }
    const double count = static_cast<double>(receivers.size());
    for (std::size_t i : receivers) {
      out[i].aay_households += excess_aay / count;
      out[i].priority_persons += excess_priority / count;
    }
  }
  throw NonConvergent("excess ration-card redistribution did not reach a fixpoint");
}

RationPipelineResult estimate_cardholders(const RationInputs& inputs) {
  static const AdjacencyList kEmpty;
  RationPipelineResult result;
  result.raw = estimate_raw(inputs.fractions, inputs.districts);
  result.imputed = impute_neighbors(result.raw, inputs.adjacency ? *inputs.adjacency : kEmpty);
  result.scaled = scale_to_state(result.imputed, inputs.totals, inputs.options);
  result.capped = cap_and_redistribute(result.scaled.cardholders, inputs.districts);
  return result;
}

}  // namespace pdsim
