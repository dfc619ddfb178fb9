#include "pdsim/transport.hpp"

#include <algorithm>
#include <tuple>

namespace pdsim {

const char* to_string(AllocationStrategy s) {
  return s == AllocationStrategy::PairSorted ? "pair_sorted" : "per_requester";
}

AllocationStrategy parse_allocation_strategy(const std::string& text) {
  if (text == "pair_sorted") return AllocationStrategy::PairSorted;
  if (text == "per_requester") return AllocationStrategy::PerRequester;
  throw InvalidArgument("unknown allocation strategy '" + text +
                        "' (expected pair_sorted or per_requester)");
}

namespace {

struct Pair {
  double minutes;
  std::size_t from;
  std::size_t to;
};

}  // namespace

ShipmentPlan allocate(std::span<const double> requests, std::span<const double> surpluses,
                      const DriveTimeMatrix& drive_times, int week, int transport_latency,
                      AllocationStrategy strategy) {
  const std::size_t n = requests.size();
  if (surpluses.size() != n || drive_times.size() != n) {
    throw InvalidArgument("requests, surpluses and drive times must cover the same districts");
  }
  std::vector<std::size_t> holders;
  std::vector<std::size_t> requesters;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(requests[i] >= 0) || !(surpluses[i] >= 0)) {
      throw InvalidArgument("requests and surpluses must be non-negative");
    }
    if (requests[i] > 0 && surpluses[i] > 0) {
      throw InvalidArgument("district at position " + std::to_string(i) +
                            " both requests and offers wheat");
    }
    if (surpluses[i] > 0) holders.push_back(i);
    if (requests[i] > 0) requesters.push_back(i);
  }

  std::vector<double> supply(surpluses.begin(), surpluses.end());
  std::vector<double> need(requests.begin(), requests.end());
  ShipmentPlan plan;
  auto ship = [&](std::size_t from, std::size_t to) {
    const double kg = std::min(supply[from], need[to]);
    if (kg <= 0) return;
    supply[from] -= kg;
    need[to] -= kg;
    plan.push_back({from, to, kg, week, week + transport_latency});
  };

  if (strategy == AllocationStrategy::PairSorted) {
    std::vector<Pair> pairs;
    pairs.reserve(holders.size() * requesters.size());
    for (std::size_t h : holders) {
      for (std::size_t r : requesters) pairs.push_back({drive_times(h, r), h, r});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return std::tie(a.minutes, a.from, a.to) < std::tie(b.minutes, b.from, b.to);
    });
    for (const auto& p : pairs) ship(p.from, p.to);
  } else {
    for (std::size_t r : requesters) {
      std::vector<Pair> sources;
      sources.reserve(holders.size());
      for (std::size_t h : holders) sources.push_back({drive_times(h, r), h, r});
      std::sort(sources.begin(), sources.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.minutes, a.from) < std::tie(b.minutes, b.from);
      });
      for (const auto& p : sources) {
        if (need[r] <= 0) break;
        ship(p.from, r);
      }
    }
  }
  return plan;
}

}  // namespace pdsim
