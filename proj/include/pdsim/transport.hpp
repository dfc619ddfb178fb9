#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pdsim/domain.hpp"

namespace pdsim {

enum class AllocationStrategy {
  /// All (holder, requester) pairs in ascending drive time, ties by (from, to).
  PairSorted,
  /// Requesters in ascending order, each drawing from its nearest holders first.
  PerRequester,
};

const char* to_string(AllocationStrategy s);
AllocationStrategy parse_allocation_strategy(const std::string& text);

/// `from` and `to` are district positions (districts are kept in ascending id order).
struct Shipment {
  std::size_t from = 0;
  std::size_t to = 0;
  double kg = 0.0;
  int dispatch_week = 0;
  int arrival_week = 0;

  friend bool operator==(const Shipment&, const Shipment&) = default;
};

using ShipmentPlan = std::vector<Shipment>;

/// Greedy nearest-first clearing of requests against surpluses. Ships
/// min(sum requests, sum surpluses) in total; no capacity limits or losses.
ShipmentPlan allocate(std::span<const double> requests, std::span<const double> surpluses,
                      const DriveTimeMatrix& drive_times, int week, int transport_latency,
                      AllocationStrategy strategy = AllocationStrategy::PairSorted);

}  // namespace pdsim
