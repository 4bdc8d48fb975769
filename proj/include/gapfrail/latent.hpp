#pragma once

#include <cstdint>
#include <vector>

#include "gapfrail/event_data.hpp"

namespace gapfrail {

/// eta[c][k] for cluster c, interval k (0-based). Slots of Type-1 intervals hold
/// kEtaUndefined; slots with delta_prev = 1 hold 0 (Type 2-S) or 1 (Type 2-L).
inline constexpr std::int8_t kEtaUndefined = -1;
using EtaAssignment = std::vector<std::vector<std::int8_t>>;

/// One Monte Carlo imputation of the latent data. `w` is empty when the frailties have
/// been integrated out.
struct LatentDraw {
  EtaAssignment eta;
  std::vector<double> w;

  bool operator==(const LatentDraw&) const = default;
};

/// Eta slots sized to the dataset: kEtaUndefined for Type-1 intervals, `fill` elsewhere.
EtaAssignment make_eta(const Dataset& dataset, std::int8_t fill = 1);

}  // namespace gapfrail
