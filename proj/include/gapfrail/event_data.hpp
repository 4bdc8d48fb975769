// Clustered gap-time data: one cluster per (team, game), one row per interval
// that ends in either a corner kick (delta = 1) or a censoring event.
#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapfrail {

/// Raised for malformed or invalid input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CovariateVector = std::vector<double>;

struct IntervalObservation {
  double y = 0.0;     // gap time in minutes
  int delta = 0;      // 1 = corner observed, 0 = censored
  int delta_prev = 0; // 1 = preceding event was a corner
  CovariateVector z;

  /// The Type-2 mixture indicator exists only after a corner.
  bool eta_defined() const { return delta_prev == 1; }

  bool operator==(const IntervalObservation&) const = default;
};

struct GameCluster {
  std::string team_id;
  std::string game_id;
  std::vector<IntervalObservation> intervals;

  std::size_t size() const { return intervals.size(); }
  bool operator==(const GameCluster&) const = default;
};

struct Dataset {
  std::vector<GameCluster> clusters;
  std::size_t covariate_dim = 0;

  std::size_t interval_count() const;
  std::size_t event_count() const;
  /// Number of intervals with delta_prev = 1.
  std::size_t type2_count() const;

  bool operator==(const Dataset&) const = default;
};

struct Violation {
  std::size_t cluster = 0;  // index into Dataset::clusters
  std::size_t interval = 0; // 1-based k; 0 when the rule concerns the whole cluster
  std::string rule;
};

/// Sets delta_prev from the delta sequence (0 for the first interval of each cluster).
void derive_delta_prev(Dataset& dataset);

/// Checks every structural invariant; an empty result means the dataset is valid.
std::vector<Violation> validate(const Dataset& dataset);

std::string describe(const Dataset& dataset, const Violation& v);

/// Reads `team_id,game_id,k,y,delta,z1..zp` (optionally with a `delta_prev` column,
/// which must agree with the derived value). Rows are grouped by (team_id, game_id) in
/// order of first appearance and sorted by k. Malformed input always throws; with
/// check_rules the first validate() violation throws too.
Dataset load_event_csv(const std::filesystem::path& path, bool check_rules = true);
Dataset parse_event_csv(const std::string& text, const std::string& source = "<string>",
                        bool check_rules = true);

void write_event_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string format_event_csv(const Dataset& dataset);

/// Shortest decimal representation that round-trips through strtod.
std::string format_double(double x);

}  // namespace gapfrail
