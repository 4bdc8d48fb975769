// Synthetic clustered gap-time data from the full generative model.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gapfrail/event_data.hpp"
#include "gapfrail/params.hpp"
#include "gapfrail/rng.hpp"

namespace gapfrail {

/// Covariates follow fixed rules: z1 = 1 in the first half; z2 = 1 for the home team;
/// z3 (score differential) moves by +-1 at each interior censoring event; z4 (red-card
/// differential) moves by +-1 at an interior censoring event with probability
/// red_card_prob; z5 (decimal odds) is uniform on [odds_min, odds_max] once per
/// team-game. Only the first p of these are kept, p = truth.t1.beta.size() <= 5.
struct SimConfig {
  ModelParams truth;
  int n_games = 233;
  int n_teams = 16;
  double half_length = 45.0;
  double censor_rate = 0.03;  // interior censoring events per minute
  double red_card_prob = 0.05;
  double odds_min = 1.2;
  double odds_max = 6.0;
  std::uint64_t seed = 1;
};

void check_sim_config(const SimConfig& config);

struct TruthRecord {
  std::vector<double> w;                     // per cluster
  std::vector<std::vector<std::int8_t>> eta;  // kEtaUndefined for Type-1 intervals
};

/// Inverse-CDF draw: (1/lambda1) * (E / (w exp(z'beta)))^(1/gamma1), E ~ Exp(1).
double draw_gap_type1(std::span<const double> z, double w, const Type1Params& p1, Rng& rng);
double type1_gap_from_exponential(double e, std::span<const double> z, double w,
                                  const Type1Params& p1);

/// Mixture draw after a corner: eta ~ Bernoulli(pi(z)); eta = 1 uses the Type-1 law with
/// frailty, eta = 0 the Type 2-S Weibull.
std::pair<double, int> draw_gap_type2(std::span<const double> z, double w,
                                      const ModelParams& params, Rng& rng);

std::pair<Dataset, TruthRecord> simulate_dataset(const SimConfig& config);

void write_truth_csv(const Dataset& dataset, const TruthRecord& truth,
                     const std::filesystem::path& path);
std::string format_truth_csv(const Dataset& dataset, const TruthRecord& truth);

/// Table 1 point estimates of the corner-kick application (gamma frailty, p = 5).
ModelParams table1_params();

}  // namespace gapfrail
