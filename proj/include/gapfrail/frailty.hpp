// Frailty distributions, cluster sufficient statistics, and posterior samplers.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "gapfrail/event_data.hpp"
#include "gapfrail/params.hpp"
#include "gapfrail/rng.hpp"

namespace gapfrail {

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double frailty_density(double w, const FrailtySpec& spec);
double log_frailty_density(double w, const FrailtySpec& spec);

/// Event weight phi and exposure weight psi of one cluster. An interval counts with
/// weight 1 - delta_prev + eta * delta_prev, i.e. Type-1 and Type 2-L intervals only.
struct ClusterSuffStats {
  double phi = 0.0;
  double psi = 0.0;
};

ClusterSuffStats suff_stats(const GameCluster& cluster, std::span<const std::int8_t> eta,
                            const Type1Params& p1);

/// Exact draw from Gamma(1/theta_w + phi, rate 1/theta_w + psi).
double sample_gamma_posterior(const ClusterSuffStats& stats, double theta_w, Rng& rng);

struct RejectionOptions {
  std::uint64_t max_proposals = 1'000'000;
};

/// Draw from the density proportional to LN-kernel(w) * w^(phi - 1) * exp(-psi w), the
/// posterior of a mean-one log-normal frailty.
///
/// phi >= 1 and psi > 0: propose Gamma(phi, rate psi) and accept with the log-normal
/// kernel exp(-(ln u + s^2/2)^2 / (2 s^2)), which is bounded by 1 and so makes the gamma
/// density an exact envelope once its normalising constant is absorbed.
///
/// Otherwise: propose from the log-normal prior tilted by w^phi (itself log-normal with
/// log-mean -s^2/2 + phi s^2) and accept with probability exp(-u psi). For phi = 0 this is
/// plain prior-proposal rejection; with psi = 0 every proposal is accepted. The printed
/// fallback of proposing Gamma(phi + 1, psi + 1) has no valid bounding constant and is
/// not used.
double sample_lognormal_posterior(const ClusterSuffStats& stats, double sigma_w, Rng& rng,
                                  const RejectionOptions& options = {});

/// Posterior draw for whichever family `spec` names (1 for the degenerate family).
double sample_frailty_posterior(const ClusterSuffStats& stats, const FrailtySpec& spec,
                                Rng& rng);

double sample_prior(const FrailtySpec& spec, Rng& rng);

}  // namespace gapfrail
