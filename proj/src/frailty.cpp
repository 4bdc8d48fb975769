#include "gapfrail/frailty.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "gapfrail/hazard.hpp"

namespace gapfrail {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::domain_error(std::string(what) + " must be > 0 (got " + std::to_string(v) + ")");
}

double lognormal_log_kernel(double w, double sigma) {
  const double d = std::log(w) + 0.5 * sigma * sigma;
  return -d * d / (2.0 * sigma * sigma);
}

}  // namespace

double log_frailty_density(double w, const FrailtySpec& spec) {
  require_positive(w, "frailty value");
  switch (spec.family) {
    case FrailtyFamily::Gamma: {
      require_positive(spec.param, "theta_w");
      const double k = 1.0 / spec.param;
      return k * std::log(k) - std::lgamma(k) + (k - 1.0) * std::log(w) - k * w;
    }
    case FrailtyFamily::LogNormal: {
      const double s = spec.param;
      require_positive(s, "sigma_w");
      return lognormal_log_kernel(w, s) - std::log(w) - std::log(s) -
             0.5 * std::log(2.0 * std::numbers::pi);
    }
    case FrailtyFamily::Degenerate:
      break;
  }
  throw std::domain_error("the degenerate frailty is a point mass and has no density");
}

double frailty_density(double w, const FrailtySpec& spec) {
  return std::exp(log_frailty_density(w, spec));
}

ClusterSuffStats suff_stats(const GameCluster& cluster, std::span<const std::int8_t> eta,
                            const Type1Params& p1) {
  if (eta.size() != cluster.size())
    throw std::invalid_argument("eta slots do not match cluster (" + cluster.team_id + ", " +
                                cluster.game_id + ")");
  ClusterSuffStats s;
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const auto& iv = cluster.intervals[k];
    int weight = 1;
    if (iv.delta_prev == 1) {
      if (eta[k] != 0 && eta[k] != 1)
        throw std::invalid_argument("missing eta for Type-2 interval k=" + std::to_string(k + 1) +
                                    " of (" + cluster.team_id + ", " + cluster.game_id + ")");
      weight = eta[k];
    }
    if (weight == 0) continue;
    s.phi += iv.delta;
    s.psi += std::pow(p1.lambda1 * iv.y, p1.gamma1) * std::exp(linear_predictor(iv.z, p1.beta));
  }
  return s;
}

double sample_gamma_posterior(const ClusterSuffStats& stats, double theta_w, Rng& rng) {
  require_positive(theta_w, "theta_w");
  const double k = 1.0 / theta_w;
  std::gamma_distribution<double> g(k + stats.phi, 1.0 / (k + stats.psi));
  return g(rng);
}

double sample_lognormal_posterior(const ClusterSuffStats& stats, double sigma_w, Rng& rng,
                                  const RejectionOptions& options) {
  require_positive(sigma_w, "sigma_w");
  if (stats.phi < 0.0 || stats.psi < 0.0) throw std::domain_error("phi and psi must be >= 0");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double s2 = sigma_w * sigma_w;

  if (stats.phi >= 1.0 && stats.psi > 0.0) {
    std::gamma_distribution<double> proposal(stats.phi, 1.0 / stats.psi);
    for (std::uint64_t i = 0; i < options.max_proposals; ++i) {
      const double u = proposal(rng);
      if (!(u > 0.0)) continue;
      if (std::log(unif(rng)) < lognormal_log_kernel(u, sigma_w)) return u;
    }
  } else {
    // w^phi times the log-normal prior is log-normal with log-mean shifted by phi*s^2.
    std::normal_distribution<double> log_proposal(-0.5 * s2 + stats.phi * s2, sigma_w);
    for (std::uint64_t i = 0; i < options.max_proposals; ++i) {
      const double u = std::exp(log_proposal(rng));
      if (stats.psi == 0.0 || unif(rng) < std::exp(-u * stats.psi)) return u;
    }
  }
  std::ostringstream os;
  os << "log-normal frailty rejection sampler exceeded " << options.max_proposals
     << " proposals (phi=" << stats.phi << ", psi=" << stats.psi << ", sigma_w=" << sigma_w << ")";
  throw SamplerError(os.str());
}

double sample_frailty_posterior(const ClusterSuffStats& stats, const FrailtySpec& spec,
                                Rng& rng) {
  switch (spec.family) {
    case FrailtyFamily::Gamma: return sample_gamma_posterior(stats, spec.param, rng);
    case FrailtyFamily::LogNormal: return sample_lognormal_posterior(stats, spec.param, rng);
    case FrailtyFamily::Degenerate: break;
  }
  return 1.0;
}

double sample_prior(const FrailtySpec& spec, Rng& rng) {
  switch (spec.family) {
    case FrailtyFamily::Gamma: {
      require_positive(spec.param, "theta_w");
      std::gamma_distribution<double> g(1.0 / spec.param, spec.param);
      return g(rng);
    }
    case FrailtyFamily::LogNormal: {
      require_positive(spec.param, "sigma_w");
      std::normal_distribution<double> n(-0.5 * spec.param * spec.param, spec.param);
      return std::exp(n(rng));
    }
    case FrailtyFamily::Degenerate: break;
  }
  return 1.0;
}

}  // namespace gapfrail
