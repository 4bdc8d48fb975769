// Independent oracles and generators shared by the test programs. Nothing here calls
// into the likelihood code under test; formulas are written out from the model
// definition, and special functions / distributions come from Boost.Math.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "gapfrail/event_data.hpp"
#include "gapfrail/latent.hpp"
#include "gapfrail/params.hpp"
#include "gapfrail/rng.hpp"

namespace oracle {

using gapfrail::FrailtyFamily;
using gapfrail::FrailtySpec;
using gapfrail::GameCluster;
using gapfrail::ModelParams;

// Table 1 of the corner-kick application, typed in independently of the simulator.
inline ModelParams table1() {
  ModelParams p;
  p.frailty = FrailtySpec::gamma(0.247);
  p.t1.lambda1 = 0.021;
  p.t1.gamma1 = 0.924;
  p.t1.beta = {-0.024, 0.172, -0.096, -0.134, -0.019};
  p.t2.lambda2 = 1.463;
  p.t2.gamma2 = 3.542;
  p.mix.alpha0 = 1.638;
  p.mix.alpha = {0.122, 0.296, 0.050, -0.385, 0.076};
  return p;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double log_frailty_pdf(double w, const FrailtySpec& spec) {
  if (spec.family == FrailtyFamily::Gamma) {
    const double k = 1.0 / spec.param;
    return std::log(boost::math::pdf(boost::math::gamma_distribution<double>(k, 1.0 / k), w));
  }
  if (spec.family == FrailtyFamily::LogNormal) {
    const double s = spec.param;
    return std::log(boost::math::pdf(boost::math::lognormal_distribution<double>(-0.5 * s * s, s), w));
  }
  return 0.0;
}

// Product of the displayed per-interval factors: h1^d S1 for Type-1 intervals,
// pi h1^d S1 (eta = 1) or (1 - pi) h2^d S2 (eta = 0) after a corner.
inline double cluster_loglik(const GameCluster& cl, std::span<const std::int8_t> eta, double w,
                             const ModelParams& p, bool with_density) {
  double prod_log = with_density ? log_frailty_pdf(w, p.frailty) : 0.0;
  for (std::size_t k = 0; k < cl.intervals.size(); ++k) {
    const auto& iv = cl.intervals[k];
    const double y = iv.y;
    const double ez = std::exp(dot(iv.z, p.t1.beta));
    const double h1 = w * p.t1.gamma1 * p.t1.lambda1 * std::pow(p.t1.lambda1 * y, p.t1.gamma1 - 1.0) * ez;
    const double log_s1 = -w * std::pow(p.t1.lambda1 * y, p.t1.gamma1) * ez;
    const double h2 = p.t2.gamma2 * p.t2.lambda2 * std::pow(p.t2.lambda2 * y, p.t2.gamma2 - 1.0);
    const double log_s2 = -std::pow(p.t2.lambda2 * y, p.t2.gamma2);
    const double pi = 1.0 / (1.0 + std::exp(-(p.mix.alpha0 + dot(iv.z, p.mix.alpha))));
    // Factors multiplied in log space; the survival terms alone can underflow.
    if (iv.delta_prev == 0)
      prod_log += (iv.delta ? std::log(h1) : 0.0) + log_s1;
    else if (eta[k] == 1)
      prod_log += std::log(pi) + (iv.delta ? std::log(h1) : 0.0) + log_s1;
    else
      prod_log += std::log(1.0 - pi) + (iv.delta ? std::log(h2) : 0.0) + log_s2;
  }
  return prod_log;
}

// log of the integral over w of the complete-data contribution, by adaptive
// Gauss-Kronrod on u = log w after scaling by the integrand's maximum.
inline double cluster_marginal_quadrature(const GameCluster& cl, std::span<const std::int8_t> eta,
                                          const ModelParams& p) {
  auto g = [&](double u) {
    const double w = std::exp(u);
    if (!(w > 0.0) || !std::isfinite(w)) return -std::numeric_limits<double>::infinity();
    return cluster_loglik(cl, eta, w, p, true) + u;
  };
  // Locate the mass on a coarse grid, then integrate adaptively where the integrand
  // exceeds exp(-60) of its peak.
  double gmax = -std::numeric_limits<double>::infinity();
  for (double u = -40.0; u <= 10.0; u += 0.01) gmax = std::max(gmax, g(u));
  double lo = 10.0, hi = -40.0;
  for (double u = -40.0; u <= 10.0; u += 0.01) {
    if (g(u) - gmax > -60.0) {
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
  }
  auto f = [&](double u) {
    const double v = g(u) - gmax;
    return std::isfinite(v) ? std::exp(v) : 0.0;
  };
  const double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo - 0.05, hi + 0.05,
                                                                                15, 1e-13);
  return gmax + std::log(I);
}

// Gamma-marginal cluster log-likelihood in closed form, with Boost's lgamma.
inline double cluster_marginal_closed(const GameCluster& cl, std::span<const std::int8_t> eta,
                                      const ModelParams& p) {
  const double k = 1.0 / p.frailty.param;
  double phi = 0.0, psi = 0.0, rest = 0.0;
  for (std::size_t i = 0; i < cl.intervals.size(); ++i) {
    const auto& iv = cl.intervals[i];
    const double y = iv.y;
    const double pi = 1.0 / (1.0 + std::exp(-(p.mix.alpha0 + dot(iv.z, p.mix.alpha))));
    const bool long_kind = iv.delta_prev == 0 || eta[i] == 1;
    if (iv.delta_prev == 1) rest += std::log(eta[i] == 1 ? pi : 1.0 - pi);
    if (long_kind) {
      const double ez = std::exp(dot(iv.z, p.t1.beta));
      psi += std::pow(p.t1.lambda1 * y, p.t1.gamma1) * ez;
      if (iv.delta) {
        phi += 1.0;
        rest += std::log(p.t1.gamma1 * p.t1.lambda1 * std::pow(p.t1.lambda1 * y, p.t1.gamma1 - 1.0) * ez);
      }
    } else {
      rest += -std::pow(p.t2.lambda2 * y, p.t2.gamma2);
      if (iv.delta)
        rest += std::log(p.t2.gamma2 * p.t2.lambda2 * std::pow(p.t2.lambda2 * y, p.t2.gamma2 - 1.0));
    }
  }
  return k * std::log(k) - boost::math::lgamma(k) + boost::math::lgamma(k + phi) -
         (k + phi) * std::log(k + psi) + rest;
}

// Observed-data log-likelihood of one cluster under gamma frailty: log of the sum over
// every eta pattern of the gamma-marginal likelihood.
inline double cluster_observed_enumerated(const GameCluster& cl, const ModelParams& p) {
  std::vector<std::size_t> slots;
  for (std::size_t k = 0; k < cl.intervals.size(); ++k)
    if (cl.intervals[k].delta_prev == 1) slots.push_back(k);
  std::vector<std::int8_t> eta(cl.intervals.size(), gapfrail::kEtaUndefined);
  std::vector<double> logs;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
    for (std::size_t j = 0; j < slots.size(); ++j) eta[slots[j]] = (mask >> j) & 1 ? 1 : 0;
    logs.push_back(cluster_marginal_closed(cl, eta, p));
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return mx + std::log(s);
}

// Random small cluster: n intervals, uniform gaps, random deltas, covariates of
// dimension p following the corner-kick rules when p == 5.
inline GameCluster random_cluster(gapfrail::Rng& rng, std::size_t n, std::size_t p,
                                  const std::string& id) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GameCluster cl;
  cl.team_id = "T" + id;
  cl.game_id = "G" + id;
  int prev = 0;
  for (std::size_t k = 0; k < n; ++k) {
    gapfrail::IntervalObservation iv;
    iv.y = 0.05 + 30.0 * unif(rng);
    if (unif(rng) < 0.3) iv.y = 0.05 + 2.0 * unif(rng);
    iv.delta = unif(rng) < 0.6 ? 1 : 0;
    iv.delta_prev = prev;
    prev = iv.delta;
    for (std::size_t j = 0; j < p; ++j) {
      double v = unif(rng) < 0.5 ? 1.0 : 0.0;
      if (j == 2 || j == 3) v = std::floor(5.0 * unif(rng)) - 2.0;
      if (j == 4) v = 1.2 + 4.8 * unif(rng);
      iv.z.push_back(v);
    }
    cl.intervals.push_back(std::move(iv));
  }
  return cl;
}

inline gapfrail::Dataset random_dataset(gapfrail::Rng& rng, std::size_t clusters,
                                        std::size_t max_n, std::size_t p) {
  gapfrail::Dataset ds;
  ds.covariate_dim = p;
  std::uniform_int_distribution<std::size_t> len(1, max_n);
  for (std::size_t c = 0; c < clusters; ++c)
    ds.clusters.push_back(random_cluster(rng, len(rng), p, std::to_string(c + 1)));
  return ds;
}

inline gapfrail::EtaAssignment random_eta(gapfrail::Rng& rng, const gapfrail::Dataset& ds) {
  gapfrail::EtaAssignment eta;
  for (const auto& cl : ds.clusters) {
    std::vector<std::int8_t> e;
    for (const auto& iv : cl.intervals)
      e.push_back(iv.delta_prev == 1 ? static_cast<std::int8_t>(rng() & 1) : gapfrail::kEtaUndefined);
    eta.push_back(std::move(e));
  }
  return eta;
}

// Random parameters in a plausible region.
inline ModelParams random_params(gapfrail::Rng& rng, std::size_t p, FrailtySpec frailty) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ModelParams m;
  m.frailty = frailty;
  m.t1.lambda1 = 0.01 + 0.1 * unif(rng);
  m.t1.gamma1 = 0.6 + 0.8 * unif(rng);
  m.t2.lambda2 = 0.5 + 2.0 * unif(rng);
  m.t2.gamma2 = 0.8 + 3.0 * unif(rng);
  m.mix.alpha0 = -1.0 + 3.0 * unif(rng);
  for (std::size_t j = 0; j < p; ++j) {
    m.t1.beta.push_back(-0.3 + 0.6 * unif(rng));
    m.mix.alpha.push_back(-0.3 + 0.6 * unif(rng));
  }
  return m;
}

// One-sample Kolmogorov-Smirnov distance of `x` against `cdf`.
inline double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic Kolmogorov tail P(sqrt(n) D > t).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double t = (sn + 0.12 + 0.11 / sn) * d;
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) s += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * t * t);
  return std::clamp(s, 0.0, 1.0);
}

inline std::pair<double, double> mean_and_se(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double var = ss / static_cast<double>(x.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(x.size()))};
}

inline double variance(const std::vector<double>& x) {
  const double m = mean_and_se(x).first;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// CDF of the density proportional to LN-kernel(w) w^(phi-1) e^(-psi w), by quadrature.
struct LogNormalPosteriorCdf {
  double phi, psi, sigma;
  double norm = 1.0;
  double log_kernel(double w) const {
    const double s2 = sigma * sigma;
    const double l = std::log(w) + 0.5 * s2;
    return -l * l / (2.0 * s2) + (phi - 1.0) * std::log(w) - psi * w;
  }
  double lmax = 0.0;
  LogNormalPosteriorCdf(double ph, double ps, double s) : phi(ph), psi(ps), sigma(s) {
    lmax = -1e300;
    for (double u = -15; u < 8; u += 0.01) lmax = std::max(lmax, log_kernel(std::exp(u)));
    norm = mass(std::numeric_limits<double>::infinity());
  }
  double mass(double upper) const {
    // Integrate over u = log w.
    auto f = [&](double u) {
      const double w = std::exp(u);
      return w > 0.0 && std::isfinite(w) ? std::exp(log_kernel(w) + u - lmax) : 0.0;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, -std::numeric_limits<double>::infinity(), std::log(upper), 20, 1e-12);
  }
  double operator()(double w) const { return mass(w) / norm; }
};

}  // namespace oracle
