#include "gapfrail/hazard.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gapfrail/frailty.hpp"

namespace gapfrail {

double linear_predictor(std::span<const double> z, std::span<const double> coef) {
  if (z.size() != coef.size())
    throw std::invalid_argument("covariate vector has length " + std::to_string(z.size()) +
                                ", coefficients have length " + std::to_string(coef.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) s += z[j] * coef[j];
  return s;
}

namespace {

void require_time(double t, bool allow_zero) {
  if (!std::isfinite(t) || t < 0.0 || (!allow_zero && t == 0.0))
    throw std::domain_error("time must be " + std::string(allow_zero ? ">= 0" : "> 0") +
                            " (got " + std::to_string(t) + ")");
}

void require_frailty(double w) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::domain_error("frailty value must be > 0 (got " + std::to_string(w) + ")");
}

void require_weibull(double lambda, double gamma) {
  if (!(lambda > 0.0) || !(gamma > 0.0) || !std::isfinite(lambda) || !std::isfinite(gamma))
    throw std::domain_error("Weibull rate and shape must be > 0");
}

}  // namespace

double hazard1(double t, std::span<const double> z, double w, const Type1Params& p1) {
  require_time(t, false);
  require_frailty(w);
  require_weibull(p1.lambda1, p1.gamma1);
  return w * p1.gamma1 * p1.lambda1 * std::pow(p1.lambda1 * t, p1.gamma1 - 1.0) *
         std::exp(linear_predictor(z, p1.beta));
}

double survival1(double t, std::span<const double> z, double w, const Type1Params& p1) {
  require_time(t, true);
  require_frailty(w);
  require_weibull(p1.lambda1, p1.gamma1);
  return std::exp(-w * std::pow(p1.lambda1 * t, p1.gamma1) *
                  std::exp(linear_predictor(z, p1.beta)));
}

double hazard2(double t, const Type2Params& p2) {
  require_time(t, false);
  require_weibull(p2.lambda2, p2.gamma2);
  return p2.gamma2 * p2.lambda2 * std::pow(p2.lambda2 * t, p2.gamma2 - 1.0);
}

double survival2(double t, const Type2Params& p2) {
  require_time(t, true);
  require_weibull(p2.lambda2, p2.gamma2);
  return std::exp(-std::pow(p2.lambda2 * t, p2.gamma2));
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double mixture_prob(std::span<const double> z, const MixtureParams& mix) {
  const double a = mix.alpha0 + linear_predictor(z, mix.alpha);
  return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

double weibull_mean(double lambda, double gamma) {
  require_weibull(lambda, gamma);
  return std::tgamma(1.0 + 1.0 / gamma) / lambda;
}

TermTable compute_terms(const Dataset& dataset, const ModelParams& params) {
  check_params(params);
  const double log_l1 = std::log(params.t1.lambda1);
  const double log_g1 = std::log(params.t1.gamma1);
  const double log_l2 = std::log(params.t2.lambda2);
  const double log_g2 = std::log(params.t2.gamma2);
  const double g1 = params.t1.gamma1;
  const double g2 = params.t2.gamma2;

  TermTable table(dataset.clusters.size());
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c) {
    const auto& ivs = dataset.clusters[c].intervals;
    auto& row = table[c];
    row.resize(ivs.size());
    for (std::size_t k = 0; k < ivs.size(); ++k) {
      const auto& iv = ivs[k];
      require_time(iv.y, false);
      const double log_y = std::log(iv.y);
      const double xb = linear_predictor(iv.z, params.t1.beta);
      const double a = params.mix.alpha0 + linear_predictor(iv.z, params.mix.alpha);
      auto& t = row[k];
      t.log_h1 = log_g1 + log_l1 + (g1 - 1.0) * (log_l1 + log_y) + xb;
      t.cum_h1 = std::exp(g1 * (log_l1 + log_y) + xb);
      t.log_h2 = log_g2 + log_l2 + (g2 - 1.0) * (log_l2 + log_y);
      t.cum_h2 = std::exp(g2 * (log_l2 + log_y));
      t.log_pi = log_sigmoid(a);
      t.log_1m_pi = log_sigmoid(-a);
    }
  }
  return table;
}

namespace {

int eta_at(std::span<const std::int8_t> eta, std::size_t k) {
  if (k >= eta.size() || (eta[k] != 0 && eta[k] != 1))
    throw std::invalid_argument("missing eta for Type-2 interval k=" + std::to_string(k + 1));
  return eta[k];
}

void require_eta_shape(const GameCluster& cluster, std::span<const IntervalTerms> terms,
                       std::span<const std::int8_t> eta) {
  if (terms.size() != cluster.size() || eta.size() != cluster.size())
    throw std::invalid_argument("eta/term slots do not match cluster (" + cluster.team_id +
                                ", " + cluster.game_id + ")");
}

}  // namespace

double cluster_complete_loglik(const GameCluster& cluster, std::span<const IntervalTerms> terms,
                               std::span<const std::int8_t> eta, double w,
                               const FrailtySpec& frailty) {
  require_frailty(w);
  require_eta_shape(cluster, terms, eta);
  const double log_w = std::log(w);
  double total = frailty.family == FrailtyFamily::Degenerate ? 0.0 : log_frailty_density(w, frailty);
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const auto& iv = cluster.intervals[k];
    const auto& t = terms[k];
    const double type1 = (iv.delta == 1 ? log_w + t.log_h1 : 0.0) - w * t.cum_h1;
    if (iv.delta_prev == 0) {
      total += type1;
    } else if (eta_at(eta, k) == 1) {
      total += type1 + t.log_pi;
    } else {
      total += (iv.delta == 1 ? t.log_h2 : 0.0) - t.cum_h2 + t.log_1m_pi;
    }
  }
  return total;
}

double log_gamma_frailty_factor(double theta_w, double phi, double psi) {
  if (!(theta_w > 0.0) || !std::isfinite(theta_w))
    throw std::domain_error("theta_w must be > 0");
  if (phi < 0.0 || psi < 0.0) throw std::domain_error("phi and psi must be >= 0");
  const double k = 1.0 / theta_w;
  if (std::floor(phi) == phi && phi <= 1e6) {
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(phi); ++i) s += std::log(k + i);
    return s - phi * std::log(k + psi) - k * std::log1p(psi / k);
  }
  return k * std::log(k) - std::lgamma(k) + std::lgamma(k + phi) - (k + phi) * std::log(k + psi);
}

double cluster_marginal_gamma_loglik(const GameCluster& cluster,
                                     std::span<const IntervalTerms> terms,
                                     std::span<const std::int8_t> eta, double theta_w) {
  require_eta_shape(cluster, terms, eta);
  double phi = 0.0, psi = 0.0, rest = 0.0;
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const auto& iv = cluster.intervals[k];
    const auto& t = terms[k];
    if (iv.delta_prev == 0 || eta_at(eta, k) == 1) {
      phi += iv.delta;
      psi += t.cum_h1;
      if (iv.delta == 1) rest += t.log_h1;
      if (iv.delta_prev == 1) rest += t.log_pi;
    } else {
      rest += (iv.delta == 1 ? t.log_h2 : 0.0) - t.cum_h2 + t.log_1m_pi;
    }
  }
  return log_gamma_frailty_factor(theta_w, phi, psi) + rest;
}

double complete_loglik(const Dataset& dataset, const LatentDraw& latent,
                       const ModelParams& params) {
  if (latent.eta.size() != dataset.clusters.size() || latent.w.size() != dataset.clusters.size())
    throw std::invalid_argument("latent draw does not cover every cluster");
  const auto terms = compute_terms(dataset, params);
  double total = 0.0;
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c)
    total += cluster_complete_loglik(dataset.clusters[c], terms[c], latent.eta[c], latent.w[c],
                                     params.frailty);
  return total;
}

double independence_loglik(const Dataset& dataset, const EtaAssignment& eta,
                           const ModelParams& params) {
  if (eta.size() != dataset.clusters.size())
    throw std::invalid_argument("eta assignment does not cover every cluster");
  const auto terms = compute_terms(dataset, params);
  const auto none = FrailtySpec::degenerate();
  double total = 0.0;
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c)
    total += cluster_complete_loglik(dataset.clusters[c], terms[c], eta[c], 1.0, none);
  return total;
}

double marginal_gamma_loglik(const Dataset& dataset, const EtaAssignment& eta,
                             const ModelParams& params) {
  if (params.frailty.family != FrailtyFamily::Gamma)
    throw std::invalid_argument("marginal likelihood requires the gamma frailty family");
  if (eta.size() != dataset.clusters.size())
    throw std::invalid_argument("eta assignment does not cover every cluster");
  const auto terms = compute_terms(dataset, params);
  double total = 0.0;
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c)
    total += cluster_marginal_gamma_loglik(dataset.clusters[c], terms[c], eta[c],
                                           params.frailty.param);
  return total;
}

}  // namespace gapfrail
