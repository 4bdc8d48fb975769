// Closed-form model mathematics: Weibull proportional hazards with a multiplicative
// frailty for Type 1 / Type 2-L gaps, a plain Weibull for Type 2-S gaps, a logistic
// mixture weight, and the three log-likelihoods built from them.
#pragma once

#include <span>
#include <vector>

#include "gapfrail/event_data.hpp"
#include "gapfrail/latent.hpp"
#include "gapfrail/params.hpp"

namespace gapfrail {

double linear_predictor(std::span<const double> z, std::span<const double> coef);

/// w * gamma1 * lambda1 * (lambda1 t)^(gamma1 - 1) * exp(z'beta). Requires t > 0, w > 0.
double hazard1(double t, std::span<const double> z, double w, const Type1Params& p1);
/// exp(-w (lambda1 t)^gamma1 exp(z'beta)). Requires t >= 0, w > 0.
double survival1(double t, std::span<const double> z, double w, const Type1Params& p1);
double hazard2(double t, const Type2Params& p2);
double survival2(double t, const Type2Params& p2);

/// Logistic probability that a Type-2 gap is of the long kind.
double mixture_prob(std::span<const double> z, const MixtureParams& mix);

/// Mean of a Weibull with rate lambda and shape gamma: Gamma(1 + 1/gamma) / lambda.
double weibull_mean(double lambda, double gamma);

/// log(1 / (1 + exp(-x))) without overflow.
double log_sigmoid(double x);

/// Parameter-dependent per-interval quantities with the frailty factored out. Every
/// likelihood in the model is a cheap combination of these.
struct IntervalTerms {
  double log_h1 = 0.0;  // log hazard1 at w = 1
  double cum_h1 = 0.0;  // (lambda1 y)^gamma1 exp(z'beta)
  double log_h2 = 0.0;
  double cum_h2 = 0.0;
  double log_pi = 0.0;
  double log_1m_pi = 0.0;
};

/// terms[c][k] for every interval of the dataset.
using TermTable = std::vector<std::vector<IntervalTerms>>;
TermTable compute_terms(const Dataset& dataset, const ModelParams& params);

/// Per-cluster complete-data log-likelihood given eta and a frailty value, including
/// log f_W(w) (zero for the degenerate family).
double cluster_complete_loglik(const GameCluster& cluster, std::span<const IntervalTerms> terms,
                               std::span<const std::int8_t> eta, double w,
                               const FrailtySpec& frailty);

/// log[ k^k / Gamma(k) * Gamma(k + phi) / (k + psi)^(k + phi) ] with k = 1/theta_w: the
/// gamma normalising constants left after integrating w out of one cluster. Stable as
/// theta_w -> 0, where it tends to -psi.
double log_gamma_frailty_factor(double theta_w, double phi, double psi);

/// Per-cluster gamma-marginal log-likelihood given eta (frailty integrated out).
double cluster_marginal_gamma_loglik(const GameCluster& cluster,
                                     std::span<const IntervalTerms> terms,
                                     std::span<const std::int8_t> eta, double theta_w);

double complete_loglik(const Dataset& dataset, const LatentDraw& latent,
                       const ModelParams& params);
double independence_loglik(const Dataset& dataset, const EtaAssignment& eta,
                           const ModelParams& params);
/// Requires params.frailty to be the gamma family.
double marginal_gamma_loglik(const Dataset& dataset, const EtaAssignment& eta,
                             const ModelParams& params);

}  // namespace gapfrail
