// Model parameter containers and the mapping to a flat optimisation vector.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gapfrail {

enum class FrailtyFamily { Gamma, LogNormal, Degenerate };

/// Gamma: param is the frailty variance theta_w. LogNormal: param is the log-scale SD
/// sigma_w. Both stochastic families have mean exactly 1. Degenerate: w == 1.
struct FrailtySpec {
  FrailtyFamily family = FrailtyFamily::Degenerate;
  double param = 0.0;

  static FrailtySpec gamma(double theta_w) { return {FrailtyFamily::Gamma, theta_w}; }
  static FrailtySpec lognormal(double sigma_w) { return {FrailtyFamily::LogNormal, sigma_w}; }
  static FrailtySpec degenerate() { return {FrailtyFamily::Degenerate, 0.0}; }

  bool operator==(const FrailtySpec&) const = default;
};

struct Type1Params {
  double lambda1 = 1.0;
  double gamma1 = 1.0;
  std::vector<double> beta;
  bool operator==(const Type1Params&) const = default;
};

struct Type2Params {
  double lambda2 = 1.0;
  double gamma2 = 1.0;
  bool operator==(const Type2Params&) const = default;
};

struct MixtureParams {
  double alpha0 = 0.0;
  std::vector<double> alpha;
  bool operator==(const MixtureParams&) const = default;
};

struct ModelParams {
  FrailtySpec frailty;
  Type1Params t1;
  Type2Params t2;
  MixtureParams mix;

  std::size_t covariate_dim() const { return t1.beta.size(); }
  bool operator==(const ModelParams&) const = default;
};

/// Throws std::domain_error if a positivity or dimension constraint fails.
void check_params(const ModelParams& params);

enum class ModelTag { Independence, GammaFrailty, LogNormalFrailty };

std::string_view to_string(ModelTag tag);
ModelTag parse_model_tag(std::string_view text);
FrailtyFamily family_of(ModelTag tag);

/// Parameters in table order: frailty parameter (frailty models only), lambda1, gamma1,
/// beta1..betap, lambda2, gamma2, alpha0, alpha1..alphap.
std::size_t parameter_count(ModelTag tag, std::size_t p);
std::vector<std::string> parameter_names(ModelTag tag, std::size_t p);

/// Flat natural-scale vector in table order.
Eigen::VectorXd to_natural(const ModelParams& params, ModelTag tag);

/// Working (unconstrained) vector: positive parameters are stored on the log scale.
Eigen::VectorXd to_working(const ModelParams& params, ModelTag tag);
ModelParams from_working(const Eigen::VectorXd& x, ModelTag tag, std::size_t p);
/// Inverse of to_natural; checks the constraints.
ModelParams from_natural(const Eigen::VectorXd& v, ModelTag tag, std::size_t p);
/// True for entries of the working vector that are log-transformed.
std::vector<bool> log_scaled_mask(ModelTag tag, std::size_t p);

}  // namespace gapfrail
