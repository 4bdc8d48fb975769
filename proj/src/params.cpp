#include "gapfrail/params.hpp"

#include <cmath>
#include <stdexcept>

namespace gapfrail {

void check_params(const ModelParams& params) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::domain_error(std::string(name) + " must be finite and > 0");
  };
  positive(params.t1.lambda1, "lambda1");
  positive(params.t1.gamma1, "gamma1");
  positive(params.t2.lambda2, "lambda2");
  positive(params.t2.gamma2, "gamma2");
  if (params.frailty.family != FrailtyFamily::Degenerate)
    positive(params.frailty.param, "frailty parameter");
  if (params.mix.alpha.size() != params.t1.beta.size())
    throw std::domain_error("alpha and beta must have the same length");
  if (!std::isfinite(params.mix.alpha0)) throw std::domain_error("alpha0 must be finite");
  for (double b : params.t1.beta)
    if (!std::isfinite(b)) throw std::domain_error("beta must be finite");
  for (double a : params.mix.alpha)
    if (!std::isfinite(a)) throw std::domain_error("alpha must be finite");
}

std::string_view to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::Independence: return "independence";
    case ModelTag::GammaFrailty: return "gamma";
    case ModelTag::LogNormalFrailty: return "lognormal";
  }
  return "?";
}

ModelTag parse_model_tag(std::string_view text) {
  if (text == "independence") return ModelTag::Independence;
  if (text == "gamma" || text == "gamma-frailty") return ModelTag::GammaFrailty;
  if (text == "lognormal" || text == "lognormal-frailty") return ModelTag::LogNormalFrailty;
  throw std::invalid_argument("unknown model '" + std::string(text) + "'");
}

FrailtyFamily family_of(ModelTag tag) {
  switch (tag) {
    case ModelTag::GammaFrailty: return FrailtyFamily::Gamma;
    case ModelTag::LogNormalFrailty: return FrailtyFamily::LogNormal;
    case ModelTag::Independence: break;
  }
  return FrailtyFamily::Degenerate;
}

namespace {
bool has_frailty(ModelTag tag) { return tag != ModelTag::Independence; }
}  // namespace

std::size_t parameter_count(ModelTag tag, std::size_t p) {
  return (has_frailty(tag) ? 1 : 0) + 2 + p + 2 + 1 + p;
}

std::vector<std::string> parameter_names(ModelTag tag, std::size_t p) {
  std::vector<std::string> n;
  if (tag == ModelTag::GammaFrailty) n.push_back("theta_w");
  if (tag == ModelTag::LogNormalFrailty) n.push_back("sigma_w");
  n.push_back("lambda1");
  n.push_back("gamma1");
  for (std::size_t j = 0; j < p; ++j) n.push_back("beta" + std::to_string(j + 1));
  n.push_back("lambda2");
  n.push_back("gamma2");
  n.push_back("alpha0");
  for (std::size_t j = 0; j < p; ++j) n.push_back("alpha" + std::to_string(j + 1));
  return n;
}

Eigen::VectorXd to_natural(const ModelParams& params, ModelTag tag) {
  const std::size_t p = params.covariate_dim();
  Eigen::VectorXd v(static_cast<Eigen::Index>(parameter_count(tag, p)));
  Eigen::Index i = 0;
  if (has_frailty(tag)) v[i++] = params.frailty.param;
  v[i++] = params.t1.lambda1;
  v[i++] = params.t1.gamma1;
  for (double b : params.t1.beta) v[i++] = b;
  v[i++] = params.t2.lambda2;
  v[i++] = params.t2.gamma2;
  v[i++] = params.mix.alpha0;
  for (double a : params.mix.alpha) v[i++] = a;
  return v;
}

std::vector<bool> log_scaled_mask(ModelTag tag, std::size_t p) {
  std::vector<bool> m;
  if (has_frailty(tag)) m.push_back(true);
  m.push_back(true);
  m.push_back(true);
  m.insert(m.end(), p, false);
  m.push_back(true);
  m.push_back(true);
  m.push_back(false);
  m.insert(m.end(), p, false);
  return m;
}

Eigen::VectorXd to_working(const ModelParams& params, ModelTag tag) {
  Eigen::VectorXd v = to_natural(params, tag);
  const auto mask = log_scaled_mask(tag, params.covariate_dim());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) v[i] = std::log(v[i]);
  return v;
}

ModelParams from_working(const Eigen::VectorXd& x, ModelTag tag, std::size_t p) {
  if (static_cast<std::size_t>(x.size()) != parameter_count(tag, p))
    throw std::invalid_argument("working vector has the wrong length");
  ModelParams out;
  Eigen::Index i = 0;
  out.frailty = FrailtySpec::degenerate();
  if (tag == ModelTag::GammaFrailty) out.frailty = FrailtySpec::gamma(std::exp(x[i++]));
  if (tag == ModelTag::LogNormalFrailty) out.frailty = FrailtySpec::lognormal(std::exp(x[i++]));
  out.t1.lambda1 = std::exp(x[i++]);
  out.t1.gamma1 = std::exp(x[i++]);
  out.t1.beta.resize(p);
  for (auto& b : out.t1.beta) b = x[i++];
  out.t2.lambda2 = std::exp(x[i++]);
  out.t2.gamma2 = std::exp(x[i++]);
  out.mix.alpha0 = x[i++];
  out.mix.alpha.resize(p);
  for (auto& a : out.mix.alpha) a = x[i++];
  return out;
}

ModelParams from_natural(const Eigen::VectorXd& v, ModelTag tag, std::size_t p) {
  if (static_cast<std::size_t>(v.size()) != parameter_count(tag, p))
    throw std::invalid_argument("parameter vector has the wrong length");
  ModelParams out;
  Eigen::Index i = 0;
  out.frailty = FrailtySpec::degenerate();
  if (tag == ModelTag::GammaFrailty) out.frailty = FrailtySpec::gamma(v[i++]);
  if (tag == ModelTag::LogNormalFrailty) out.frailty = FrailtySpec::lognormal(v[i++]);
  out.t1.lambda1 = v[i++];
  out.t1.gamma1 = v[i++];
  out.t1.beta.assign(v.data() + i, v.data() + i + static_cast<Eigen::Index>(p));
  i += static_cast<Eigen::Index>(p);
  out.t2.lambda2 = v[i++];
  out.t2.gamma2 = v[i++];
  out.mix.alpha0 = v[i++];
  out.mix.alpha.assign(v.data() + i, v.data() + i + static_cast<Eigen::Index>(p));
  check_params(out);
  return out;
}

}  // namespace gapfrail
