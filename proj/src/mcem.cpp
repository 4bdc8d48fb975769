#include "gapfrail/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gapfrail/frailty.hpp"
#include "gapfrail/optimize.hpp"
#include "gapfrail/rng.hpp"
#include "parallel.hpp"

namespace gapfrail {

void check_config(const MCEMConfig& c) {
  if (c.M0 < 1 || c.M_max < 1 || c.M_final < 1) throw std::invalid_argument("sample sizes must be >= 1");
  if (!(c.M_growth >= 1.0)) throw std::invalid_argument("M_growth must be >= 1");
  if (!(c.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (c.window < 1) throw std::invalid_argument("window must be >= 1");
  if (c.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (c.gibbs_sweeps < 1) throw std::invalid_argument("gibbs_sweeps must be >= 1");
  if (c.threads < 0) throw std::invalid_argument("threads must be >= 0");
}

int sample_size(const MCEMConfig& config, int iteration) {
  const double m = std::round(config.M0 * std::pow(config.M_growth, iteration));
  return static_cast<int>(std::min<double>(m, config.M_max));
}

double eta_probability(const IntervalTerms& t, int delta, double w) {
  if (!(w > 0.0)) throw std::domain_error("frailty value must be > 0");
  const double lp1 = t.log_pi + (delta == 1 ? std::log(w) + t.log_h1 : 0.0) - w * t.cum_h1;
  const double lp2 = t.log_1m_pi + (delta == 1 ? t.log_h2 : 0.0) - t.cum_h2;
  return 1.0 / (1.0 + std::exp(lp2 - lp1));
}

double eta_probability(const IntervalObservation& interval, double w, const ModelParams& params) {
  if (interval.delta_prev != 1)
    throw std::invalid_argument("eta is only defined for intervals that follow a corner");
  Dataset one;
  one.covariate_dim = interval.z.size();
  one.clusters.push_back({"", "", {interval}});
  const auto terms = compute_terms(one, params);
  return eta_probability(terms[0][0], interval.delta, w);
}

namespace {

ClusterSuffStats stats_from_terms(const GameCluster& cluster, std::span<const IntervalTerms> terms,
                                  std::span<const std::int8_t> eta) {
  ClusterSuffStats s;
  for (std::size_t k = 0; k < cluster.size(); ++k) {
    const auto& iv = cluster.intervals[k];
    if (iv.delta_prev == 1 && eta[k] != 1) continue;
    s.phi += iv.delta;
    s.psi += terms[k].cum_h1;
  }
  return s;
}

void check_chain_shape(const Dataset& dataset, const LatentDraw& d) {
  if (d.eta.size() != dataset.clusters.size())
    throw std::invalid_argument("previous draw does not cover every cluster");
  for (std::size_t c = 0; c < d.eta.size(); ++c)
    if (d.eta[c].size() != dataset.clusters[c].size())
      throw std::invalid_argument("previous draw has the wrong number of eta slots");
}

std::vector<LatentDraw> e_step(const Dataset& dataset, const ModelParams& params,
                               const std::vector<LatentDraw>& prev, int M,
                               const EStepOptions& options, bool keep_w) {
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  if (prev.empty()) throw std::invalid_argument("E-step needs at least one previous draw");
  for (const auto& d : prev) check_chain_shape(dataset, d);
  const auto terms = compute_terms(dataset, params);
  const std::size_t C = dataset.clusters.size();

  std::vector<LatentDraw> out(static_cast<std::size_t>(M));
  detail::parallel_for(out.size(), options.threads, [&](std::size_t m) {
    LatentDraw d;
    d.eta = prev[m % prev.size()].eta;
    if (keep_w) d.w.assign(C, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t c = 0; c < C; ++c) {
      const auto& cl = dataset.clusters[c];
      Rng rng = make_stream(options.seed, {options.pass, m, c});
      double w = 1.0;
      for (int sweep = 0; sweep < options.gibbs_sweeps; ++sweep) {
        if (params.frailty.family != FrailtyFamily::Degenerate)
          w = sample_frailty_posterior(stats_from_terms(cl, terms[c], d.eta[c]), params.frailty, rng);
        for (std::size_t k = 0; k < cl.size(); ++k) {
          if (cl.intervals[k].delta_prev != 1) continue;
          const double p = eta_probability(terms[c][k], cl.intervals[k].delta, w);
          d.eta[c][k] = unif(rng) < p ? 1 : 0;
        }
      }
      if (keep_w) d.w[c] = w;
    }
    out[m] = std::move(d);
  });
  return out;
}

}  // namespace

std::vector<LatentDraw> initial_draws(const Dataset& dataset, const ModelParams& params, int M,
                                      const EStepOptions& options) {
  ModelParams no_frailty = params;
  no_frailty.frailty = FrailtySpec::degenerate();
  LatentDraw seed_draw{make_eta(dataset, 1), std::vector<double>(dataset.clusters.size(), 1.0)};
  EStepOptions opt = options;
  opt.gibbs_sweeps = 1;
  return e_step(dataset, no_frailty, {seed_draw}, M, opt, true);
}

std::vector<LatentDraw> mce_step_general(const Dataset& dataset, const ModelParams& params,
                                         const std::vector<LatentDraw>& prev_draws, int M,
                                         const EStepOptions& options) {
  return e_step(dataset, params, prev_draws, M, options, true);
}

std::vector<LatentDraw> mce_step_gamma(const Dataset& dataset, const ModelParams& params,
                                       const std::vector<LatentDraw>& prev_draws, int M,
                                       const EStepOptions& options) {
  if (params.frailty.family != FrailtyFamily::Gamma)
    throw std::invalid_argument("mce_step_gamma requires the gamma frailty family");
  return e_step(dataset, params, prev_draws, M, options, false);
}

double draw_loglik(const Dataset& dataset, const TermTable& terms, const LatentDraw& draw,
                   const ModelParams& params, ModelTag tag) {
  double total = 0.0;
  const std::size_t C = dataset.clusters.size();
  switch (tag) {
    case ModelTag::Independence: {
      const auto none = FrailtySpec::degenerate();
      for (std::size_t c = 0; c < C; ++c)
        total += cluster_complete_loglik(dataset.clusters[c], terms[c], draw.eta[c], 1.0, none);
      break;
    }
    case ModelTag::GammaFrailty:
      for (std::size_t c = 0; c < C; ++c)
        total += cluster_marginal_gamma_loglik(dataset.clusters[c], terms[c], draw.eta[c],
                                               params.frailty.param);
      break;
    case ModelTag::LogNormalFrailty:
      if (draw.w.size() != C) throw std::invalid_argument("draw has no frailty values");
      for (std::size_t c = 0; c < C; ++c)
        total += cluster_complete_loglik(dataset.clusters[c], terms[c], draw.eta[c], draw.w[c],
                                         params.frailty);
      break;
  }
  return total;
}

std::vector<double> draw_logliks(const Dataset& dataset, const std::vector<LatentDraw>& draws,
                                 const ModelParams& params, ModelTag tag) {
  const auto terms = compute_terms(dataset, params);
  std::vector<double> out(draws.size());
  for (std::size_t m = 0; m < draws.size(); ++m)
    out[m] = draw_loglik(dataset, terms, draws[m], params, tag);
  return out;
}

QTilde::QTilde(const Dataset& dataset, const std::vector<LatentDraw>& draws, ModelTag tag)
    : dataset_(&dataset), tag_(tag), draw_count_(draws.size()) {
  if (draws.empty()) throw std::invalid_argument("Q-tilde needs at least one draw");
  for (const auto& d : draws) check_chain_shape(dataset, d);
  const std::size_t C = dataset.clusters.size();
  const double inv_m = 1.0 / static_cast<double>(draws.size());
  const bool with_w = tag == ModelTag::LogNormalFrailty;
  if (with_w)
    for (const auto& d : draws)
      if (d.w.size() != C) throw std::invalid_argument("draws carry no frailty values");

  eta_mean_.resize(C);
  if (tag == ModelTag::GammaFrailty) patterns_.resize(C);
  if (with_w) {
    weight_w_mean_.resize(C);
    weight_logw_mean_.resize(C);
    logw_mean_.assign(C, 0.0);
    logw2_mean_.assign(C, 0.0);
    w_mean_.assign(C, 0.0);
  }

  for (std::size_t c = 0; c < C; ++c) {
    const auto& ivs = dataset.clusters[c].intervals;
    const std::size_t n = ivs.size();
    eta_mean_[c].assign(n, 0.0);
    if (with_w) {
      weight_w_mean_[c].assign(n, 0.0);
      weight_logw_mean_[c].assign(n, 0.0);
    }
    std::map<std::vector<std::uint32_t>, std::size_t> counts;
    double base_phi = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (ivs[k].delta_prev == 0) base_phi += ivs[k].delta;

    for (const auto& d : draws) {
      const double w = with_w ? d.w[c] : 1.0;
      const double log_w = std::log(w);
      std::vector<std::uint32_t> key;
      for (std::size_t k = 0; k < n; ++k) {
        const double weight = ivs[k].delta_prev == 0 ? 1.0 : static_cast<double>(d.eta[c][k] == 1);
        eta_mean_[c][k] += weight;
        if (with_w) {
          weight_w_mean_[c][k] += weight * w;
          weight_logw_mean_[c][k] += weight * log_w;
        }
        if (ivs[k].delta_prev == 1 && d.eta[c][k] == 1) key.push_back(static_cast<std::uint32_t>(k));
      }
      if (with_w) {
        logw_mean_[c] += log_w;
        logw2_mean_[c] += log_w * log_w;
        w_mean_[c] += w;
      }
      if (tag == ModelTag::GammaFrailty) ++counts[key];
    }
    for (std::size_t k = 0; k < n; ++k) {
      eta_mean_[c][k] *= inv_m;
      if (with_w) {
        weight_w_mean_[c][k] *= inv_m;
        weight_logw_mean_[c][k] *= inv_m;
      }
    }
    if (with_w) {
      logw_mean_[c] *= inv_m;
      logw2_mean_[c] *= inv_m;
      w_mean_[c] *= inv_m;
    }
    for (auto& [key, count] : counts) {
      Pattern pat;
      pat.long_intervals = key;
      pat.phi = base_phi;
      for (auto k : key) pat.phi += ivs[k].delta;
      pat.weight = static_cast<double>(count) * inv_m;
      patterns_[c].push_back(std::move(pat));
    }
  }
}

double QTilde::operator()(const ModelParams& params) const {
  const auto terms = compute_terms(*dataset_, params);
  const std::size_t C = dataset_->clusters.size();
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const auto& ivs = dataset_->clusters[c].intervals;
    const auto& tc = terms[c];
    double sum = 0.0;
    double base_psi = 0.0;
    for (std::size_t k = 0; k < ivs.size(); ++k) {
      const auto& iv = ivs[k];
      const auto& t = tc[k];
      const double a = eta_mean_[c][k];
      switch (tag_) {
        case ModelTag::Independence:
          sum += a * ((iv.delta == 1 ? t.log_h1 : 0.0) - t.cum_h1);
          break;
        case ModelTag::GammaFrailty:
          if (iv.delta == 1) sum += a * t.log_h1;
          if (iv.delta_prev == 0) base_psi += t.cum_h1;
          break;
        case ModelTag::LogNormalFrailty:
          if (iv.delta == 1) sum += weight_logw_mean_[c][k] + a * t.log_h1;
          sum -= weight_w_mean_[c][k] * t.cum_h1;
          break;
      }
      if (iv.delta_prev == 1) {
        sum += (1.0 - a) * ((iv.delta == 1 ? t.log_h2 : 0.0) - t.cum_h2) + a * t.log_pi +
               (1.0 - a) * t.log_1m_pi;
      }
    }
    if (tag_ == ModelTag::GammaFrailty) {
      for (const auto& pat : patterns_[c]) {
        double psi = base_psi;
        for (auto k : pat.long_intervals) psi += tc[k].cum_h1;
        sum += pat.weight * log_gamma_frailty_factor(params.frailty.param, pat.phi, psi);
      }
    } else if (tag_ == ModelTag::LogNormalFrailty) {
      const double s = params.frailty.param, s2 = s * s;
      sum += -(logw2_mean_[c] + s2 * logw_mean_[c] + 0.25 * s2 * s2) / (2.0 * s2) - logw_mean_[c] -
             std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    total += sum;
  }
  return total;
}

double QTilde::at_working(const Eigen::VectorXd& x) const {
  return (*this)(from_working(x, tag_, dataset_->covariate_dim));
}

MStepResult m_step(const Dataset& dataset, const std::vector<LatentDraw>& draws, ModelTag tag,
                   const ModelParams& start, const MStepOptions& options) {
  if (draws.empty()) throw std::invalid_argument("M-step needs at least one draw");
  const QTilde q(dataset, draws, tag);
  const Eigen::VectorXd x0 = to_working(start, tag);
  const auto mask = log_scaled_mask(tag, dataset.covariate_dim);

  OptimizeOptions opt;
  opt.grad_tol = options.grad_tol;
  opt.max_evals = options.max_evals;
  opt.lower.resize(x0.size());
  opt.upper.resize(x0.size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double b = mask[static_cast<std::size_t>(i)] ? options.log_bound : 50.0;
    opt.lower[i] = -b;
    opt.upper[i] = b;
  }

  auto objective = [&](const Eigen::VectorXd& x) {
    try {
      return q.at_working(x);
    } catch (const std::domain_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  MStepResult r;
  r.q_start = objective(x0);
  if (!std::isfinite(r.q_start)) {
    std::ostringstream os;
    os << "Q-tilde is not finite at the starting parameters " << to_natural(start, tag).transpose();
    throw NumericalError(os.str());
  }
  OptimizeResult res;
  try {
    res = maximize_bfgs(objective, x0, opt);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("M-step failed: ") + e.what());
  }
  r.evaluations = res.evaluations;
  r.grad_norm = res.grad_norm;
  r.converged = res.converged && !res.at_bound;
  r.at_boundary = res.at_bound;
  // The gradient test can pass in the interior along a direction that keeps rising
  // ever more slowly towards a bound (a rate driven to 0, say). Probe the bounds.
  if (r.converged) {
    Eigen::VectorXd probe = res.x;
    for (Eigen::Index i = 0; i < probe.size() && !r.at_boundary; ++i) {
      for (double b : {opt.lower[i], opt.upper[i]}) {
        probe[i] = b;
        if (objective(probe) >= res.value - 1e-6) r.at_boundary = true;
      }
      probe[i] = res.x[i];
    }
    r.converged = !r.at_boundary;
  }
  if (res.value >= r.q_start) {
    r.params = from_working(res.x, tag, dataset.covariate_dim);
    r.q_value = res.value;
  } else {
    r.params = start;
    r.q_value = r.q_start;
  }
  return r;
}

ModelParams default_init(const Dataset& dataset, ModelTag tag) {
  const std::size_t p = dataset.covariate_dim;
  double t1_events = 0.0, t1_exposure = 0.0;
  double t2_total = 0.0, t2_long = 0.0, short_sum = 0.0, short_n = 0.0;
  for (const auto& cl : dataset.clusters)
    for (const auto& iv : cl.intervals) {
      if (iv.delta_prev == 0) {
        t1_events += iv.delta;
        t1_exposure += iv.y;
      } else {
        t2_total += 1.0;
        if (iv.y > 2.0) {
          t2_long += 1.0;
        } else {
          short_sum += iv.y;
          short_n += 1.0;
        }
      }
    }
  ModelParams init;
  init.t1.lambda1 = t1_exposure > 0.0 ? std::max(t1_events, 0.5) / t1_exposure : 1.0;
  init.t1.gamma1 = 1.0;
  init.t1.beta.assign(p, 0.0);
  init.t2.lambda2 = short_n > 0.0 ? short_n / short_sum : 1.0;
  init.t2.gamma2 = 1.0;
  const double frac = t2_total > 0.0 ? std::clamp(t2_long / t2_total, 0.01, 0.99) : 0.5;
  init.mix.alpha0 = std::log(frac / (1.0 - frac));
  init.mix.alpha.assign(p, 0.0);
  switch (tag) {
    case ModelTag::Independence: init.frailty = FrailtySpec::degenerate(); break;
    case ModelTag::GammaFrailty: init.frailty = FrailtySpec::gamma(0.5); break;
    case ModelTag::LogNormalFrailty: init.frailty = FrailtySpec::lognormal(0.5); break;
  }
  return init;
}

namespace {

std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

FitResult run_mcem(const Dataset& dataset, const ModelParams& init, const MCEMConfig& config,
                   ModelTag tag) {
  check_config(config);
  check_params(init);
  if (init.covariate_dim() != dataset.covariate_dim)
    throw std::invalid_argument("initial parameters do not match the covariate dimension");
  if (init.frailty.family != family_of(tag))
    throw std::invalid_argument("initial frailty family does not match model '" +
                                std::string(to_string(tag)) + "'");

  FitResult fit;
  fit.model_tag = tag;
  fit.names = parameter_names(tag, dataset.covariate_dim);

  EStepOptions eo;
  eo.seed = config.seed;
  eo.gibbs_sweeps = config.gibbs_sweeps;
  eo.threads = config.threads;

  auto e_step_for = [&](const ModelParams& theta, const std::vector<LatentDraw>& prev, int M) {
    return tag == ModelTag::GammaFrailty ? mce_step_gamma(dataset, theta, prev, M, eo)
                                         : mce_step_general(dataset, theta, prev, M, eo);
  };

  ModelParams theta = init;
  eo.pass = 0;
  auto draws = initial_draws(dataset, theta, sample_size(config, 0), eo);
  int streak = 0;
  for (int d = 0; d < config.max_iter; ++d) {
    const int M = sample_size(config, d);
    eo.pass = static_cast<std::uint64_t>(d) + 1;
    draws = e_step_for(theta, draws, M);
    const auto ms = m_step(dataset, draws, tag, theta);
    fit.boundary_hit = fit.boundary_hit || ms.at_boundary;

    const double q_se = mean_and_se(draw_logliks(dataset, draws, ms.params, tag)).second;
    fit.q_trace.push_back(ms.q_value);
    fit.q_se_trace.push_back(q_se);
    fit.m_trace.push_back(M);
    const double change = (to_natural(ms.params, tag) - to_natural(theta, tag)).norm();
    theta = ms.params;
    fit.theta_trace.push_back(to_natural(theta, tag));
    fit.iterations = d + 1;

    streak = (d > 0 && change < config.tol) ? streak + 1 : 0;
    if (streak >= config.window) {
      fit.converged = true;
      break;
    }
  }

  eo.pass = 0xF1A1ULL << 32;
  fit.final_draws = e_step_for(theta, draws, config.M_final);
  const auto [fq, fq_se] = mean_and_se(draw_logliks(dataset, fit.final_draws, theta, tag));
  fit.final_q = fq;
  fit.final_q_se = fq_se;
  fit.theta_hat = theta;
  fit.estimate = to_natural(theta, tag);

  const Eigen::Index q = fit.estimate.size();
  fit.se = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
  try {
    fit.information = louis_information(dataset, theta, fit.final_draws, tag, config.threads);
    const Eigen::VectorXd se_w = standard_errors(fit.information);
    const auto mask = log_scaled_mask(tag, dataset.covariate_dim);
    for (Eigen::Index i = 0; i < q; ++i)
      fit.se[i] = mask[static_cast<std::size_t>(i)] ? fit.estimate[i] * se_w[i] : se_w[i];
  } catch (const NumericalError& e) {
    fit.se_error = e.what();
  }
  return fit;
}

Eigen::MatrixXd louis_matrix(const Dataset& dataset, const ModelParams& theta_hat,
                             const std::vector<LatentDraw>& final_draws, ModelTag tag,
                             int threads) {
  if (final_draws.empty()) throw std::invalid_argument("Louis information needs at least one draw");
  for (const auto& d : final_draws) check_chain_shape(dataset, d);
  const std::size_t p = dataset.covariate_dim;
  const Eigen::VectorXd x = to_working(theta_hat, tag);
  const Eigen::Index q = x.size();
  const std::size_t M = final_draws.size();
  const double rel_step = 1e-4;

  auto per_draw = [&](const Eigen::VectorXd& xx) {
    const ModelParams params = from_working(xx, tag, p);
    const auto terms = compute_terms(dataset, params);
    std::vector<double> out(M);
    detail::parallel_for(M, threads, [&](std::size_t m) {
      out[m] = draw_loglik(dataset, terms, final_draws[m], params, tag);
    });
    return out;
  };
  auto mean_loglik = [&](const Eigen::VectorXd& xx) {
    const auto v = per_draw(xx);
    double s = 0.0;
    for (double l : v) s += l;
    return s / static_cast<double>(M);
  };

  Eigen::MatrixXd G(static_cast<Eigen::Index>(M), q);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < q; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const auto fp = per_draw(xp);
    xp[i] = x[i] - h;
    const auto fm = per_draw(xp);
    xp[i] = x[i];
    for (std::size_t m = 0; m < M; ++m)
      G(static_cast<Eigen::Index>(m), i) = (fp[m] - fm[m]) / (2.0 * h);
  }
  const Eigen::MatrixXd H = numeric_hessian(mean_loglik, x, rel_step);
  const Eigen::VectorXd gbar = G.colwise().sum().transpose() / static_cast<double>(M);
  const Eigen::MatrixXd second = (G.transpose() * G) / static_cast<double>(M);
  Eigen::MatrixXd info = -H - (second - gbar * gbar.transpose());
  info = 0.5 * (info + info.transpose()).eval();
  return info;
}

Eigen::MatrixXd louis_information(const Dataset& dataset, const ModelParams& theta_hat,
                                  const std::vector<LatentDraw>& final_draws, ModelTag tag,
                                  int threads) {
  Eigen::MatrixXd info = louis_matrix(dataset, theta_hat, final_draws, tag, threads);
  if (!info.allFinite()) throw NumericalError("Louis information has non-finite entries");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(smallest > 0.0)) {
    std::ostringstream os;
    os << "observed information is not positive definite (smallest eigenvalue " << smallest
       << "); the fit may not have converged or sits on a boundary";
    throw NumericalError(os.str());
  }
  return info;
}

Eigen::VectorXd standard_errors(const Eigen::MatrixXd& information) {
  if (information.rows() != information.cols() || information.rows() == 0)
    throw std::invalid_argument("information matrix must be square and non-empty");
  if (!information.allFinite()) throw NumericalError("information matrix has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(information);
  if (llt.info() != Eigen::Success)
    throw NumericalError("information matrix is singular or not positive definite");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(information.rows(), information.cols()));
  Eigen::VectorXd se = cov.diagonal();
  for (Eigen::Index i = 0; i < se.size(); ++i) {
    if (!(se[i] > 0.0)) throw NumericalError("information matrix is singular");
    se[i] = std::sqrt(se[i]);
  }
  return se;
}

}  // namespace gapfrail
