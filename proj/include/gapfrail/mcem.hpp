// Monte Carlo EM for the mixture Weibull frailty model, plus Louis standard errors.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gapfrail/event_data.hpp"
#include "gapfrail/hazard.hpp"
#include "gapfrail/latent.hpp"
#include "gapfrail/params.hpp"

namespace gapfrail {

struct MCEMConfig {
  int M0 = 50;
  double M_growth = 1.2;
  int M_max = 500;
  double tol = 1e-3;
  int window = 3;
  int max_iter = 100;
  std::uint64_t seed = 1;
  int M_final = 200;
  /// Gibbs sweeps (w | eta, then eta | w) per draw and E-step.
  int gibbs_sweeps = 1;
  /// Worker threads; 0 means all available cores. Results do not depend on this.
  int threads = 0;
};

void check_config(const MCEMConfig& config);

/// Sample size of iteration d: min(M0 * M_growth^d, M_max), rounded to nearest.
int sample_size(const MCEMConfig& config, int iteration);

/// Posterior probability that a Type-2 interval is Type 2-L given frailty w:
/// P1 / (P1 + P2), P1 = pi h1(y|w)^delta S1(y|w), P2 = (1 - pi) h2(y)^delta S2(y).
double eta_probability(const IntervalObservation& interval, double w, const ModelParams& params);
double eta_probability(const IntervalTerms& terms, int delta, double w);

struct EStepOptions {
  std::uint64_t seed = 1;
  std::uint64_t pass = 0;  // distinguishes the random streams of successive E-steps
  int gibbs_sweeps = 1;
  int threads = 1;
};

/// Starting chains: every Type-2 eta drawn from its posterior at w = 1, w = 1.
std::vector<LatentDraw> initial_draws(const Dataset& dataset, const ModelParams& params, int M,
                                      const EStepOptions& options);

/// General-frailty E-step: per draw and cluster, w from its posterior given the previous
/// eta of the same chain, then each Type-2 eta from Bernoulli(eta_probability(w)).
/// Chain m continues prev_draws[m % prev_draws.size()].
std::vector<LatentDraw> mce_step_general(const Dataset& dataset, const ModelParams& params,
                                         const std::vector<LatentDraw>& prev_draws, int M,
                                         const EStepOptions& options);

/// Gamma-frailty E-step: as above with the conjugate w draw used only transiently; the
/// returned draws carry eta alone.
std::vector<LatentDraw> mce_step_gamma(const Dataset& dataset, const ModelParams& params,
                                       const std::vector<LatentDraw>& prev_draws, int M,
                                       const EStepOptions& options);

/// Log-likelihood of one draw: independence, gamma-marginal, or complete-data depending
/// on the model.
double draw_loglik(const Dataset& dataset, const TermTable& terms, const LatentDraw& draw,
                   const ModelParams& params, ModelTag tag);
std::vector<double> draw_logliks(const Dataset& dataset, const std::vector<LatentDraw>& draws,
                                 const ModelParams& params, ModelTag tag);

/// Monte Carlo estimate of the expected log-likelihood over a fixed set of draws,
/// compressed into per-interval averages (and, for the gamma model, the distinct
/// Type 2-L patterns of each cluster) so one evaluation costs O(#intervals).
class QTilde {
 public:
  QTilde(const Dataset& dataset, const std::vector<LatentDraw>& draws, ModelTag tag);

  double operator()(const ModelParams& params) const;
  double at_working(const Eigen::VectorXd& x) const;

  ModelTag tag() const { return tag_; }
  std::size_t draw_count() const { return draw_count_; }

 private:
  struct Pattern {
    std::vector<std::uint32_t> long_intervals;  // Type-2 intervals with eta = 1
    double phi = 0.0;
    double weight = 0.0;  // share of draws with this pattern
  };

  const Dataset* dataset_;
  ModelTag tag_;
  std::size_t draw_count_ = 0;
  std::vector<std::vector<double>> eta_mean_;
  std::vector<std::vector<Pattern>> patterns_;
  std::vector<std::vector<double>> weight_w_mean_;
  std::vector<std::vector<double>> weight_logw_mean_;
  std::vector<double> logw_mean_, logw2_mean_, w_mean_;
};

struct MStepResult {
  ModelParams params;
  double q_value = 0.0;
  double q_start = 0.0;
  double grad_norm = 0.0;
  int evaluations = 0;
  bool converged = false;
  bool at_boundary = false;
};

struct MStepOptions {
  double grad_tol = 1e-6;
  int max_evals = 200'000;
  double log_bound = 30.0;  // |log| bound on positive parameters
};

/// Maximises Q-tilde over the draws starting from `start`. Never returns a point with a
/// lower Q-tilde than `start`.
MStepResult m_step(const Dataset& dataset, const std::vector<LatentDraw>& draws, ModelTag tag,
                   const ModelParams& start, const MStepOptions& options = {});

/// Moment-based starting values.
ModelParams default_init(const Dataset& dataset, ModelTag tag);

struct FitResult {
  ModelTag model_tag = ModelTag::Independence;
  ModelParams theta_hat;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;     // natural scale, table order
  Eigen::VectorXd se;           // natural scale (delta method from the working scale)
  Eigen::MatrixXd information;  // observed information on the working scale
  std::optional<std::string> se_error;
  std::vector<double> q_trace;
  std::vector<double> q_se_trace;
  std::vector<int> m_trace;
  std::vector<Eigen::VectorXd> theta_trace;
  std::vector<LatentDraw> final_draws;
  double final_q = 0.0;   // Q-tilde at theta_hat over the terminal draws
  double final_q_se = 0.0;
  int iterations = 0;
  bool converged = false;
  bool boundary_hit = false;
};

FitResult run_mcem(const Dataset& dataset, const ModelParams& init, const MCEMConfig& config,
                   ModelTag tag);

/// Louis observed information on the working scale:
///   -mean(Hessian l_m) - [mean(g_m g_m') - mean(g_m) mean(g_m)'],
/// all derivatives by central differences. Throws NumericalError naming the smallest
/// eigenvalue when the result is not positive definite.
Eigen::MatrixXd louis_information(const Dataset& dataset, const ModelParams& theta_hat,
                                  const std::vector<LatentDraw>& final_draws, ModelTag tag,
                                  int threads = 1);

/// The same matrix without the positive-definiteness check.
Eigen::MatrixXd louis_matrix(const Dataset& dataset, const ModelParams& theta_hat,
                             const std::vector<LatentDraw>& final_draws, ModelTag tag,
                             int threads = 1);
/// sqrt(diag(inverse(info))); throws NumericalError for singular input.
Eigen::VectorXd standard_errors(const Eigen::MatrixXd& information);

}  // namespace gapfrail
