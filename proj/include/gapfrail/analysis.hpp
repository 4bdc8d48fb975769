// Wald tests, likelihood-ratio comparison, BIC, and survival-curve tables.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gapfrail/params.hpp"
#include "gapfrail/rng.hpp"

namespace gapfrail {

struct WaldRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool significant = false;
};

WaldRow wald_test(std::string name, double estimate, double se, double level);
std::vector<WaldRow> wald_tests(const std::vector<std::string>& names,
                                const std::vector<double>& estimates,
                                const std::vector<double>& ses, double level);

double chi_square_upper_tail(double x, int df);

struct LikelihoodRatio {
  double lambda = 0.0;
  double p_value = 1.0;
  int df = 1;
};

/// Lambda = -2 (loglik_reduced - loglik_full); throws std::domain_error when Lambda is
/// below -slack (non-nested or non-converged fits). Small negative values are clamped to 0.
LikelihoodRatio likelihood_ratio_test(double loglik_reduced, double loglik_full, int df,
                                      double slack = 1e-6);

double bic(double loglik, int n_params, long long n_obs);

struct ComparisonReport {
  std::string model_a, model_b;  // a is the reduced model
  double loglik_a = 0.0, loglik_b = 0.0;
  int params_a = 0, params_b = 0;
  long long n_obs = 0;
  double lambda_stat = 0.0;
  double p_value = 1.0;
  int df = 1;
  double bic_a = 0.0, bic_b = 0.0;
  std::string preferred;
};

/// LRT plus BIC for a reduced model a nested in model b. The preferred model is the
/// lower-BIC one, ties going to the simpler model.
ComparisonReport compare_models(const std::string& model_a, double loglik_a, int params_a,
                                const std::string& model_b, double loglik_b, int params_b,
                                long long n_obs);

std::string format_report_text(const ComparisonReport& report);
std::string format_report_keyvalue(const ComparisonReport& report);

struct CurveTable {
  std::vector<double> t_grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  void add(std::string name, std::vector<double> values);
  const std::vector<double>& column(const std::string& name) const;
};

std::string format_curve_csv(const CurveTable& table);
void write_curve_csv(const CurveTable& table, const std::filesystem::path& path);

/// 0..3 min by 0.01 followed by 3.1..90 min by 0.1.
std::vector<double> default_fig1_grid();
/// 0..90 min by 0.1.
std::vector<double> default_type1_grid();
std::vector<double> uniform_grid(double start, double stop, double step);

/// S1(t | z = 0, w = 1) and S2(t).
CurveTable survival_curves_fig1(const ModelParams& params, const std::vector<double>& t_grid);
/// Home (z2 = 1) and away (z2 = 0) S1 at w = 1, plus n_frailty_draws curves each at
/// prior frailty draws. Other covariates are 0; z2 is covariate index 1.
CurveTable survival_curves_fig2(const ModelParams& params, int n_frailty_draws,
                                const std::vector<double>& t_grid, Rng& rng);
/// S1(t | z = 0, w = 1) under a reference (independence) fit and a frailty fit.
CurveTable survival_curves_fig3(const ModelParams& reference, const ModelParams& frailty_fit,
                                const std::vector<double>& t_grid);

}  // namespace gapfrail
