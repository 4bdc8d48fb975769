#include "gapfrail/analysis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "gapfrail/event_data.hpp"
#include "gapfrail/frailty.hpp"
#include "gapfrail/hazard.hpp"

namespace gapfrail {

WaldRow wald_test(std::string name, double estimate, double se, double level) {
  if (!(se > 0.0) || !std::isfinite(se))
    throw std::domain_error("standard error of " + name + " must be finite and > 0");
  WaldRow r;
  r.name = std::move(name);
  r.estimate = estimate;
  r.se = se;
  r.z = estimate / se;
  r.p = std::erfc(std::abs(r.z) / std::numbers::sqrt2);
  r.significant = r.p < level;
  return r;
}

std::vector<WaldRow> wald_tests(const std::vector<std::string>& names,
                                const std::vector<double>& estimates,
                                const std::vector<double>& ses, double level) {
  if (names.size() != estimates.size() || names.size() != ses.size())
    throw std::invalid_argument("names, estimates and standard errors differ in length");
  std::vector<WaldRow> rows;
  rows.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i)
    rows.push_back(wald_test(names[i], estimates[i], ses[i], level));
  return rows;
}

double chi_square_upper_tail(double x, int df) {
  if (df < 1) throw std::domain_error("degrees of freedom must be >= 1");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

LikelihoodRatio likelihood_ratio_test(double loglik_reduced, double loglik_full, int df,
                                      double slack) {
  LikelihoodRatio r;
  r.df = df;
  r.lambda = -2.0 * (loglik_reduced - loglik_full);
  if (r.lambda < -slack) {
    std::ostringstream os;
    os << "likelihood-ratio statistic is negative (" << r.lambda
       << "): the full model fits worse than the reduced one, so the fits are not nested or "
          "have not converged";
    throw std::domain_error(os.str());
  }
  r.lambda = std::max(r.lambda, 0.0);
  r.p_value = chi_square_upper_tail(r.lambda, df);
  return r;
}

double bic(double loglik, int n_params, long long n_obs) {
  if (n_obs < 1) throw std::domain_error("BIC needs n_obs >= 1");
  return -2.0 * loglik + n_params * std::log(static_cast<double>(n_obs));
}

ComparisonReport compare_models(const std::string& model_a, double loglik_a, int params_a,
                                const std::string& model_b, double loglik_b, int params_b,
                                long long n_obs) {
  if (params_b <= params_a)
    throw std::domain_error("the second model must have more parameters than the first");
  ComparisonReport r;
  r.model_a = model_a;
  r.model_b = model_b;
  r.loglik_a = loglik_a;
  r.loglik_b = loglik_b;
  r.params_a = params_a;
  r.params_b = params_b;
  r.n_obs = n_obs;
  r.df = params_b - params_a;
  const auto lrt = likelihood_ratio_test(loglik_a, loglik_b, r.df);
  r.lambda_stat = lrt.lambda;
  r.p_value = lrt.p_value;
  r.bic_a = bic(loglik_a, params_a, n_obs);
  r.bic_b = bic(loglik_b, params_b, n_obs);
  r.preferred = r.bic_b < r.bic_a ? model_b : model_a;
  return r;
}

std::string format_report_text(const ComparisonReport& r) {
  std::ostringstream os;
  os << std::fixed;
  os << "Model comparison (" << r.model_a << " nested in " << r.model_b << ")\n";
  os << "  " << std::left << std::setw(22) << "log-likelihood " + r.model_a << std::right
     << std::setw(16) << std::setprecision(4) << r.loglik_a << '\n';
  os << "  " << std::left << std::setw(22) << "log-likelihood " + r.model_b << std::right
     << std::setw(16) << std::setprecision(4) << r.loglik_b << '\n';
  os << "  " << std::left << std::setw(22) << "LRT statistic" << std::right << std::setw(16)
     << std::setprecision(4) << r.lambda_stat << '\n';
  os << "  " << std::left << std::setw(22) << "df" << std::right << std::setw(16) << r.df << '\n';
  os << "  " << std::left << std::setw(22) << "p-value" << std::right << std::setw(16);
  if (r.p_value < 1e-4)
    os << "< 0.0001";
  else
    os << std::setprecision(4) << r.p_value;
  os << '\n';
  os << "  " << std::left << std::setw(22) << "BIC " + r.model_a << std::right << std::setw(16)
     << std::setprecision(2) << r.bic_a << '\n';
  os << "  " << std::left << std::setw(22) << "BIC " + r.model_b << std::right << std::setw(16)
     << std::setprecision(2) << r.bic_b << '\n';
  os << "  " << std::left << std::setw(22) << "n_obs (BIC)" << std::right << std::setw(16)
     << r.n_obs << '\n';
  os << "  " << std::left << std::setw(22) << "preferred (BIC)" << std::right << std::setw(16)
     << r.preferred << '\n';
  os << "Note: the frailty variance is tested on the boundary of its parameter space; the\n"
        "plain chi-square reference is conservative there.\n";
  return os.str();
}

std::string format_report_keyvalue(const ComparisonReport& r) {
  std::ostringstream os;
  os << "model_a=" << r.model_a << '\n'
     << "model_b=" << r.model_b << '\n'
     << "loglik_a=" << format_double(r.loglik_a) << '\n'
     << "loglik_b=" << format_double(r.loglik_b) << '\n'
     << "params_a=" << r.params_a << '\n'
     << "params_b=" << r.params_b << '\n'
     << "lambda=" << format_double(r.lambda_stat) << '\n'
     << "df=" << r.df << '\n'
     << "p_value=" << format_double(r.p_value) << '\n'
     << "n_obs=" << r.n_obs << '\n'
     << "bic_a=" << format_double(r.bic_a) << '\n'
     << "bic_b=" << format_double(r.bic_b) << '\n'
     << "preferred=" << r.preferred << '\n';
  return os.str();
}

void CurveTable::add(std::string name, std::vector<double> values) {
  if (values.size() != t_grid.size())
    throw std::invalid_argument("curve column '" + name + "' does not match the time grid");
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

const std::vector<double>& CurveTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return columns[i];
  throw std::out_of_range("no curve column '" + name + "'");
}

std::string format_curve_csv(const CurveTable& table) {
  std::ostringstream os;
  os << 't';
  for (const auto& n : table.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < table.t_grid.size(); ++i) {
    os << format_double(table.t_grid[i]);
    for (const auto& col : table.columns) os << ',' << format_double(col[i]);
    os << '\n';
  }
  return os.str();
}

void write_curve_csv(const CurveTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << format_curve_csv(table);
}

std::vector<double> uniform_grid(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) throw std::invalid_argument("invalid grid");
  std::vector<double> g;
  const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
  for (long long i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
  return g;
}

std::vector<double> default_type1_grid() { return uniform_grid(0.0, 90.0, 0.1); }

std::vector<double> default_fig1_grid() {
  auto g = uniform_grid(0.0, 3.0, 0.01);
  for (long long i = 31; i <= 900; ++i) g.push_back(static_cast<double>(i) * 0.1);
  return g;
}

namespace {

std::vector<double> type1_curve(const std::vector<double>& grid, const std::vector<double>& z,
                                double w, const Type1Params& p1) {
  std::vector<double> s(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) s[i] = survival1(grid[i], z, w, p1);
  return s;
}

}  // namespace

CurveTable survival_curves_fig1(const ModelParams& params, const std::vector<double>& t_grid) {
  check_params(params);
  CurveTable t;
  t.t_grid = t_grid;
  const std::vector<double> z0(params.covariate_dim(), 0.0);
  t.add("S1", type1_curve(t_grid, z0, 1.0, params.t1));
  std::vector<double> s2(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) s2[i] = survival2(t_grid[i], params.t2);
  t.add("S2", std::move(s2));
  return t;
}

CurveTable survival_curves_fig2(const ModelParams& params, int n_frailty_draws,
                                const std::vector<double>& t_grid, Rng& rng) {
  check_params(params);
  if (params.covariate_dim() < 2)
    throw std::domain_error("home/away curves need the home indicator as covariate z2");
  if (n_frailty_draws < 0) throw std::invalid_argument("n_frailty_draws must be >= 0");
  CurveTable t;
  t.t_grid = t_grid;
  std::vector<double> home(params.covariate_dim(), 0.0), away = home;
  home[1] = 1.0;
  t.add("home_w1", type1_curve(t_grid, home, 1.0, params.t1));
  t.add("away_w1", type1_curve(t_grid, away, 1.0, params.t1));
  for (int i = 0; i < n_frailty_draws; ++i) {
    const double w = sample_prior(params.frailty, rng);
    t.add("home_draw" + std::to_string(i + 1), type1_curve(t_grid, home, w, params.t1));
  }
  for (int i = 0; i < n_frailty_draws; ++i) {
    const double w = sample_prior(params.frailty, rng);
    t.add("away_draw" + std::to_string(i + 1), type1_curve(t_grid, away, w, params.t1));
  }
  return t;
}

CurveTable survival_curves_fig3(const ModelParams& reference, const ModelParams& frailty_fit,
                                const std::vector<double>& t_grid) {
  check_params(reference);
  check_params(frailty_fit);
  CurveTable t;
  t.t_grid = t_grid;
  t.add("S1_independence", type1_curve(t_grid, std::vector<double>(reference.covariate_dim(), 0.0),
                                       1.0, reference.t1));
  t.add("S1_frailty", type1_curve(t_grid, std::vector<double>(frailty_fit.covariate_dim(), 0.0),
                                  1.0, frailty_fit.t1));
  return t;
}

}  // namespace gapfrail
