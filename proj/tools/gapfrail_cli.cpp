// gapfrail: fit, compare, simulate and inspect mixture Weibull frailty models.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "gapfrail/analysis.hpp"
#include "gapfrail/event_data.hpp"
#include "gapfrail/frailty.hpp"
#include "gapfrail/mcem.hpp"
#include "gapfrail/optimize.hpp"
#include "gapfrail/simulator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gapfrail;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInputError = 1, kNotConverged = 2 };

// Failures that are the caller's fault (bad files, bad arguments) map to exit 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_hash(const Dataset& ds) { return fnv1a_hex(format_event_csv(ds)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed) return *seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

struct Common {
  std::string config_file;
  fs::path output_dir = ".";
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

// Echo of every option of a subcommand except where outputs go.
json config_echo(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "output-dir" || name == "config" || name.empty()) continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? " " : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    cfg[name] = value;
  }
  return cfg;
}

void write_manifest(const Common& c, const CLI::App& sub, const std::optional<std::string>& hash,
                    std::optional<std::uint64_t> seed) {
  json m;
  m["command"] = sub.get_name();
  m["config"] = config_echo(sub);
  m["dataset_hash"] = hash ? json(*hash) : json(nullptr);
  m["seed"] = seed ? json(*seed) : json(nullptr);
  m["versions"] = {{"gapfrail", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION},
                   {"cli11", CLI11_VERSION},
                   {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  write_text(c.output_dir / "manifest.json", m.dump(2) + "\n");
}

Dataset load_valid(const fs::path& path) {
  Dataset ds = load_event_csv(path, false);
  const auto v = validate(ds);
  if (!v.empty()) {
    std::ostringstream os;
    os << path.string() << ": " << v.size() << " validation error(s)";
    for (const auto& x : v) os << "\n  " << describe(ds, x);
    throw DataError(os.str());
  }
  return ds;
}

// Fit summaries as written by `fit`.
struct Summary {
  ModelTag tag = ModelTag::Independence;
  ModelParams params;
  double loglik = 0.0;
  long long n_obs = 0;
  int n_params = 0;
  std::string hash;
};

Summary read_summary(const fs::path& path) {
  const json j = read_json(path);
  Summary s;
  try {
    s.tag = parse_model_tag(j.at("model").get<std::string>());
    s.loglik = j.at("loglik").get<double>();
    s.n_obs = j.at("n_obs").get<long long>();
    s.hash = j.at("dataset_hash").get<std::string>();
    const auto& params = j.at("params");
    const std::size_t fixed = parameter_count(s.tag, 0);
    if (params.size() < fixed || (params.size() - fixed) % 2 != 0)
      throw InputError(path.string() + ": unexpected number of parameters");
    const std::size_t p = (params.size() - fixed) / 2;
    const auto names = parameter_names(s.tag, p);
    Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) v[static_cast<Eigen::Index>(i)] = params.at(names[i]).get<double>();
    s.params = from_natural(v, s.tag, p);
    s.n_params = static_cast<int>(names.size());
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return s;
}

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string estimates_table(const FitResult& fit, double level) {
  std::ostringstream os;
  os << "Model: " << to_string(fit.model_tag) << "\n";
  os << std::left << std::setw(10) << "Parameter" << std::right << std::setw(12) << "Estimate"
     << std::setw(12) << "Std.Error" << std::setw(10) << "z" << std::setw(10) << "p" << "\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    os << std::left << std::setw(10) << fit.names[i] << std::right << std::setw(12) << fixed(fit.estimate[k], 4);
    const bool have_se = fit.se.size() == fit.estimate.size() && std::isfinite(fit.se[k]) && fit.se[k] > 0.0;
    if (!have_se) {
      os << std::setw(12) << "NA" << std::setw(10) << "NA" << std::setw(10) << "NA" << "\n";
      continue;
    }
    const auto w = wald_test(fit.names[i], fit.estimate[k], fit.se[k], level);
    os << std::setw(12) << fixed(w.se, 4) << std::setw(10) << fixed(w.z, 3) << std::setw(10)
       << (w.p < 1e-4 ? "<0.0001" : fixed(w.p, 4)) << (w.significant ? " *" : "") << "\n";
  }
  os << "* significant at level " << format_double(level) << " (Wald test)\n";
  if (fit.se_error) os << "standard errors unavailable: " << *fit.se_error << "\n";
  return os.str();
}

std::string trace_csv(const FitResult& fit) {
  std::ostringstream os;
  os << "iteration,M,q_tilde,q_tilde_se";
  for (const auto& n : fit.names) os << ',' << n;
  os << '\n';
  for (std::size_t d = 0; d < fit.q_trace.size(); ++d) {
    os << d + 1 << ',' << fit.m_trace[d] << ',' << format_double(fit.q_trace[d]) << ','
       << format_double(fit.q_se_trace[d]);
    for (Eigen::Index i = 0; i < fit.theta_trace[d].size(); ++i) os << ',' << format_double(fit.theta_trace[d][i]);
    os << '\n';
  }
  return os.str();
}

json summary_json(const FitResult& fit, const Dataset& ds, const std::string& hash) {
  json j;
  j["model"] = std::string(to_string(fit.model_tag));
  j["dataset_hash"] = hash;
  j["n_obs"] = ds.interval_count();
  j["n_params"] = fit.names.size();
  j["loglik"] = fit.final_q;
  j["loglik_se"] = fit.final_q_se;
  j["converged"] = fit.converged;
  j["boundary_hit"] = fit.boundary_hit;
  j["iterations"] = fit.iterations;
  json params = json::object(), se = json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    params[fit.names[i]] = fit.estimate[k];
    se[fit.names[i]] = fit.se.size() == fit.estimate.size() && std::isfinite(fit.se[k]) ? json(fit.se[k]) : json(nullptr);
  }
  j["params"] = params;
  j["se"] = se;
  j["se_error"] = fit.se_error ? json(*fit.se_error) : json(nullptr);
  return j;
}

ModelParams apply_init(const fs::path& path, ModelParams start, ModelTag tag) {
  const json j = read_json(path);
  if (!j.is_object()) throw InputError(path.string() + ": expected an object of parameter values");
  const auto names = parameter_names(tag, start.covariate_dim());
  Eigen::VectorXd v = to_natural(start, tag);
  for (const auto& [key, value] : j.items()) {
    const auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw InputError(path.string() + ": unknown parameter '" + key + "'");
    if (!value.is_number()) throw InputError(path.string() + ": value of '" + key + "' is not a number");
    v[it - names.begin()] = value.get<double>();
  }
  return from_natural(v, tag, start.covariate_dim());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture Weibull frailty models for clustered gap times, fitted by Monte Carlo EM."};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML/INI file of option values, keyed by subcommand section; flags override it");
  app.fallthrough();

  Common common;
  auto add_common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("-o,--output-dir", common.output_dir, "Directory for all outputs");
    sub->add_option("--threads", common.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    if (seeded) sub->add_option("--seed", common.seed, "Random seed (generated and recorded when absent)");
  };

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model by MCEM");
  std::string fit_input, fit_model = "gamma", fit_init;
  double level = 0.05;
  MCEMConfig mc;
  fit_cmd->add_option("-i,--input", fit_input, "Event CSV")->required();
  fit_cmd->add_option("-m,--model", fit_model, "independence | gamma | lognormal")
      ->check(CLI::IsMember({"independence", "gamma", "lognormal"}));
  fit_cmd->add_option("--init", fit_init, "JSON object of starting values by parameter name");
  fit_cmd->add_option("--level", level, "Wald test level")->check(CLI::Range(0.0, 1.0));
  fit_cmd->add_option("--M0", mc.M0, "Initial Monte Carlo sample size");
  fit_cmd->add_option("--M-growth", mc.M_growth, "Sample size growth factor per iteration");
  fit_cmd->add_option("--M-max", mc.M_max, "Sample size cap");
  fit_cmd->add_option("--M-final", mc.M_final, "Draws for the final pass and standard errors");
  fit_cmd->add_option("--tol", mc.tol, "Relative parameter change for convergence");
  fit_cmd->add_option("--window", mc.window, "Consecutive iterations below tol");
  fit_cmd->add_option("--max-iter", mc.max_iter, "Iteration limit");
  fit_cmd->add_option("--gibbs-sweeps", mc.gibbs_sweeps, "Gibbs sweeps per E-step");
  add_common(fit_cmd, true);

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Likelihood-ratio test and BIC for two nested fits");
  std::string cmp_reduced, cmp_full;
  long long n_obs_override = 0;
  cmp_cmd->add_option("--reduced", cmp_reduced, "summary.json of the reduced fit")->required();
  cmp_cmd->add_option("--full", cmp_full, "summary.json of the full fit")->required();
  cmp_cmd->add_option("--n-obs", n_obs_override, "Observation count for BIC (0 = interval count)");
  add_common(cmp_cmd, false);

  // curves
  auto* cur_cmd = app.add_subcommand("curves", "Survival-curve tables");
  std::string figure = "fig1", cur_fit, cur_ref;
  bool use_table1 = false;
  int draws = 50;
  cur_cmd->add_option("--figure", figure, "fig1 | fig2 | fig3")->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
  cur_cmd->add_option("--fit", cur_fit, "summary.json supplying the parameters");
  cur_cmd->add_option("--reference", cur_ref, "summary.json of the independence fit (fig3)");
  cur_cmd->add_flag("--table1", use_table1, "Use the Table 1 estimates instead of --fit");
  cur_cmd->add_option("--draws", draws, "Frailty draws per side (fig2)")->check(CLI::NonNegativeNumber);
  add_common(cur_cmd, true);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a dataset from the generative model");
  SimConfig sc;
  std::string sim_truth, sim_frailty = "gamma";
  double frailty_param = 0.247;
  int covariates = 5;
  sim_cmd->add_option("--truth", sim_truth, "summary.json of true parameters (default: Table 1)");
  sim_cmd->add_option("--frailty", sim_frailty, "Frailty of the default truth: gamma | lognormal | none")
      ->check(CLI::IsMember({"gamma", "lognormal", "none"}));
  sim_cmd->add_option("--frailty-param", frailty_param, "theta_w or sigma_w of the default truth");
  sim_cmd->add_option("--covariates", covariates, "Covariates kept from the default truth")->check(CLI::Range(0, 5));
  sim_cmd->add_option("--games", sc.n_games, "Games (two clusters each)");
  sim_cmd->add_option("--teams", sc.n_teams, "Teams in the rotation");
  sim_cmd->add_option("--half-length", sc.half_length, "Minutes per half");
  sim_cmd->add_option("--censor-rate", sc.censor_rate, "Interior censoring events per minute");
  sim_cmd->add_option("--red-card-prob", sc.red_card_prob, "Red-card chance per censoring event");
  sim_cmd->add_option("--odds-min", sc.odds_min, "Lower bound of the decimal odds");
  sim_cmd->add_option("--odds-max", sc.odds_max, "Upper bound of the decimal odds");
  add_common(sim_cmd, true);

  // validate
  auto* val_cmd = app.add_subcommand("validate", "Check an event CSV");
  std::string val_input;
  val_cmd->add_option("-i,--input", val_input, "Event CSV")->required();
  add_common(val_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInputError;
  }

  try {
    fs::create_directories(common.output_dir);

    if (*fit_cmd) {
      const ModelTag tag = parse_model_tag(fit_model);
      const Dataset ds = load_valid(fit_input);
      const std::string hash = dataset_hash(ds);
      mc.seed = resolve_seed(common.seed);
      mc.threads = common.threads;
      check_config(mc);
      ModelParams init = default_init(ds, tag);
      if (!fit_init.empty()) init = apply_init(fit_init, init, tag);
      write_manifest(common, *fit_cmd, hash, mc.seed);
      const FitResult fit = run_mcem(ds, init, mc, tag);
      write_text(common.output_dir / "estimates.txt", estimates_table(fit, level));
      write_text(common.output_dir / "trace.csv", trace_csv(fit));
      write_text(common.output_dir / "summary.json", summary_json(fit, ds, hash).dump(2) + "\n");
      if (!fit.converged) {
        std::cerr << "warning: MCEM did not converge within " << mc.max_iter << " iterations\n";
        return kNotConverged;
      }
      if (fit.se_error) {
        std::cerr << "warning: " << *fit.se_error << "\n";
        return kNotConverged;
      }
      return kOk;
    }

    if (*cmp_cmd) {
      const Summary a = read_summary(cmp_reduced);
      const Summary b = read_summary(cmp_full);
      if (a.hash != b.hash)
        throw InputError("fits were made on different datasets (hash " + a.hash + " vs " + b.hash + ")");
      const long long n = n_obs_override > 0 ? n_obs_override : a.n_obs;
      write_manifest(common, *cmp_cmd, a.hash, std::nullopt);
      const auto r = compare_models(std::string(to_string(a.tag)), a.loglik, a.n_params,
                                    std::string(to_string(b.tag)), b.loglik, b.n_params, n);
      write_text(common.output_dir / "comparison.txt", format_report_text(r));
      write_text(common.output_dir / "comparison.kv", format_report_keyvalue(r));
      std::cout << format_report_text(r);
      return kOk;
    }

    if (*cur_cmd) {
      if (use_table1 == !cur_fit.empty()) throw InputError("give exactly one of --fit and --table1");
      const ModelParams params = use_table1 ? table1_params() : read_summary(cur_fit).params;
      std::optional<std::uint64_t> seed;
      CurveTable table;
      if (figure == "fig1") {
        table = survival_curves_fig1(params, default_fig1_grid());
      } else if (figure == "fig2") {
        seed = resolve_seed(common.seed);
        Rng rng = make_stream(*seed, {0});
        table = survival_curves_fig2(params, draws, default_type1_grid(), rng);
      } else {
        if (cur_ref.empty()) throw InputError("fig3 needs --reference");
        table = survival_curves_fig3(read_summary(cur_ref).params, params, default_type1_grid());
      }
      write_manifest(common, *cur_cmd, std::nullopt, seed);
      write_curve_csv(table, common.output_dir / (figure + ".csv"));
      return kOk;
    }

    if (*sim_cmd) {
      if (!sim_truth.empty()) {
        sc.truth = read_summary(sim_truth).params;
      } else {
        sc.truth = table1_params();
        sc.truth.t1.beta.resize(static_cast<std::size_t>(covariates));
        sc.truth.mix.alpha.resize(static_cast<std::size_t>(covariates));
        if (sim_frailty == "gamma") sc.truth.frailty = FrailtySpec::gamma(frailty_param);
        if (sim_frailty == "lognormal") sc.truth.frailty = FrailtySpec::lognormal(frailty_param);
        if (sim_frailty == "none") sc.truth.frailty = FrailtySpec::degenerate();
      }
      sc.seed = resolve_seed(common.seed);
      const auto [ds, truth] = simulate_dataset(sc);
      write_manifest(common, *sim_cmd, dataset_hash(ds), sc.seed);
      write_event_csv(ds, common.output_dir / "events.csv");
      write_truth_csv(ds, truth, common.output_dir / "truth.csv");
      return kOk;
    }

    if (*val_cmd) {
      const Dataset ds = load_event_csv(val_input, false);
      write_manifest(common, *val_cmd, dataset_hash(ds), std::nullopt);
      const auto v = validate(ds);
      for (const auto& x : v) std::cout << describe(ds, x) << "\n";
      if (!v.empty()) return kInputError;
      std::cout << "ok: " << ds.clusters.size() << " clusters, " << ds.interval_count() << " intervals\n";
      return kOk;
    }
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kOk;
}
