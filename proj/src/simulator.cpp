#include "gapfrail/simulator.hpp"

#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gapfrail/frailty.hpp"
#include "gapfrail/hazard.hpp"
#include "gapfrail/latent.hpp"

namespace gapfrail {

ModelParams table1_params() {
  ModelParams p;
  p.frailty = FrailtySpec::gamma(0.247);
  p.t1 = {0.021, 0.924, {-0.024, 0.172, -0.096, -0.134, -0.019}};
  p.t2 = {1.463, 3.542};
  p.mix = {1.638, {0.122, 0.296, 0.050, -0.385, 0.076}};
  return p;
}

void check_sim_config(const SimConfig& c) {
  check_params(c.truth);
  if (c.truth.covariate_dim() > 5)
    throw std::invalid_argument("the simulator generates at most 5 covariates");
  if (c.n_games < 1) throw std::invalid_argument("n_games must be >= 1");
  if (c.n_teams < 2) throw std::invalid_argument("n_teams must be >= 2");
  if (!(c.half_length > 0.0)) throw std::invalid_argument("half_length must be > 0");
  if (!(c.censor_rate >= 0.0)) throw std::invalid_argument("censor_rate must be >= 0");
  if (!(c.red_card_prob >= 0.0 && c.red_card_prob <= 1.0))
    throw std::invalid_argument("red_card_prob must be in [0, 1]");
  if (!(c.odds_min > 1.0 && c.odds_max >= c.odds_min))
    throw std::invalid_argument("odds range must satisfy 1 < odds_min <= odds_max");
}

double type1_gap_from_exponential(double e, std::span<const double> z, double w,
                                  const Type1Params& p1) {
  if (!(w > 0.0)) throw std::domain_error("frailty value must be > 0");
  return std::pow(e / (w * std::exp(linear_predictor(z, p1.beta))), 1.0 / p1.gamma1) / p1.lambda1;
}

namespace {

double unit_exponential(Rng& rng) {
  std::exponential_distribution<double> ex(1.0);
  double e = 0.0;
  while (!(e > 0.0)) e = ex(rng);
  return e;
}

}  // namespace

double draw_gap_type1(std::span<const double> z, double w, const Type1Params& p1, Rng& rng) {
  return type1_gap_from_exponential(unit_exponential(rng), z, w, p1);
}

std::pair<double, int> draw_gap_type2(std::span<const double> z, double w,
                                      const ModelParams& params, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int eta = unif(rng) < mixture_prob(z, params.mix) ? 1 : 0;
  if (eta == 1) return {draw_gap_type1(z, w, params.t1, rng), 1};
  const double e = unit_exponential(rng);
  return {std::pow(e, 1.0 / params.t2.gamma2) / params.t2.lambda2, 0};
}

std::pair<Dataset, TruthRecord> simulate_dataset(const SimConfig& config) {
  check_sim_config(config);
  const ModelParams& truth = config.truth;
  const std::size_t p = truth.covariate_dim();
  const double inf = std::numeric_limits<double>::infinity();

  Dataset ds;
  ds.covariate_dim = p;
  TruthRecord rec;

  for (int g = 0; g < config.n_games; ++g) {
    const int home = g % config.n_teams;
    const int away = (g + 1 + (g / config.n_teams) % (config.n_teams - 1)) % config.n_teams;
    char game_id[32];
    std::snprintf(game_id, sizeof(game_id), "G%04d", g + 1);

    for (int side = 0; side < 2; ++side) {
      const bool is_home = side == 0;
      Rng rng = make_stream(config.seed, {static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(side)});
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::exponential_distribution<double> censor(config.censor_rate > 0.0 ? config.censor_rate : 1.0);

      GameCluster cl;
      cl.team_id = "T" + std::to_string((is_home ? home : away) + 1);
      cl.game_id = game_id;
      std::vector<std::int8_t> eta;
      const double w = sample_prior(truth.frailty, rng);
      const double odds = config.odds_min + (config.odds_max - config.odds_min) * unif(rng);
      double score = 0.0, cards = 0.0;

      auto record = [&](double y, int delta, int delta_prev, std::int8_t e, const CovariateVector& z) {
        cl.intervals.push_back({y, delta, delta_prev, z});
        eta.push_back(e);
      };

      for (int half = 0; half < 2; ++half) {
        double t = 0.0;
        bool prev_corner = false;
        while (config.half_length - t > 1e-9) {
          const double full[5] = {half == 0 ? 1.0 : 0.0, is_home ? 1.0 : 0.0, score, cards, odds};
          CovariateVector z(full, full + p);
          double gap;
          std::int8_t e = kEtaUndefined;
          if (prev_corner) {
            auto [y2, eta2] = draw_gap_type2(z, w, truth, rng);
            gap = y2;
            e = static_cast<std::int8_t>(eta2);
          } else {
            gap = draw_gap_type1(z, w, truth.t1, rng);
          }
          const double interior = config.censor_rate > 0.0 ? censor(rng) : inf;
          const double remaining = config.half_length - t;
          const int dprev = prev_corner ? 1 : 0;
          if (gap < std::min(interior, remaining)) {
            record(gap, 1, dprev, e, z);
            t += gap;
            prev_corner = true;
            continue;
          }
          record(std::min(interior, remaining), 0, dprev, e, z);
          prev_corner = false;
          if (remaining <= interior) break;
          t += interior;
          score += unif(rng) < 0.5 ? 1.0 : -1.0;
          if (unif(rng) < config.red_card_prob) cards += unif(rng) < 0.5 ? 1.0 : -1.0;
        }
        if (prev_corner) {
          // The half ran out within rounding of the last corner.
          const double full[5] = {half == 0 ? 1.0 : 0.0, is_home ? 1.0 : 0.0, score, cards, odds};
          CovariateVector z(full, full + p);
          const auto e = static_cast<std::int8_t>(unif(rng) < mixture_prob(z, truth.mix) ? 1 : 0);
          record(std::max(config.half_length - t, 1e-9), 0, 1, e, z);
        }
      }
      ds.clusters.push_back(std::move(cl));
      rec.w.push_back(truth.frailty.family == FrailtyFamily::Degenerate ? 1.0 : w);
      rec.eta.push_back(std::move(eta));
    }
  }
  return {std::move(ds), std::move(rec)};
}

std::string format_truth_csv(const Dataset& dataset, const TruthRecord& truth) {
  if (truth.w.size() != dataset.clusters.size() || truth.eta.size() != dataset.clusters.size())
    throw std::invalid_argument("truth record does not match the dataset");
  std::ostringstream os;
  os << "team_id,game_id,k,w_true,eta_true\n";
  for (std::size_t c = 0; c < dataset.clusters.size(); ++c) {
    const auto& cl = dataset.clusters[c];
    for (std::size_t k = 0; k < cl.size(); ++k) {
      os << cl.team_id << ',' << cl.game_id << ',' << k + 1 << ',' << format_double(truth.w[c]) << ',';
      if (truth.eta[c][k] == kEtaUndefined)
        os << "NA";
      else
        os << static_cast<int>(truth.eta[c][k]);
      os << '\n';
    }
  }
  return os.str();
}

void write_truth_csv(const Dataset& dataset, const TruthRecord& truth,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << format_truth_csv(dataset, truth);
}

}  // namespace gapfrail
