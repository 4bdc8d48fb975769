#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "gapfrail/analysis.hpp"
#include "gapfrail/hazard.hpp"
#include "support.hpp"

using namespace gapfrail;
using doctest::Approx;

namespace {

// Upper chi-square tails with closed forms.
double tail_df1(double x) { return std::erfc(std::sqrt(x / 2.0)); }
double tail_df2(double x) { return std::exp(-x / 2.0); }

const std::vector<double> kTable1Se = {0.051, 0.002, 0.024, 0.066, 0.082, 0.029, 0.113, 0.015,
                                       0.062, 0.379, 0.086, 0.228, 0.118, 0.089, 0.069, 0.030};

}  // namespace

TEST_CASE("wald_test") {
  const auto b2 = wald_test("beta2", 0.172, 0.082, 0.05);
  CHECK(b2.z == Approx(2.0976).epsilon(1e-4));
  CHECK(b2.significant);
  CHECK(b2.p == Approx(tail_df1(b2.z * b2.z)).epsilon(1e-12));

  const auto b1 = wald_test("beta1", -0.024, 0.066, 0.05);
  CHECK(std::abs(b1.z) == Approx(0.3636).epsilon(1e-3));
  CHECK_FALSE(b1.significant);

  const auto zero = wald_test("x", 0.0, 1.0, 0.05);
  CHECK(zero.p == 1.0);
  CHECK_FALSE(zero.significant);

  CHECK_THROWS_AS(wald_test("x", 1.0, 0.0, 0.05), std::domain_error);
  CHECK_THROWS_AS(wald_test("x", 1.0, std::nan(""), 0.05), std::domain_error);
}

TEST_CASE("Table 1 significance pattern") {
  const auto p = oracle::table1();
  const auto names = parameter_names(ModelTag::GammaFrailty, 5);
  const auto est = to_natural(p, ModelTag::GammaFrailty);
  REQUIRE(names.size() == kTable1Se.size());
  const auto rows = wald_tests(names, std::vector<double>(est.data(), est.data() + est.size()),
                               kTable1Se, 0.05);
  const std::vector<bool> expected = {true, true, true, false, true, true, false, false,
                                      true, true, true, false, true, false, true, true};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    INFO(rows[i].name, " z=", rows[i].z);
    CHECK(rows[i].significant == expected[i]);
  }
  CHECK_THROWS_AS(wald_tests(names, {1.0}, kTable1Se, 0.05), std::invalid_argument);
}

TEST_CASE("likelihood_ratio_test") {
  const auto r = likelihood_ratio_test(-5407.3788, -5386.6376, 1);
  CHECK(r.lambda == Approx(41.4824).epsilon(1e-6));
  CHECK(r.p_value < 1e-4);
  CHECK(r.p_value == Approx(tail_df1(r.lambda)).epsilon(1e-10));

  const auto same = likelihood_ratio_test(-50.0, -50.0, 1);
  CHECK(same.lambda == 0.0);
  CHECK(same.p_value == 1.0);

  const auto ten = likelihood_ratio_test(-100.0, -90.0, 1);
  CHECK(ten.p_value == Approx(7.7442e-6).epsilon(1e-4));
  CHECK(likelihood_ratio_test(-100.0, -90.0, 2).p_value == Approx(tail_df2(20.0)).epsilon(1e-12));

  CHECK(likelihood_ratio_test(-50.0, -50.0 - 1e-8, 1).lambda == 0.0);
  CHECK_THROWS_WITH_AS(likelihood_ratio_test(-90.0, -100.0, 1), doctest::Contains("negative"),
                       std::domain_error);
}

TEST_CASE("property: chi-square tail against closed forms") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 60.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    CHECK(chi_square_upper_tail(x, 1) == Approx(tail_df1(x)).epsilon(1e-10));
    CHECK(chi_square_upper_tail(x, 2) == Approx(tail_df2(x)).epsilon(1e-10));
  }
  CHECK(chi_square_upper_tail(0.0, 3) == 1.0);
  CHECK_THROWS_AS(chi_square_upper_tail(1.0, 0), std::domain_error);
}

TEST_CASE("bic") {
  CHECK(bic(0.0, 0, 1) == 0.0);
  CHECK(bic(-100.0, 3, 50) == Approx(211.736069).epsilon(1e-9));
  CHECK_THROWS_AS(bic(-1.0, 2, 0), std::domain_error);
}

TEST_CASE("compare_models") {
  const auto r = compare_models("independence", -5407.3788, 15, "gamma", -5386.6376, 16, 4000);
  CHECK(r.df == 1);
  CHECK(r.lambda_stat == Approx(41.4824).epsilon(1e-6));
  CHECK(r.bic_a == Approx(2 * 5407.3788 + 15 * std::log(4000.0)));
  CHECK(r.preferred == "gamma");

  const auto tie = compare_models("independence", -200.0, 15, "gamma", -200.0, 16, 500);
  CHECK(tie.preferred == "independence");
  CHECK(tie.p_value == 1.0);

  CHECK_THROWS_AS(compare_models("a", -1.0, 16, "b", -1.0, 15, 10), std::domain_error);
  CHECK_THROWS_AS(compare_models("a", -1.0, 15, "b", -5.0, 16, 10), std::domain_error);

  const auto text = format_report_text(r);
  CHECK(text.find("41.4824") != std::string::npos);
  CHECK(text.find("< 0.0001") != std::string::npos);
  CHECK(text.find("boundary") != std::string::npos);

  std::istringstream kv(format_report_keyvalue(r));
  std::map<std::string, std::string> m;
  for (std::string line; std::getline(kv, line);) {
    const auto eq = line.find('=');
    REQUIRE(eq != std::string::npos);
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  CHECK(std::stod(m["lambda"]) == r.lambda_stat);
  CHECK(m["preferred"] == "gamma");
  CHECK(m["df"] == "1");
}

TEST_CASE("survival curves") {
  const auto p = oracle::table1();
  const auto f1 = survival_curves_fig1(p, default_fig1_grid());
  const auto& s1 = f1.column("S1");
  const auto& s2 = f1.column("S2");
  CHECK(s1.front() == 1.0);
  CHECK(s2.front() == 1.0);
  for (std::size_t i = 1; i < s1.size(); ++i) {
    CHECK(s1[i] <= s1[i - 1]);
    CHECK(s2[i] <= s2[i - 1]);
  }
  const auto& g = f1.t_grid;
  const auto at = std::find_if(g.begin(), g.end(), [](double t) { return std::abs(t - 1.5) < 1e-9; });
  REQUIRE(at != g.end());
  const double s2_oracle = std::exp(-std::pow(1.463 * 1.5, 3.542));
  CHECK(s2[at - g.begin()] == Approx(s2_oracle).epsilon(1e-10));
  CHECK(s2_oracle == Approx(9.3885e-8).epsilon(1e-4));
  CHECK(s1[at - g.begin()] == Approx(std::exp(-std::pow(0.021 * 1.5, 0.924))).epsilon(1e-12));

  CHECK(default_fig1_grid().size() == 301 + 870);
  CHECK(default_type1_grid().size() == 901);
  CHECK(default_type1_grid().back() == Approx(90.0));

  Rng rng(3);
  const auto f2 = survival_curves_fig2(p, 4, default_type1_grid(), rng);
  CHECK(f2.names.size() == 10);
  const auto& home = f2.column("home_w1");
  const auto& away = f2.column("away_w1");
  for (std::size_t i = 0; i < home.size(); ++i) CHECK(home[i] <= away[i]);

  auto indep = p;
  indep.frailty = FrailtySpec::degenerate();
  indep.t1.lambda1 = 0.025;
  const auto f3 = survival_curves_fig3(indep, p, default_type1_grid());
  CHECK(f3.names == std::vector<std::string>{"S1_independence", "S1_frailty"});
  const auto csv = format_curve_csv(f3);
  CHECK(csv.substr(0, csv.find('\n')) == "t,S1_independence,S1_frailty");

  auto p0 = p;
  p0.t1.beta.clear();
  p0.mix.alpha.clear();
  CHECK_THROWS_AS(survival_curves_fig2(p0, 1, default_type1_grid(), rng), std::domain_error);
  CHECK_THROWS_AS(f1.column("S3"), std::out_of_range);
  CurveTable bad;
  bad.t_grid = {0.0, 1.0};
  CHECK_THROWS_AS(bad.add("x", {1.0}), std::invalid_argument);
}
