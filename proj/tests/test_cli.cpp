#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = GAPFRAIL_TEST_TMP;

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(GAPFRAIL_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

fs::path fresh(const std::string& name) {
  const auto d = kTmp / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// A 60-game dataset simulated once per test process.
fs::path dataset() {
  static const fs::path path = [] {
    const auto d = fresh("data");
    const auto r = run("simulate --games 60 --seed 7 -o " + d.string());
    REQUIRE(r.rc == 0);
    return d / "events.csv";
  }();
  return path;
}

std::vector<std::string> table_rows(const fs::path& estimates) {
  std::istringstream in(slurp(estimates));
  std::vector<std::string> rows;
  std::string line;
  std::getline(in, line);  // model
  std::getline(in, line);  // header
  while (std::getline(in, line) && !line.empty() && line[0] != '*') rows.push_back(line.substr(0, line.find(' ')));
  return rows;
}

std::map<std::string, std::string> read_kv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::map<std::string, std::string> m;
  for (std::string line; std::getline(in, line);) m[line.substr(0, line.find('='))] = line.substr(line.find('=') + 1);
  return m;
}

std::string summary(const std::string& model, double loglik, int n_params, const std::string& hash) {
  std::ostringstream os;
  os << "{\"model\":\"" << model << "\",\"dataset_hash\":\"" << hash << "\",\"n_obs\":4000,\"loglik\":"
     << std::setprecision(17) << loglik << ",\"params\":{";
  const char* names[] = {"lambda1", "gamma1", "beta1", "beta2", "beta3", "beta4", "beta5",
                         "lambda2", "gamma2", "alpha0", "alpha1", "alpha2", "alpha3", "alpha4", "alpha5"};
  const double values[] = {0.021, 0.924, -0.024, 0.172, -0.096, -0.134, -0.019,
                           1.463, 3.542, 1.638, 0.122, 0.296, 0.050, -0.385, 0.076};
  if (n_params == 16) os << "\"theta_w\":0.247,";
  for (int i = 0; i < 15; ++i) os << (i ? "," : "") << '"' << names[i] << "\":" << values[i];
  os << "}}";
  return os.str();
}

}  // namespace

TEST_CASE("simulate is byte-identical for a fixed seed") {
  const auto a = fresh("sim_a"), b = fresh("sim_b");
  REQUIRE(run("simulate --games 8 --seed 7 -o " + a.string()).rc == 0);
  REQUIRE(run("simulate --games 8 --seed 7 -o " + b.string()).rc == 0);
  for (const char* f : {"events.csv", "truth.csv", "manifest.json"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  CHECK(slurp(a / "manifest.json").find("\"seed\": 7") != std::string::npos);

  // Without --seed one is generated and recorded.
  const auto c = fresh("sim_c");
  REQUIRE(run("simulate --games 2 -o " + c.string()).rc == 0);
  CHECK(slurp(c / "manifest.json").find("\"seed\": null") == std::string::npos);
}

TEST_CASE("fit writes Table 1 shaped output") {
  const auto ind = fresh("fit_ind"), gam = fresh("fit_gam");
  const std::string common = " --seed 1 --tol 0.05 --threads 1 -i " + dataset().string();
  const auto ri = run("fit -m independence" + common + " -o " + ind.string());
  CHECK(ri.rc == 0);
  const auto rows_i = table_rows(ind / "estimates.txt");
  CHECK(rows_i.size() == 15);
  CHECK(rows_i.front() == "lambda1");

  const auto rg = run("fit -m gamma" + common + " -o " + gam.string());
  CHECK(rg.rc == 0);
  const auto rows_g = table_rows(gam / "estimates.txt");
  CHECK(rows_g.size() == 16);
  CHECK(rows_g.front() == "theta_w");
  CHECK(slurp(gam / "trace.csv").rfind("iteration,M,q_tilde,q_tilde_se,theta_w,", 0) == 0);
  CHECK(slurp(gam / "summary.json").find("\"n_params\": 16") != std::string::npos);

  // The two fits share the dataset hash, so they can be compared.
  const auto cmp = fresh("cmp_fits");
  const auto rc = run("compare --reduced " + (ind / "summary.json").string() + " --full " +
                      (gam / "summary.json").string() + " -o " + cmp.string());
  CHECK((rc.rc == 0 || rc.out.find("negative") != std::string::npos));
}

TEST_CASE("fit exit codes") {
  const auto missing = run("fit -i /no/such/dir/events.csv -o " + fresh("fit_missing").string());
  CHECK(missing.rc == 1);
  CHECK(missing.out.find("/no/such/dir/events.csv") != std::string::npos);

  const auto d = fresh("fit_short");
  const auto short_run = run("fit -m independence --seed 1 --max-iter 2 --threads 1 -i " + dataset().string() +
                             " -o " + d.string());
  CHECK(short_run.rc == 2);
  CHECK(fs::exists(d / "estimates.txt"));

  spit(kTmp / "bad_init.json", "{\"lambda9\": 1.0}");
  const auto bad = run("fit --init " + (kTmp / "bad_init.json").string() + " -i " + dataset().string() + " -o " +
                       fresh("fit_bad_init").string());
  CHECK(bad.rc == 1);
  CHECK(bad.out.find("lambda9") != std::string::npos);
  CHECK(run("fit -m weibull -i " + dataset().string()).rc == 1);
}

TEST_CASE("fit is byte-identical across runs and thread counts") {
  const auto a = fresh("det_a"), b = fresh("det_b");
  const std::string args = "fit -m gamma --seed 3 --max-iter 6 --M-final 50 -i " + dataset().string();
  const auto ra = run(args + " --threads 1 -o " + a.string());
  const auto rb = run(args + " --threads 4 -o " + b.string());
  CHECK(ra.rc == rb.rc);
  for (const char* f : {"estimates.txt", "trace.csv", "summary.json"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("config file values are overridden by flags") {
  const auto d = fresh("cfg");
  spit(d / "run.ini", "[fit]\nM0=20\nmax-iter=3\nmodel=independence\n");
  const auto r = run("fit --config " + (d / "run.ini").string() + " --max-iter 2 --seed 1 --threads 1 -i " +
                     dataset().string() + " -o " + d.string());
  CHECK(r.rc == 2);
  const auto manifest = slurp(d / "manifest.json");
  CHECK(manifest.find("\"M0\": \"20\"") != std::string::npos);
  CHECK(manifest.find("\"max-iter\": \"2\"") != std::string::npos);
  CHECK(manifest.find("\"model\": \"independence\"") != std::string::npos);
  CHECK(slurp(d / "trace.csv").find("\n2,24,") != std::string::npos);
}

TEST_CASE("compare") {
  const auto d = fresh("cmp");
  spit(d / "ind.json", summary("independence", -5407.3788, 15, "abc"));
  spit(d / "gam.json", summary("gamma", -5386.6376, 16, "abc"));
  auto r = run("compare --reduced " + (d / "ind.json").string() + " --full " + (d / "gam.json").string() + " -o " +
               d.string());
  REQUIRE(r.rc == 0);
  auto kv = read_kv(d / "comparison.kv");
  CHECK(std::abs(std::stod(kv["lambda"]) - 41.482) < 0.001);
  CHECK(std::stod(kv["p_value"]) < 1e-4);
  CHECK(slurp(d / "comparison.txt").find("< 0.0001") != std::string::npos);

  spit(d / "gam_same.json", summary("gamma", -5407.3788, 16, "abc"));
  r = run("compare --reduced " + (d / "ind.json").string() + " --full " + (d / "gam_same.json").string() +
          " -o " + d.string());
  REQUIRE(r.rc == 0);
  kv = read_kv(d / "comparison.kv");
  CHECK(std::stod(kv["lambda"]) == 0.0);
  CHECK(kv["preferred"] == "independence");

  spit(d / "gam_worse.json", summary("gamma", -5417.0, 16, "abc"));
  r = run("compare --reduced " + (d / "ind.json").string() + " --full " + (d / "gam_worse.json").string() +
          " -o " + d.string());
  CHECK(r.rc == 1);
  CHECK(r.out.find("negative") != std::string::npos);

  spit(d / "gam_other.json", summary("gamma", -5386.6376, 16, "def"));
  r = run("compare --reduced " + (d / "ind.json").string() + " --full " + (d / "gam_other.json").string() +
          " -o " + d.string());
  CHECK(r.rc == 1);
  CHECK(r.out.find("different datasets") != std::string::npos);

  r = run("compare --n-obs 1000 --reduced " + (d / "ind.json").string() + " --full " + (d / "gam.json").string() +
          " -o " + d.string());
  CHECK(read_kv(d / "comparison.kv")["n_obs"] == "1000");
}

TEST_CASE("curves") {
  const auto d = fresh("curves");
  REQUIRE(run("curves --figure fig1 --table1 -o " + d.string()).rc == 0);
  std::istringstream in(slurp(d / "fig1.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,S1,S2");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
    ++rows;
  }
  CHECK(rows == 1171);

  REQUIRE(run("curves --figure fig2 --table1 --draws 3 --seed 2 -o " + d.string()).rc == 0);
  CHECK(slurp(d / "fig2.csv").rfind("t,home_w1,away_w1,home_draw1", 0) == 0);
  CHECK(run("curves --figure fig3 --table1 -o " + d.string()).rc == 1);
  CHECK(run("curves --figure fig1 -o " + d.string()).rc == 1);
}

TEST_CASE("validate") {
  const auto d = fresh("validate");
  const std::string good = slurp(dataset());
  spit(d / "good.csv", good);
  auto r = run("validate -i " + (d / "good.csv").string() + " -o " + d.string());
  CHECK(r.rc == 0);
  CHECK(r.out.rfind("ok:", 0) == 0);

  // Break the covariate rules on two rows: a fractional first-half indicator and odds below 1.
  std::istringstream in(good);
  std::ostringstream out;
  std::string line;
  for (int i = 0; std::getline(in, line); ++i) {
    if (i == 1 || i == 5) {
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
      if (i == 1) f[5] = "0.5";
      if (i == 5) f[9] = "0.9";
      line.clear();
      for (std::size_t j = 0; j < f.size(); ++j) line += (j ? "," : "") + f[j];
    }
    out << line << '\n';
  }
  spit(d / "bad.csv", out.str());
  r = run("validate -i " + (d / "bad.csv").string() + " -o " + d.string());
  CHECK(r.rc != 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
}
