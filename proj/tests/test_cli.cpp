#include <catch2/catch_amalgamated.hpp>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace hdfa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hdfa_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

struct CliOutcome {
  int code;
  std::string out;
  std::string err;
};

CliOutcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string write_generated_data(const TempDir& dir, const std::string& name, int n, int p,
                                 std::uint64_t seed) {
  const DataMatrix d = sample(GeneratorSpec::iid_normal(seed, 0), n, p);
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) os << (j ? "," : "") << d.values(i, j);
    os << "\n";
  }
  return dir.file(name, os.str());
}

}  // namespace

TEST_CASE("table reader handles headers, delimiters and bad cells") {
  TempDir dir;
  const auto path = dir.file("a.csv", "x,y,z\n1, 2.5 ,3\n4\t5 6\n");
  const Matrix m = cli::read_numeric_table(path);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(1, 2) == 6.0);

  const auto bad = dir.file("bad.csv", "1,2\n3,oops\n");
  CHECK_THROWS_AS(cli::read_numeric_table(bad), InvalidInput);
  const auto ragged = dir.file("ragged.csv", "1,2\n3,4,5\n");
  CHECK_THROWS_AS(cli::read_numeric_table(ragged), InvalidInput);
  CHECK_THROWS_AS(cli::read_numeric_table((dir.path / "missing.csv").string()), InvalidInput);
}

TEST_CASE("cli test: no-factor run and regime warning at failing regime") {
  TempDir dir;
  const auto path = write_generated_data(dir, "d.csv", 400, 6, 2020);
  auto res = run_cli({"test", "--kind", "no-factor", "--alpha", "0.05", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("likelihood ratio test") != std::string::npos);
  CHECK(res.out.find("p-value") != std::string::npos);
  CHECK(res.out.find("regime diagnostic") != std::string::npos);

  // deterministic output: a second run prints identical bytes
  auto res2 = run_cli({"test", "--kind", "no-factor", "--alpha", "0.05", path});
  CHECK(res.out == res2.out);

  // failing regime: N=60, p=40 has p^2/N = 26.7
  const auto hd = write_generated_data(dir, "hd.csv", 60, 40, 2021);
  auto res3 = run_cli({"test", "--kind", "no-factor", hd});
  CHECK(res3.code == 0);
  CHECK(res3.out.find("outside its validity regime") != std::string::npos);
  auto res4 = run_cli({"test", "--kind", "no-factor", "--strict", hd});
  CHECK(res4.code == 2);
}

TEST_CASE("cli test: saturated k-factor model is an error") {
  TempDir dir;
  const auto path = write_generated_data(dir, "p3.csv", 100, 3, 7);
  auto res = run_cli({"test", "--kind", "k-factor", "--k", "2", path});
  CHECK(res.code == 1);
  CHECK(res.err.find("saturated") != std::string::npos);
}

TEST_CASE("cli test: given-sigma with the sample covariance gives T' = 0") {
  TempDir dir;
  const auto path = write_generated_data(dir, "d.csv", 80, 4, 99);
  const DataMatrix d = cli::read_data_matrix(path);
  const Matrix s = sample_covariance(d).values;
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) os << (j ? "," : "") << s(i, j);
    os << "\n";
  }
  const auto sigma_path = dir.file("sigma.csv", os.str());
  auto res = run_cli({"test", "--kind", "given-sigma", "--sigma", sigma_path, path});
  CHECK(res.code == 0);
  const auto pos = res.out.find("statistic           T = ");
  REQUIRE(pos != std::string::npos);
  const double t = std::strtod(res.out.c_str() + pos + 24, nullptr);
  CHECK(std::fabs(t) < 1e-6);
}

TEST_CASE("cli select prints the trail") {
  TempDir dir;
  const auto model = build_example_model(1, 6);
  const DataMatrix d = sample(GeneratorSpec::factor_normal(model, 11, 0), 1200, 6);
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < d.n(); ++i) {
    for (int j = 0; j < d.p(); ++j) os << (j ? " " : "") << d.values(i, j);
    os << "\n";
  }
  const auto path = dir.file("f1.csv", os.str());
  auto res = run_cli({"select", "--correction", "bartlett", path});
  CHECK(res.code == 0);
  CHECK(res.out.find("k_hat = 1") != std::string::npos);
  CHECK(res.out.find("reject") != std::string::npos);
  CHECK(res.out.find("fail to reject") != std::string::npos);
}

TEST_CASE("cli select on an unreadable file exits 1") {
  auto res = run_cli({"select", "/nonexistent/path.csv"});
  CHECK(res.code == 1);
  CHECK_FALSE(res.err.empty());
}

TEST_CASE("cli diagnose reports minimum safe N") {
  auto res = run_cli({"diagnose", "-N", "100", "-p", "30"});
  CHECK(res.code == 0);
  CHECK(res.out.find("N >= 9000") != std::string::npos);
  CHECK(res.out.find("N >= 520") != std::string::npos);

  auto res2 = run_cli({"diagnose", "-N", "2000", "-p", "12"});
  CHECK(res2.out.find("chisq calibration: safe") != std::string::npos);
  CHECK(res2.out.find("bartlett calibration: safe") != std::string::npos);

  auto res3 = run_cli({"diagnose", "-N", "100", "-p", "10"});
  CHECK(res3.out.find("epsilon = ln p / ln N = 0.5") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags") {
  auto res = run_cli({"diagnose", "-N", "100", "-p", "10", "--frobnicate"});
  CHECK(res.code == 1);
}

TEST_CASE("cli simulate: tiny grid writes csv and text") {
  TempDir dir;
  const auto cfg = dir.file("tiny.cfg",
                            "experiment = typeI-h00\n"
                            "N = 120\n"
                            "epsilon = 8/24, 10/24\n"
                            "generator = iid-normal\n"
                            "replications = 40\n"
                            "alpha = 0.05\n"
                            "correction = none, bartlett\n"
                            "seed = 7\n");
  const std::string prefix = (dir.path / "out").string();
  auto res = run_cli({"simulate", cfg, "--out", prefix, "--threads", "2"});
  CHECK(res.code == 0);
  std::ifstream csv(prefix + ".csv");
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "N,epsilon,p,mode,correction,metric,value,mc_se,replications,failed");
  int data_lines = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == 4);
  std::ifstream txt(prefix + ".txt");
  REQUIRE(txt.good());
  std::stringstream buf;
  buf << txt.rdbuf();
  CHECK(buf.str().find("mode = t0-chisq") != std::string::npos);
}

TEST_CASE("cli simulate: config errors are listed exhaustively") {
  TempDir dir;
  const auto cfg = dir.file("bad.cfg",
                            "experiment = bogus\n"
                            "N = \n"
                            "epsilon = nonsense\n"
                            "replications = -3\n"
                            "alpha = 7\n");
  auto res = run_cli({"simulate", cfg});
  CHECK(res.code == 1);
  // several distinct errors, each on its own line
  int errors = 0;
  std::istringstream is(res.err);
  std::string line;
  while (std::getline(is, line))
    if (line.find("  - ") == 0) ++errors;
  CHECK(errors >= 4);
}

TEST_CASE("cli simulate: empty grid exits 0 with a header-only csv") {
  TempDir dir;
  const auto cfg = dir.file("empty.cfg",
                            "experiment = typeI-h00\n"
                            "N = 120\n"
                            "epsilon = 8/24\n"
                            "generator = iid-normal\n"
                            "replications = 0\n");
  const std::string prefix = (dir.path / "empty").string();
  auto res = run_cli({"simulate", cfg, "--out", prefix});
  CHECK(res.code == 0);
  std::ifstream csv(prefix + ".csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "N,epsilon,p,mode,correction,metric,value,mc_se,replications,failed");
}

TEST_CASE("config parser: epsilon ranges and generator forms") {
  std::istringstream is(
      "experiment = typeI-hk\n"
      "N = 100, 500\n"
      "epsilon = 8/24 .. 12/24\n"
      "generator = factor-normal(k0=3)\n"
      "calibration = chisq\n"
      "k = 3\n");
  const auto pc = cli::parse_sim_config_text(is);
  REQUIRE(pc.errors.empty());
  CHECK(pc.config.epsilon_list.size() == 5);
  CHECK(pc.config.epsilon_list.front().num == 8);
  CHECK(pc.config.epsilon_list.back().num == 12);
  CHECK(pc.config.generator.kind == GeneratorKind::FactorNormal);
  CHECK(pc.config.generator.k0 == 3);

  std::istringstream is2(
      "experiment = typeI-h00\n"
      "N = 100\n"
      "epsilon = 8/24\n"
      "generator = discretized(II)\n");
  const auto pc2 = cli::parse_sim_config_text(is2);
  REQUIRE(pc2.errors.empty());
  CHECK(pc2.config.generator.setting == DiscretizeSetting::II);

  std::istringstream is3("generator = iid-t(10)\nN = 100\nepsilon = 8/24\n");
  const auto pc3 = cli::parse_sim_config_text(is3);
  REQUIRE(pc3.errors.empty());
  CHECK(pc3.config.generator.t_df == 10);
}
