#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct RunResult {
  int exit_code;
  std::string output;  // stdout only
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(HDMT_CLI_PATH) + " " + args + " 2>/dev/null";
  std::array<char, 4096> buf;
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("hdmt_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

}  // namespace

TEST_CASE("help lists every subcommand and the common flags with defaults") {
  const RunResult top = run_cli("--help");
  CHECK(top.exit_code == 0);
  for (const char* name :
       {"simulate-size", "simulate-power", "test", "geneset", "boundary"}) {
    CHECK(top.output.find(name) != std::string::npos);
  }

  const RunResult sim = run_cli("simulate-size --help");
  CHECK(sim.exit_code == 0);
  for (const char* flag : {"--config", "--preset", "--set", "--p", "--n1", "--n2",
                           "--beta", "--r", "--rho", "--innovation", "--alpha",
                           "--replicates", "--seed", "--tests", "--bootstrap-b", "--tau",
                           "--band", "--output", "--format"}) {
    CHECK(sim.output.find(flag) != std::string::npos);
  }
  CHECK(sim.output.find("200") != std::string::npos);   // default p
  CHECK(sim.output.find("0.05") != std::string::npos);  // default alpha

  const RunResult power = run_cli("simulate-power --help");
  for (const char* flag : {"--r-grid", "--beta-grid", "--no-size-adjust"}) {
    CHECK(power.output.find(flag) != std::string::npos);
  }

  const RunResult test_help = run_cli("test --help");
  for (const char* flag : {"--method", "--x1", "--x2", "--alpha", "--unit-variance",
                           "--band", "--eta", "--eta-star", "--s", "--tau", "--bootstrap"}) {
    CHECK(test_help.output.find(flag) != std::string::npos);
  }

  const RunResult gs = run_cli("geneset --help");
  for (const char* flag : {"--expression", "--labels", "--groups", "--method", "--fdr",
                           "--bootstrap-b", "--gumbel", "--min-group", "--no-standardize"}) {
    CHECK(gs.output.find(flag) != std::string::npos);
  }

  const RunResult bd = run_cli("boundary --help");
  for (const char* flag : {"--beta", "--theta", "--output"}) {
    CHECK(bd.output.find(flag) != std::string::npos);
  }
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("no-such-command").exit_code == 1);
  CHECK(run_cli("simulate-size --no-such-flag").exit_code == 1);
  CHECK(run_cli("simulate-size --set nonsense=1").exit_code == 1);
  CHECK(run_cli("test --method cq").exit_code == 1);  // missing required files
}

TEST_CASE("runtime errors exit with code 2") {
  CHECK(run_cli("test --method cq --x1 /nonexistent.csv --x2 /nonexistent.csv").exit_code ==
        2);
}

TEST_CASE("boundary tabulation") {
  const RunResult res = run_cli("boundary --beta 0.6,0.75,0.84 --theta 0.5");
  CHECK(res.exit_code == 0);
  std::istringstream in(res.output);
  std::string line;
  std::getline(in, line);
  CHECK(line == "beta,rho,rho_theta");
  // Values are shortest round-trip doubles; compare numerically.  Below
  // the knee (3 - theta)/4 = 0.625 the transformed curve pays the
  // estimated-precision premium: (sqrt(0.5) - sqrt(0.15))^2.
  const double expected[3][3] = {{0.6, 0.1, 0.10227744249483389},
                                 {0.75, 0.25, 0.25},
                                 {0.84, 0.36, 0.36}};
  for (const auto& row : expected) {
    REQUIRE(std::getline(in, line));
    std::istringstream cells(line);
    std::string cell;
    for (double want : row) {
      REQUIRE(std::getline(cells, cell, ','));
      CHECK(std::stod(cell) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  const RunResult plain = run_cli("boundary --beta 0.6");
  std::istringstream in2(plain.output);
  std::getline(in2, line);
  CHECK(line == "beta,rho");

  // Endpoints outside the open interval are skipped, not fatal.
  const RunResult ends = run_cli("boundary --beta 0.5:1.0:0.05 --theta 0.5");
  CHECK(ends.exit_code == 0);
  CHECK(ends.output.find("0.5,") == std::string::npos);
}

TEST_CASE("test subcommand on CSV matrices") {
  TempDir dir;
  std::ostringstream x1_os, x2_os;
  // 8 rows, 4 columns; x2 shifted in the second column.
  const double base[8] = {0.3, -0.1, 0.2, 0.5, -0.4, 0.1, -0.2, 0.6};
  for (int i = 0; i < 8; ++i) {
    x1_os << base[i] << ',' << base[7 - i] << ',' << 0.5 * base[i] << ',' << -base[i]
          << "\n";
    x2_os << -base[i] << ',' << base[i] + 2.5 << ',' << 0.4 * base[7 - i] << ','
          << base[7 - i] << "\n";
  }
  const std::string x1 = dir.file("x1.csv", x1_os.str());
  const std::string x2 = dir.file("x2.csv", x2_os.str());

  const RunResult cq = run_cli("test --method cq --x1 " + x1 + " --x2 " + x2 +
                               " --alpha 0.05");
  CHECK(cq.exit_code == 0);
  CHECK(cq.output.find("method: cq") != std::string::npos);
  CHECK(cq.output.find("statistic:") != std::string::npos);
  CHECK(cq.output.find("critical_value:") != std::string::npos);
  CHECK(cq.output.find("pvalue:") != std::string::npos);
  CHECK(cq.output.find("decision: reject") != std::string::npos);

  const RunResult mult = run_cli("test --method mult1 --x1 " + x1 + " --x2 " + x2 +
                                 " --alpha 0.05");
  CHECK(mult.exit_code == 0);
  CHECK(mult.output.find("source: gumbel") != std::string::npos);

  const RunResult boot = run_cli("test --method mult1 --x1 " + x1 + " --x2 " + x2 +
                                 " --alpha 0.05 --bootstrap 100 --seed 5");
  CHECK(boot.exit_code == 0);
  CHECK(boot.output.find("source: bootstrap") != std::string::npos);

  const RunResult clx = run_cli("test --method clx1 --x1 " + x1 + " --x2 " + x2);
  CHECK(clx.exit_code == 0);
  CHECK(clx.output.find("source: extreme-value") != std::string::npos);

  // Transformed test with per-call band-width selection.
  const RunResult mult2 = run_cli("test --method mult2 --x1 " + x1 + " --x2 " + x2 +
                                  " --alpha 0.05 --seed 9");
  CHECK(mult2.exit_code == 0);
  CHECK(mult2.output.find("method: mult2") != std::string::npos);
  CHECK(mult2.output.find("decision:") != std::string::npos);
}

TEST_CASE("simulation output is byte-identical across thread counts") {
  const std::string cell =
      "simulate-size --p 30 --n1 8 --n2 9 --rho 0.5 --replicates 25 "
      "--tests cq,mult1,clx1 --seed 99";
  const RunResult one = run_cli(cell + " --threads 1");
  const RunResult two = run_cli(cell + " --threads 2");
  CHECK(one.exit_code == 0);
  CHECK(two.exit_code == 0);
  CHECK(one.output == two.output);
  CHECK(one.output.find("p,n1,n2,beta,r,rho,innovation,alpha,test,") != std::string::npos);
}

TEST_CASE("preset dispatch with overrides") {
  // The preset pins the reference cell; overrides shrink it to a smoke run.
  const RunResult res = run_cli(
      "simulate-size --preset table1-desk --set replicates=4 --set tests=cq");
  CHECK(res.exit_code == 0);
  std::istringstream in(res.output);
  std::string header, row;
  std::getline(in, header);
  REQUIRE(std::getline(in, row));
  CHECK(row.substr(0, 10) == "200,30,40,");
  CHECK(row.find(",cq,") != std::string::npos);
  CHECK_FALSE(std::getline(in, row));  // single test, single cell

  CHECK(run_cli("simulate-size --preset no-such-preset").exit_code == 1);
}

TEST_CASE("config file, overrides and JSON output") {
  TempDir dir;
  const std::string cfg = dir.file("cfg.json",
                                   "{\"p\": 24, \"n1\": 8, \"n2\": 8, \"rho\": 0.4,\n"
                                   " \"replicates\": 20, \"tests\": [\"cq\"],\n"
                                   " \"seed\": 11}\n");
  const RunResult json = run_cli("simulate-size --config " + cfg + " --format json");
  CHECK(json.exit_code == 0);
  CHECK(json.output.find("\"p\":24") != std::string::npos);
  CHECK(json.output.find("\"test\":\"cq\"") != std::string::npos);

  const std::string kv = dir.file("cfg.txt",
                                  "p = 24\nn1 = 8\nn2 = 8\nreplicates = 20\n"
                                  "tests = cq\nseed = 11\n# comment\n");
  const RunResult a = run_cli("simulate-size --config " + cfg);
  const RunResult b = run_cli("simulate-size --config " + kv + " --set rho=0.4");
  CHECK(a.output == b.output);

  const std::string bad = dir.file("bad.json", "{\"unknownkey\": 3}");
  CHECK(run_cli("simulate-size --config " + bad).exit_code == 1);
}

TEST_CASE("geneset subcommand end to end") {
  TempDir dir;
  std::ostringstream expr;
  for (int j = 0; j < 24; ++j) expr << (j ? "," : "") << "f" << j;
  expr << "\n";
  unsigned long long state = 0x12345;
  auto next_unit = [&]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) / 9007199254740992.0 - 0.5;
  };
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 24; ++j) {
      double v = next_unit() * 2.0;
      if (i >= 8 && j < 3) v += 2.0;  // planted shift in the first group
      expr << (j ? "," : "") << v;
    }
    expr << "\n";
  }
  std::ostringstream groups;
  groups << "hit";
  for (int j = 0; j < 12; ++j) groups << ",f" << j;
  groups << "\nnull";
  for (int j = 12; j < 24; ++j) groups << ",f" << j;
  groups << "\n";
  const std::string e = dir.file("e.csv", expr.str());
  const std::string l = dir.file("l.csv", "1\n1\n1\n1\n1\n1\n1\n1\n2\n2\n2\n2\n2\n2\n2\n2\n");
  const std::string g = dir.file("g.csv", groups.str());

  const RunResult res = run_cli("geneset --expression " + e + " --labels " + l +
                                " --groups " + g +
                                " --method mult1 --min-group 10 --bootstrap-b 100 --seed 3");
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("group,p_raw,bh_adjusted,reject_at_fdr,method,statistic") !=
        std::string::npos);
  // The planted group sorts first.
  const std::size_t header_end = res.output.find('\n');
  CHECK(res.output.substr(header_end + 1, 3) == "hit");

  // Deterministic given the seed.
  const RunResult again = run_cli("geneset --expression " + e + " --labels " + l +
                                  " --groups " + g +
                                  " --method mult1 --min-group 10 --bootstrap-b 100 --seed 3");
  CHECK(again.output == res.output);
}
