#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(MLBENCH_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
  return {pclose(p), out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mlbench_cli_" + name);
  fs::remove_all(d);
  return d;
}

const std::string kTiny = std::string("--config ") + MLBENCH_CONFIG_DIR + "/tiny_clustering.ini";

double value_after(const std::string& text, const std::string& key) {
  const auto at = text.find(key);
  if (at == std::string::npos) throw std::runtime_error("missing " + key);
  return std::stod(text.substr(at + key.size()));
}

}  // namespace

TEST(Cli, TinyPipelineMatchesTheOracle) {
  const auto d = fresh("pipeline");
  const std::string base = kTiny + " --out " + d.string();
  ASSERT_EQ(run("simulate " + base).status, 0);
  const auto oracle = run("oracle " + base);
  ASSERT_EQ(oracle.status, 0) << oracle.out;
  const auto gt = run("ground-truth " + base);
  ASSERT_EQ(gt.status, 0) << gt.out;
  const double truth = value_after(slurp(d / "ground_truth.txt"), "truth: ");
  EXPECT_NEAR(truth, std::stod(oracle.out), 0.5);

  ASSERT_EQ(run("sweep --no-timing " + base).status, 0);
  const auto csv = slurp(d / "results.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "model,estimator,budget_name,budget_value,trial,seed,log_ml,direction,wall_seconds,"
            "combined");
  const auto rep = run("report " + base);
  ASSERT_EQ(rep.status, 0) << rep.out;
  EXPECT_TRUE(fs::exists(d / "summary.txt"));
  EXPECT_TRUE(fs::exists(d / "plots" / "ais_rmse.dat"));
}

TEST(Cli, SweepOutputIsByteStable) {
  const auto d1 = fresh("stable1");
  const auto d2 = fresh("stable2");
  for (const auto& d : {d1, d2}) {
    const std::string base = kTiny + " --out " + d.string();
    ASSERT_EQ(run("simulate " + base).status, 0);
    ASSERT_EQ(run("sweep --no-timing --estimator ais,hme,vb " + base).status, 0);
  }
  EXPECT_EQ(slurp(d1 / "dataset.csv"), slurp(d2 / "dataset.csv"));
  EXPECT_EQ(slurp(d1 / "state.txt"), slurp(d2 / "state.txt"));
  EXPECT_EQ(slurp(d1 / "results.csv"), slurp(d2 / "results.csv"));
}

TEST(Cli, ReplayReproducesARow) {
  const auto d = fresh("replay");
  const std::string base = kTiny + " --out " + d.string();
  ASSERT_EQ(run("simulate " + base).status, 0);
  ASSERT_EQ(run("sweep --no-timing --estimator smc " + base).status, 0);
  std::ifstream in(d / "results.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
  ASSERT_EQ(f.size(), 10u);
  ASSERT_EQ(f[9], "0");
  const auto r = run("replay " + base + " --estimator " + f[1] + " --budget " + f[3] +
                     " --trial-seed " + f[5]);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(std::stod(r.out), std::stod(f[6]));
}

TEST(Cli, MissingProvenanceIsReported) {
  const auto d = fresh("noprov");
  const std::string base = kTiny + " --out " + d.string();
  ASSERT_EQ(run("simulate " + base).status, 0);
  std::ifstream in(d / "state.txt");
  std::stringstream kept;
  for (std::string line; std::getline(in, line);)
    if (line.rfind("# exact", 0) != 0) kept << line << '\n';
  in.close();
  std::ofstream(d / "state.txt") << kept.str();
  const auto r = run("ground-truth " + base);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("provenance missing"), std::string::npos) << r.out;
}

TEST(Cli, ReportWithoutTruthOmitsRmse) {
  const auto d = fresh("notruth");
  const std::string base = kTiny + " --out " + d.string();
  ASSERT_EQ(run("simulate " + base).status, 0);
  ASSERT_EQ(run("sweep --no-timing --estimator ais " + base).status, 0);
  const auto r = run("report " + base);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("warning"), std::string::npos) << r.out;
}

TEST(Cli, UnknownModelIsRejected) {
  EXPECT_NE(run("simulate --model gaussian --out " + fresh("bad").string()).status, 0);
}
