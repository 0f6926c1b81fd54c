#include <cstdlib>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using reorient::testing::read_bytes;
using reorient::testing::read_text;
using reorient::testing::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args, const TempDir& scratch) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + REORIENT_CLI_PATH + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

fs::path meshes() { return reorient::testing::source_dir() / "data/meshes"; }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::map<fs::path, std::vector<unsigned char>> tree(const fs::path& root) {
  std::map<fs::path, std::vector<unsigned char>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root)] = read_bytes(e.path());
  }
  return files;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string gen_args(const fs::path& out, int per_object = 3) {
  return "gen-dataset --meshes " + q(meshes()) + " --per-object " + std::to_string(per_object) +
         " --size 32 --seed 7 --out " + q(out);
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  TempDir t("cli");
  EXPECT_EQ(run("", t).code, 2);
  EXPECT_EQ(run("--help", t).code, 0);
  EXPECT_EQ(run("render --bogus", t).code, 2);
}

TEST(Cli, GenDatasetDeterministic) {
  TempDir t("cli");
  const auto r1 = run(gen_args(t / "d1"), t);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.out.find("records: 18"), std::string::npos);
  ASSERT_EQ(run(gen_args(t / "d2"), t).code, 0);
  const auto a = tree(t / "d1"), b = tree(t / "d2");
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.count("manifest.jsonl"));
  EXPECT_TRUE(a.count("resolved_config.txt"));
  EXPECT_TRUE(a.count(fs::path("cube") / "0_s.pgm"));
}

TEST(Cli, GenDatasetErrors) {
  TempDir t("cli");
  EXPECT_EQ(run("gen-dataset --meshes " + q(meshes()) + " --per-object 0 --out " + q(t / "d"), t).code, 2);
  const auto missing = run("gen-dataset --meshes /nonexistent/meshes --per-object 1 --out " + q(t / "e"), t);
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("IoError"), std::string::npos);
  ASSERT_EQ(run(gen_args(t / "f", 1), t).code, 0);
  EXPECT_EQ(run(gen_args(t / "f", 1), t).code, 1);
  EXPECT_EQ(run(gen_args(t / "f", 1) + " --force", t).code, 0);
}

TEST(Cli, ConfigLayering) {
  TempDir t("cli");
  {
    std::ofstream(t / "bad.cfg") << "no_such_key = 1\n";
    std::ofstream(t / "good.cfg") << "dropout = 0.05\nper_object = 2\n";
  }
  EXPECT_EQ(run(gen_args(t / "a") + " --config " + q(t / "bad.cfg"), t).code, 2);
  ASSERT_EQ(run("gen-dataset --meshes " + q(meshes()) + " --size 32 --config " + q(t / "good.cfg") +
                    " --per-object 1 --out " + q(t / "b"),
                t).code,
            0);
  const auto snapshot = read_text(t / "b" / "resolved_config.txt");
  EXPECT_EQ(snapshot.rfind("# resolved configuration", 0), 0u);
  EXPECT_NE(snapshot.find("dropout=0.05"), std::string::npos);
  EXPECT_NE(snapshot.find("per_object=1"), std::string::npos);
}

TEST(Cli, SymmetryFilter) {
  TempDir t("cli");
  ASSERT_EQ(run("symmetry-filter --meshes " + q(meshes()) + " --out " + q(t / "s"), t).code, 0);
  const auto rows = read_csv(t / "s" / "symmetry.csv");
  ASSERT_EQ(rows[0], (std::vector<std::string>{"object_id", "score", "flagged"}));
  std::map<std::string, std::string> flagged;
  for (std::size_t n = 1; n < rows.size(); ++n) flagged[rows[n][0]] = rows[n][2];
  EXPECT_EQ(flagged["cube"], "true");
  EXPECT_EQ(flagged["l_bracket"], "false");
  EXPECT_TRUE(fs::exists(t / "s" / "resolved_config.txt"));

  ASSERT_EQ(run("symmetry-filter --meshes " + q(meshes()) + " --threshold 0 --out " + q(t / "z"), t).code, 0);
  for (const auto& row : read_csv(t / "z" / "symmetry.csv")) EXPECT_NE(row[2], "true");

  fs::create_directories(t / "empty");
  EXPECT_EQ(run("symmetry-filter --meshes " + q(t / "empty") + " --out " + q(t / "e"), t).code, 2);
}

TEST(Cli, TrainDeterministicAndLogsSchedule) {
  TempDir t("cli");
  ASSERT_EQ(run(gen_args(t / "d", 4), t).code, 0);
  const std::string args = "train --dataset " + q(t / "d") + " --epochs 2 --seed 3 --out ";
  const auto r1 = run(args + q(t / "m1"), t);
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(run(args + q(t / "m2"), t).code, 0);
  EXPECT_EQ(read_bytes(t / "m1" / "model.bin"), read_bytes(t / "m2" / "model.bin"));
  EXPECT_EQ(read_text(t / "m1" / "metrics.csv"), read_text(t / "m2" / "metrics.csv"));
  EXPECT_NE(r1.out.find("epoch 0 loss=surrogate"), std::string::npos);
  EXPECT_NE(r1.out.find("epoch 1 loss=shapematch"), std::string::npos);
  EXPECT_TRUE(fs::exists(t / "m1" / "resolved_config.txt"));

  EXPECT_EQ(run("train --dataset " + q(t / "nothing") + " --out " + q(t / "m3"), t).code, 1);
}

TEST(Cli, EvalEstimatorOracleIsExact) {
  TempDir t("cli");
  ASSERT_EQ(run(gen_args(t / "d"), t).code, 0);
  ASSERT_EQ(run("eval-estimator --dataset " + q(t / "d") + " --estimator oracle --out " + q(t / "o"), t).code, 0);
  const auto rows = read_csv(t / "o" / "samples.csv");
  ASSERT_EQ(rows.size(), 19u);
  // 2 acos(x) near x = 1 resolves angles only to about 3e-8 rad.
  for (std::size_t n = 1; n < rows.size(); ++n) EXPECT_NEAR(std::stod(rows[n][3]), 0.0, 1e-5);
  const auto summary = nlohmann::json::parse(read_text(t / "o" / "summary.json"));
  EXPECT_NEAR(summary["mean_err_deg"].get<double>(), 0.0, 1e-5);
}

TEST(Cli, EvalEstimatorIcpBinsRecomputable) {
  TempDir t("cli");
  ASSERT_EQ(run(gen_args(t / "d", 5), t).code, 0);
  ASSERT_EQ(run("eval-estimator --dataset " + q(t / "d") + " --estimator icp --out " + q(t / "i"), t).code, 0);
  const auto samples = read_csv(t / "i" / "samples.csv");
  ASSERT_EQ(samples[0], (std::vector<std::string>{"index", "object_id", "true_angle_deg", "err_deg",
                                                  "identity_err_deg", "shapematch_loss"}));
  std::map<long, std::pair<int, double>> bins;
  for (std::size_t n = 1; n < samples.size(); ++n) {
    const double truth = std::stod(samples[n][2]);
    EXPECT_EQ(std::stod(samples[n][4]), truth);
    auto& b = bins[static_cast<long>(std::floor(truth / 5.0))];
    ++b.first;
    b.second += std::stod(samples[n][3]);
  }
  const auto rows = read_csv(t / "i" / "bins.csv");
  ASSERT_EQ(rows.size(), bins.size() + 1);
  std::size_t n = 1;
  for (const auto& [idx, b] : bins) {
    EXPECT_DOUBLE_EQ(std::stod(rows[n][0]), idx * 5.0);
    EXPECT_EQ(std::stoi(rows[n][2]), b.first);
    EXPECT_NEAR(std::stod(rows[n][3]), b.second / b.first, 1e-9);
    ++n;
  }
}

TEST(Cli, RunControllerOracle) {
  TempDir t("cli");
  const auto r = run("run-controller --meshes " + q(meshes()) + " --estimator oracle --trials 2 --seed 1 --out " +
                         q(t / "c"),
                     t);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("median convergence iteration: 19"), std::string::npos);
  const auto summary = nlohmann::json::parse(read_text(t / "c" / "summary.json"));
  EXPECT_TRUE(summary.contains("median_final_err_deg"));
  EXPECT_LE(summary["median_final_err_deg"].get<double>(), 0.5);
  EXPECT_EQ(summary["convergence_rate"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(t / "c" / "trials.csv"));
  EXPECT_TRUE(fs::exists(t / "c" / "resolved_config.txt"));

  EXPECT_EQ(run("run-controller --meshes " + q(meshes()) + " --eta 0 --out " + q(t / "e"), t).code, 2);
  EXPECT_EQ(run("run-controller --meshes " + q(meshes()) + " --composition up --out " + q(t / "f"), t).code, 2);
}

TEST(Cli, RenderGoldenAndErrors) {
  TempDir t("cli");
  ASSERT_EQ(run("render --shape cube --out " + q(t / "cube.pgm"), t).code, 0);
  EXPECT_EQ(read_bytes(t / "cube.pgm"),
            read_bytes(reorient::testing::source_dir() / "tests/golden/cube_identity.pgm"));
  EXPECT_TRUE(fs::exists(t / "cube.json"));
  EXPECT_EQ(run("render --shape cube --out " + q(t / "cube.pgm"), t).code, 1);
  EXPECT_EQ(run("render --shape cube -q 1,0,0,0 --force --out " + q(t / "cube.pgm"), t).code, 0);
  EXPECT_EQ(run("render --shape cube -q 1,1,0,0 --out " + q(t / "bad.pgm"), t).code, 2);
  EXPECT_EQ(run("render --mesh " + q(meshes() / "wedge.obj") + " -q 0.5,0.5,0.5,0.5 --size 64 --out " +
                    q(t / "w.pgm"),
                t).code,
            0);
}
