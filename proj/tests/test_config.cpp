#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "test_util.hpp"

using namespace sbpp;
using sbpp::testing::rel_diff;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal =
    "mode=ground\n"
    "torus.L=1\n"
    "torus.N=16\n"
    "model.eps=0.2\n"
    "model.p=5\n";

std::string message_of(const std::string& text) {
  try {
    validate_config(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

std::map<std::string, std::string> parse_report(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sbpp_test_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string& header) {
  std::ifstream is(p);
  std::getline(is, header);
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(is, line);) {
    std::vector<double> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

class ConfigTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("SBPP_OUT"); }
};

}  // namespace

TEST_F(ConfigTest, MinimalConfigFillsDefaultsAndEchoes) {
  const ExperimentConfig c = validate_config(kMinimal);
  EXPECT_EQ(c.mode, Mode::kGround);
  EXPECT_EQ(c.resolution, (Index3{16, 16, 16}));
  EXPECT_EQ(c.model.eps, 0.2);
  EXPECT_EQ(c.model.p, 5.0);
  EXPECT_EQ(c.model.q, 1.0);
  EXPECT_EQ(c.tol, 1e-8);
  EXPECT_EQ(c.max_iter, 500);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.output_dir, "out");
  const std::string echo = c.echo();
  EXPECT_NE(echo.find("model.eps=0.20000000000000001"), std::string::npos);
  EXPECT_EQ(validate_config(echo).echo(), echo);
}

TEST_F(ConfigTest, ExponentOutsideOpenIntervalRejected) {
  for (const char* p : {"7", "4", "6", "3.9"}) {
    std::string text = kMinimal;
    text.replace(text.find("model.p=5"), 9, std::string("model.p=") + p);
    const std::string msg = message_of(text);
    EXPECT_NE(msg.find("(4,6)"), std::string::npos) << p << ": " << msg;
    EXPECT_NE(msg.find("model.p"), std::string::npos);
  }
  EXPECT_NO_THROW(validate_config(kMinimal));
}

TEST_F(ConfigTest, DuplicateAndUnknownKeysNamed) {
  EXPECT_EQ(message_of(kMinimal + "model.eps=0.1\n"), "duplicate key: model.eps");
  EXPECT_EQ(message_of(kMinimal + "foo=1\nmodel.bar=2\n"), "unknown keys: foo model.bar");
  EXPECT_NE(message_of("mode=ground\ntorus.N=16\nmodel.eps=0.2\nmodel.p=5\n").find("torus.L"), std::string::npos);
  EXPECT_NE(message_of(kMinimal + "seed=abc\n").find("seed"), std::string::npos);
  EXPECT_NE(message_of("mode=bogus\ntorus.L=1\ntorus.N=16\nmodel.eps=0.2\nmodel.p=5\n").find("mode"),
            std::string::npos);
}

TEST_F(ConfigTest, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(SBPP_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(validate_config(slurp(entry.path()))) << entry.path();
  }
}

TEST_F(ConfigTest, ConstantModeAtEndpointExponent) {
  ExperimentConfig c;
  c.mode = Mode::kConstant;
  c.model = {0.1, 6.0, 1.0, 0.25};
  c.resolution = {16, 16, 16};
  c.output_dir = scratch("constant").string();
  const RunReport rep = run_experiment(c);
  EXPECT_EQ(rep.exit_code(), 0);
  const auto kv = parse_report(rep.text);
  const double cs = std::stod(kv.at("constant.c_star"));
  EXPECT_NEAR(cs, 3.5560, 1e-4);
  const double k = 4.0 * std::numbers::pi;
  EXPECT_LE(rel_diff(cs, std::sqrt(0.5 * (k + std::sqrt(k * k + 4.0)))), 1e-14);
  // (V / eps^3) (c^2 / 2 + pi q^2 c^4 - c^p / p) with V = 1.
  const double energy = 1e3 * (0.5 * cs * cs + std::numbers::pi * std::pow(cs, 4) - std::pow(cs, 6) / 6.0);
  EXPECT_LE(rel_diff(std::stod(kv.at("constant.energy")), energy), 1e-12);
  EXPECT_LE(std::stod(kv.at("constant.energy_rel_deviation")), 1e-10);
  fs::remove_all(c.output_dir);
}

TEST_F(ConfigTest, PhotographyEightCentersWithinDelta) {
  ExperimentConfig c = validate_config(
      "mode=photography\ntorus.L=1\ntorus.N=32\nmodel.eps=0.2\nmodel.p=4.2\nmodel.q=0.3\nmodel.r=0.45\n"
      "profile.N=48\nphotography.centers=8\n");
  c.output_dir = scratch("photo").string();
  const RunReport rep = run_experiment(c);
  const auto kv = parse_report(rep.text);
  const double delta = std::stod(kv.at("profile.delta"));
  std::vector<double> e;
  for (int i = 0; i < 8; ++i) e.push_back(std::stod(kv.at("psi." + std::to_string(i) + ".energy.total")));
  EXPECT_EQ(kv.count("psi.8.energy.total"), 0u);
  EXPECT_LE(*std::max_element(e.begin(), e.end()) - *std::min_element(e.begin(), e.end()), delta);
  EXPECT_EQ(kv.at("psi.within_delta"), "1");
  for (const auto& f : rep.files) EXPECT_TRUE(fs::exists(rep.directory / f)) << f;
  fs::remove_all(c.output_dir);
}

TEST_F(ConfigTest, SweepCsvTrendsTowardLimit) {
  ExperimentConfig c = validate_config(slurp(fs::path(SBPP_CONFIG_DIR) / "sweep.cfg"));
  c.output_dir = scratch("sweep").string();
  const RunReport rep = run_experiment(c);
  EXPECT_EQ(rep.exit_code(), 0);
  std::string header;
  const auto rows = read_csv(rep.directory / "sweep.csv", header);
  EXPECT_EQ(header, kSweepCsvHeader);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i][0], rows[i - 1][0]);
    EXPECT_GE(rows[i][5], rows[i - 1][5]) << "m_eps must not decrease as eps shrinks";
  }
  EXPECT_LE(std::abs(rows.back()[9]), 0.10);
  for (const auto& r : rows) EXPECT_EQ(r[7], 1.0);
  fs::remove_all(c.output_dir);
}

TEST_F(ConfigTest, DeterministicReportsAndRoundtrippingDumps) {
  ExperimentConfig c = validate_config(
      "mode=ground\ntorus.L=1\ntorus.N=32\nmodel.eps=0.2\nmodel.p=4.2\nmodel.q=0.3\nmodel.r=0.45\n"
      "profile.N=48\ninits=one_bump,random,constant\nseed=3\n");
  const fs::path root = scratch("determinism");
  c.output_dir = root.string();
  const RunReport a = run_experiment(c);
  std::map<std::string, std::string> first;
  for (const auto& f : a.files) first[f] = slurp(root / f);
  const std::string first_report = slurp(root / "report.txt");
  const RunReport b = run_experiment(c);
  EXPECT_EQ(slurp(root / "report.txt"), first_report);
  EXPECT_EQ(a.text, b.text);
  ASSERT_EQ(a.files, b.files);
  for (const auto& f : a.files) {
    const std::string raw = slurp(root / f);
    EXPECT_EQ(raw, first[f]) << f;
    if (fs::path(f).extension() == ".fld") {
      std::ostringstream os;
      write_field(os, read_field(root / f));
      EXPECT_EQ(os.str(), raw) << f;
    }
  }
  // Every file named in the report exists.
  for (const auto& [key, value] : parse_report(a.text)) {
    if (key.ends_with(".field") || key.ends_with(".trace")) {
      EXPECT_TRUE(fs::exists(root / value)) << key;
    }
  }
  fs::remove_all(root);
}

TEST_F(ConfigTest, CliExitCodes) {
  const fs::path root = scratch("cli");
  fs::create_directories(root);
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + SBPP_CLI_PATH + "\" " + args + " > \"" +
                            (root / "stdout.txt").string() + "\" 2> \"" + (root / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string cfg = std::string(SBPP_CONFIG_DIR) + "/constant.cfg";
  EXPECT_EQ(run("--config " + cfg + " --out " + (root / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(root / "ok" / "report.txt"));
  EXPECT_EQ(run("--config " + (root / "missing.cfg").string()), 1);
  EXPECT_EQ(run("--config " + cfg + " --p 6"), 1);
  EXPECT_NE(slurp(root / "stderr.txt").find("(4,6)"), std::string::npos);
  EXPECT_EQ(run("--bogus"), 1);
  EXPECT_EQ(run("--config " + cfg + " --mode ground --grid 32 --eps 0.2 --max-iter 1 --out " +
                (root / "partial").string()),
            2);
  EXPECT_NE(slurp(root / "partial" / "report.txt").find("status = partial"), std::string::npos);
  fs::remove_all(root);
}
