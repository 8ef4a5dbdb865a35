#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kinkqr/cli.hpp"

using namespace kinkqr;
using nlohmann::json;

namespace {

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / ("kinkqr_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::string generated_csv(int n = 100, std::uint64_t seed = 3) {
  const auto path = scratch() / ("case1_" + std::to_string(n) + "_" + std::to_string(seed) + ".csv");
  RunConfig c;
  c.command = "generate";
  c.N = n;
  c.seed = seed;
  c.delta_beta = "default";
  c.output = path.string();
  std::ostringstream out, err;
  EXPECT_EQ(run(c, out, err), 0) << out.str();
  return path.string();
}

int run_capture(const RunConfig& c, std::string& text) {
  std::ostringstream out, err;
  const int code = run(c, out, err);
  text = out.str();
  return code;
}

std::map<std::string, std::string> parse_flat(const std::string& csv) {
  std::map<std::string, std::string> m;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    m[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return m;
}

// Drops the wall-time column, the one field that legitimately varies.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::size_t timing = std::string::npos;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      out << line << '\n';
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (timing == std::string::npos) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == "mean_seconds") timing = i;
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (i != timing) out << cells[i] << ',';
    out << '\n';
  }
  return out.str();
}

}  // namespace

TEST(Cli, FitRecoversKinkAndWritesCurves) {
  RunConfig c;
  c.command = "fit";
  c.input = generated_csv();
  c.output = (scratch() / "fit.json").string();
  std::string text;
  ASSERT_EQ(run_capture(c, text), 0) << text;
  std::ifstream f(c.output);
  const auto doc = json::parse(f);
  const double t_hat = doc["result"]["fit"]["t_hat"].get<double>();
  EXPECT_NEAR(t_hat, 5.0, 0.5);
  EXPECT_TRUE(doc["result"].contains("wald_ci"));
  EXPECT_EQ(doc["provenance"]["tool"], "kinkqr");
  EXPECT_TRUE(std::filesystem::exists(c.output + ".curves.csv"));
}

TEST(Cli, JsonAndCsvCarryTheSameNumbers) {
  RunConfig c;
  c.command = "fit";
  c.input = generated_csv(60, 4);
  c.curves = (scratch() / "curves.csv").string();
  std::string json_text, csv_text;
  ASSERT_EQ(run_capture(c, json_text), 0) << json_text;
  c.format = "csv";
  ASSERT_EQ(run_capture(c, csv_text), 0) << csv_text;
  const auto doc = json::parse(json_text);
  const auto flat = parse_flat(csv_text);
  ASSERT_TRUE(flat.count("result.fit.t_hat"));
  EXPECT_EQ(std::stod(flat.at("result.fit.t_hat")), doc["result"]["fit"]["t_hat"].get<double>());
  EXPECT_EQ(std::stod(flat.at("result.fit.objective")), doc["result"]["fit"]["objective"].get<double>());
}

TEST(Cli, SimulateIsReproducible) {
  RunConfig c;
  c.command = "simulate";
  c.method = "table1";
  c.reps = 3;
  c.N = 40;
  c.seed = 11;
  c.estimators = "lad,cqr";
  c.format = "csv";
  std::string a, b;
  ASSERT_EQ(run_capture(c, a), 0) << a;
  ASSERT_EQ(run_capture(c, b), 0);
  EXPECT_NE(a.find("mean_seconds"), std::string::npos);
  EXPECT_EQ(without_timing(a), without_timing(b));
  EXPECT_EQ(a.rfind("# ", 0), 0u);
}

TEST(Cli, ErrorsAreMachineReadable) {
  RunConfig c;
  c.command = "fit";
  c.input = (scratch() / "missing.csv").string();
  std::string text;
  EXPECT_EQ(run_capture(c, text), 1);
  const auto doc = json::parse(text);
  ASSERT_TRUE(doc.contains("error"));
  EXPECT_TRUE(doc["error"].contains("code"));
  EXPECT_TRUE(doc["error"].contains("message"));

  c.input = generated_csv();
  c.taus = "0.7,0.3";
  EXPECT_EQ(run_capture(c, text), 1);
  EXPECT_EQ(json::parse(text)["error"]["code"], "invalid_input");
}

TEST(Cli, QrsIntervalContainsEstimate) {
  RunConfig c;
  c.command = "ci";
  c.method = "qrs";
  c.input = generated_csv(100, 5);
  std::string text;
  ASSERT_EQ(run_capture(c, text), 0) << text;
  const auto doc = json::parse(text);
  const double t_hat = doc["result"]["t_hat"].get<double>();
  const auto& ci = doc["result"]["intervals"][0];
  EXPECT_EQ(ci["method"], "qrs");
  EXPECT_LE(ci["lower"].get<double>(), t_hat);
  EXPECT_GE(ci["upper"].get<double>(), t_hat);
}
