#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "qsplit/config.hpp"
#include "qsplit/run.hpp"

using namespace qsplit;
namespace fs = std::filesystem;

namespace {

json minimal() { return json::parse(R"({"potential": {"a": -1, "segments": [[2, 1]]}})"); }

std::string schema_message(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
    return e.what();
  }
  ADD_FAILURE() << "config was accepted";
  return {};
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("qsplit_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int cli(const std::string& args) {
    const std::string cmd = std::string(QSPLIT_CLI) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  static json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
  }

  fs::path dir_;
};

}  // namespace

TEST(Config, DefaultsAreMaterialized) {
  auto doc = minimal();
  doc["packet"] = {{"k0", 1.0}};
  const auto c = config_from_json(doc);
  ASSERT_TRUE(c.packet);
  EXPECT_DOUBLE_EQ(c.packet->sigma_k, 0.05);
  EXPECT_DOUBLE_EQ(c.packet->x0, -60.0);
  EXPECT_EQ(c.synthesis.n_k, 513u);
  EXPECT_DOUBLE_EQ(c.grid.spacing, 1.0 / 32.0);
  EXPECT_EQ(c.oracle.grid.n_x, 40961u);
  EXPECT_EQ(c.clock.omega_factors.size(), 3u);
  const auto echo = to_json(c);
  EXPECT_TRUE(echo.contains("synthesis"));
  EXPECT_TRUE(echo.contains("oracle"));
  EXPECT_EQ(echo["packet"]["x0"].get<double>(), -60.0);
}

TEST(Config, EchoReplaysTheSameRun) {
  const auto c = parse_config(fs::path(QSPLIT_SOURCE_DIR) / "configs" / "canonical.json");
  const auto echo = to_json(c);
  EXPECT_EQ(to_json(config_from_json(echo)), echo);
  EXPECT_EQ(c.times.size(), 81u);
}

TEST(Config, AsymmetricPotentialIsSchemaError) {
  auto doc = minimal();
  doc["potential"]["segments"] = json::parse("[[1, 0.5], [1, 2]]");
  const auto msg = schema_message(doc);
  EXPECT_NE(msg.find("AsymmetricPotential"), std::string::npos) << msg;
  EXPECT_NE(msg.find("potential.segments"), std::string::npos) << msg;
}

TEST(Config, SpectrumTouchingZeroIsSchemaError) {
  auto doc = minimal();
  doc["packet"] = {{"k0", 0.2}, {"sigma_k", 0.05}};
  const auto msg = schema_message(doc);
  EXPECT_NE(msg.find("SpectrumDomainError"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyReportsPath) {
  auto doc = minimal();
  doc["clock"] = {{"omega_factor", json::array({1e-3})}};
  const auto msg = schema_message(doc);
  EXPECT_NE(msg.find("clock.omega_factor"), std::string::npos) << msg;
}

TEST(Config, RejectsBadValues) {
  auto bad = [](const char* text) {
    auto doc = minimal();
    doc.merge_patch(json::parse(text));
    return schema_message(doc);
  };
  EXPECT_NE(bad(R"({"energies": [0.5, -1]})").find("energies[1]"), std::string::npos);
  EXPECT_NE(bad(R"({"clock": {"omega_factors": [0.02]}})").find("clock"), std::string::npos);
  EXPECT_NE(bad(R"({"times": {"start": 0, "stop": 1, "step": 0}})").find("times"),
            std::string::npos);
  EXPECT_NE(bad(R"({"workers": 0})").find("workers"), std::string::npos);
  EXPECT_NE(bad(R"({"potential": {"segments": [[0, 1]]}})").find("NonPositiveWidth"),
            std::string::npos);
}

TEST(Config, TimeRangeIsInclusive) {
  auto doc = minimal();
  doc["times"] = {{"start", 0}, {"stop", 1}, {"step", 0.25}};
  const auto c = config_from_json(doc);
  ASSERT_EQ(c.times.size(), 5u);
  EXPECT_DOUBLE_EQ(c.times.back(), 1.0);
}

TEST(FormatNumber, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-320}) {
    const auto s = format_number(v);
    double back = 1.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v) << s;
  }
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(ExitCodes, KindsMapToCodes) {
  EXPECT_EQ(exit_code(ErrorKind::SchemaError), 2);
  EXPECT_EQ(exit_code(ErrorKind::IoError), 2);
  EXPECT_EQ(exit_code(ErrorKind::NumericalOverflow), 3);
  EXPECT_EQ(exit_code(ErrorKind::BoundaryContamination), 3);
}

TEST_F(CliRun, StationaryWritesOutputs) {
  const auto cfg = write("c.json", R"({"potential": {"a": -1, "segments": [[2, 1]]},
                                       "energies": [0.25, 0.5, 1.0, 2.0]})");
  ASSERT_EQ(cli("stationary " + cfg.string() + " --out " + (dir_ / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "stationary.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "out" / "error.json"));
  const auto meta = read_json(dir_ / "out" / "metadata.json");
  EXPECT_EQ(meta["subcommand"], "stationary");
  EXPECT_LT(meta["summary"]["max_unitarity_residual"].get<double>(), 1e-12);
  const auto echoed = read_json(dir_ / "out" / "config.json");
  EXPECT_EQ(echoed["energies"].size(), 4u);

  std::ifstream csv(dir_ / "out" / "stationary.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("E,k,T,R,", 0), 0u) << header;
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST_F(CliRun, SchemaErrorExitsTwo) {
  const auto cfg = write("c.json", R"({"potential": {"a": 0, "segments": [[1, 0.5], [1, 2]]}})");
  EXPECT_EQ(cli("stationary " + cfg.string() + " --out " + (dir_ / "out").string()), 2);
  const auto err = read_json(dir_ / "out" / "error.json");
  EXPECT_EQ(err["kind"], "SchemaError");
  EXPECT_NE(err["detail"].get<std::string>().find("AsymmetricPotential"), std::string::npos);
}

TEST_F(CliRun, MalformedJsonAndMissingFileExitTwo) {
  const auto cfg = write("c.json", "{ not json");
  EXPECT_EQ(cli("stationary " + cfg.string()), 2);
  EXPECT_EQ(cli("stationary " + (dir_ / "absent.json").string()), 2);
  EXPECT_EQ(cli("no-such-subcommand " + cfg.string()), 2);
}

TEST_F(CliRun, NumericalFailureExitsThree) {
  const auto cfg = write("c.json", R"({"potential": {"a": 0, "segments": [[50, 50]]},
                                       "energies": [0.5]})");
  EXPECT_EQ(cli("stationary " + cfg.string() + " --out " + (dir_ / "out").string()), 3);
  const auto err = read_json(dir_ / "out" / "error.json");
  EXPECT_EQ(err["kind"], "NumericalOverflow");
  EXPECT_EQ(err["exit_code"], 3);
}

TEST_F(CliRun, OracleOutsideToleranceExitsThree) {
  const auto cfg = write("c.json", R"({"potential": {"a": -1, "segments": [[2, 1]]},
      "packet": {"k0": 1, "sigma_k": 0.05, "x0": -60},
      "oracle": {"x_min": -160, "x_max": 160, "n_x": 2561, "dt": 0.1, "n_t": 100,
                 "sample_times": [0, 10], "tolerance": 1e-12}})");
  EXPECT_EQ(cli("oracle-check " + cfg.string() + " --out " + (dir_ / "out").string()), 3);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "oracle.csv"));
  EXPECT_EQ(read_json(dir_ / "out" / "error.json")["exit_code"], 3);
}

TEST_F(CliRun, ClockWritesTimes) {
  const auto cfg = write("c.json", R"({"potential": {"a": -1, "segments": [[2, 1]]},
                                       "energies": [0.5, 2.0]})");
  ASSERT_EQ(cli("clock " + cfg.string() + " --out " + (dir_ / "out").string()), 0);
  std::ifstream csv(dir_ / "out" / "clock.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("E,L,tau_dwell_tr,tau_dwell_ref,tau_larmor_tr,tau_larmor_ref", 0), 0u)
      << header;
}
