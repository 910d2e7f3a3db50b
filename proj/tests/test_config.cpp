#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "ataseg/config.hpp"
#include "ataseg/error.hpp"

using namespace ataseg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_of(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsFollowTheReferenceSetup) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.adapter.kind, AdapterKind::kB1);
  EXPECT_EQ(cfg.adapter.lambda_ent, 1.0);
  EXPECT_EQ(cfg.adapter.lambda_cst, 1.0);
  EXPECT_EQ(cfg.adapter.budget, 16);
  EXPECT_EQ(cfg.adapter.cst_kind, ConsistencyKind::kSce);
  EXPECT_EQ(cfg.annotator.kind, AnnotatorKind::kBvsb);
  EXPECT_EQ(cfg.optimizer.lr, 7.5e-6);
  EXPECT_EQ(cfg.optimizer.beta1, 0.9);
  EXPECT_EQ(cfg.optimizer.beta2, 0.999);
  EXPECT_EQ(cfg.stream.num_domains(), 5);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(desk_preset().optimizer.lr, kDeskLearningRate);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg = desk_preset();
  cfg.adapter.kind = AdapterKind::kB0;
  cfg.adapter.budget = 4;
  cfg.adapter.detach_cst_target = true;
  cfg.annotator.kind = AnnotatorKind::kRipu;
  cfg.annotator.suppression_k = 3;
  cfg.annotator.imbalance = ImbalanceMode::kBlend;
  cfg.annotator.imbalance_omega = 0.25;
  cfg.stream = desk_ctta_spec(0, 7);
  cfg.seeds = {0, 1, 2};
  cfg.oracle.mode = OracleMode::kHuman;
  cfg.oracle.timeout_s = 12;
  cfg.sweep.budgets = {1, 16};
  cfg.sweep.domain_orders = {{4, 3, 2, 1, 0}};
  const json doc = to_json(cfg);
  const auto back = config_from_json(doc);
  EXPECT_EQ(to_json(back), doc);
  EXPECT_EQ(back.annotator.suppression_k, 3);
  EXPECT_EQ(back.stream.segments, cfg.stream.segments);
  EXPECT_EQ(doc["format_version"].get<int>(), 1);
}

TEST(Config, MissingFieldsTakeDefaults) {
  auto cfg = config_from_json(json::parse(R"({"adapter": {"budget": 4}})"));
  EXPECT_EQ(cfg.adapter.budget, 4);
  EXPECT_EQ(cfg.adapter.kind, AdapterKind::kB1);
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(error_of(json::parse(R"({"adapter": {"budget": -1}})")).rfind("adapter", 0), 0u);
  EXPECT_NE(error_of(json::parse(R"({"adapter": {"bugdet": 3}})")).find("adapter.bugdet"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"annotator": {"kind": "margin"}})")).find("annotator.kind"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"optimizer": {"lr": 0}})")).find("optimizer.lr"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"optimizer": {"lr": "fast"}})")).find("optimizer.lr"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"seeds": [-1]})")).find("seeds"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"stream": {"segments": [{"corruption": "fog"}]}})"))
                .find("stream.segments[0].corruption"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"format_version": 2})")).find("format_version"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"sweep": {"omegas": [1.5]}})")).find("sweep.omegas"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"annotator": {"imbalance": "blend", "omega": 2}})"))
                .find("annotator"),
            std::string::npos);
  EXPECT_NE(error_of(json::parse("[1, 2]")), "");
}

TEST(Config, StreamProtocolRules) {
  EXPECT_NE(error_of(json::parse(R"({"stream": {"protocol": "ftta"}})")).find("stream"),
            std::string::npos);
  auto cfg = config_from_json(json::parse(
      R"({"stream": {"protocol": "ftta",
                     "segments": [{"corruption": "blur", "severity": 3, "frames": 10}]}})"));
  EXPECT_EQ(cfg.stream.protocol, Protocol::kFtta);
  EXPECT_EQ(cfg.stream.total_frames(), 10);
}

TEST(Config, LoadFromFile) {
  const auto dir = fs::temp_directory_path() / "ataseg_config_test";
  fs::create_directories(dir);
  std::ofstream(dir / "ok.json") << R"({"adapter": {"kind": "b0"}})";
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(load_config((dir / "ok.json").string()).adapter.kind, AdapterKind::kB0);
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
  fs::remove_all(dir);
}

#ifdef ATASEG_CLI_PATH

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ATASEG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = fs::temp_directory_path() / "ataseg_cli_test";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"adapter": {"budget": -3}})";
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("run --budget 0 --adapter b1"), 2);
  EXPECT_EQ(run_cli("run --no-such-flag"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
  fs::remove_all(dir);
}

#endif
