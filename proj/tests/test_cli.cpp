#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "daibc/blobfile.hpp"
#include "daibc/sim/town.hpp"
#include "testutil.hpp"

using namespace daibc;
namespace fs = std::filesystem;

#ifndef DAIBC_CLI_PATH
#define DAIBC_CLI_PATH "daibc"
#endif

namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(DAIBC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}
}  // namespace

TEST_CASE("gen-town writes a schema-valid file, byte-identical across runs") {
  testutil::TempDir tmp("cli_town");
  const std::string t1 = (tmp.path / "t1.json").string();
  const std::string t2 = (tmp.path / "t2.json").string();
  REQUIRE(run_cli("gen-town --seed 3 --blocks 3 --out " + t1) == kExitOk);
  REQUIRE(run_cli("gen-town --seed 3 --blocks 3 --out " + t2) == kExitOk);
  CHECK(read_text_file(t1) == read_text_file(t2));
  const sim::TownMap town = sim::load_town(t1);  // schema-valid
  CHECK(town.nodes.size() == 16);
  CHECK(fs::exists(t1 + ".config.json"));
}

TEST_CASE("rerunning from the resolved-config echo reproduces the artifact") {
  testutil::TempDir tmp("cli_echo");
  const std::string t1 = (tmp.path / "t1.json").string();
  const std::string t2 = (tmp.path / "t2.json").string();
  REQUIRE(run_cli("gen-town --seed 9 --blocks 3 --out " + t1) == kExitOk);
  REQUIRE(run_cli("gen-town --config " + t1 + ".config.json --out " + t2) == kExitOk);
  CHECK(read_text_file(t1) == read_text_file(t2));
}

TEST_CASE("gen-town rejects degenerate block counts with a usage exit") {
  testutil::TempDir tmp("cli_usage");
  CHECK(run_cli("gen-town --blocks 1 --out " + (tmp.path / "x.json").string()) == kExitUsage);
}

TEST_CASE("unknown config keys are rejected") {
  testutil::TempDir tmp("cli_cfg");
  write_text_file(tmp.path / "bad.json", "{\"no_such_key\": 1}\n");
  CHECK(run_cli("gen-town --config " + (tmp.path / "bad.json").string() + " --out " +
                (tmp.path / "t.json").string()) == kExitInput);
}

TEST_CASE("missing input files exit with the input-validation code") {
  CHECK(run_cli("collect --town /definitely/missing.json --out /tmp/unused_daibc") == kExitInput);
  CHECK(run_cli("train --data /definitely/missing --out /tmp/unused_daibc") == kExitInput);
}

TEST_CASE("cli pipeline: t-fixture town, collect, train, eval, snapshot, landscape") {
  testutil::TempDir tmp("cli_pipe");
  const std::string town = (tmp.path / "town.json").string();
  const std::string data = (tmp.path / "data").string();
  REQUIRE(run_cli("gen-town --preset t-fixture --out " + town) == kExitOk);
  REQUIRE(run_cli("collect --town " + town + " --out " + data +
                  " --seed 4 --episodes 2 --steps 120 --bev-h 16 --bev-w 16 --phi 1.0") ==
          kExitOk);
  CHECK(fs::exists(fs::path(data) / "manifest.json"));
  CHECK(fs::exists(fs::path(data) / "obs.bin"));
  CHECK(fs::exists(fs::path(data) / "act.bin"));
  CHECK(fs::exists(fs::path(data) / "meta.csv"));

  const std::string run = (tmp.path / "run").string();
  REQUIRE(run_cli("train --method da-ibc --data " + data + " --out " + run +
                  " --seed 7 --epochs 1 --batch 16 --lr 1e-3 --n-neg 8 --embed-dim 32") ==
          kExitOk);
  const std::string ckpt = run + "/checkpoint.bin";
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(run + "/loss.jsonl"));
  CHECK(fs::exists(run + "/train.config.json"));

  const std::string report = (tmp.path / "eval.json").string();
  REQUIRE(run_cli("eval --ckpt " + ckpt + " --town " + town + " --data " + data + " --out " +
                  report + " --episodes 2 --steps 60 --n-samples 64") == kExitOk);
  auto j = ordered_json::parse(read_text_file(report));
  CHECK(j.at("episodes").size() == 2);
  CHECK(j.contains("mean_score"));

  const std::string fixtures = (tmp.path / "fixtures").string();
  REQUIRE(run_cli("snapshot --town " + town + " --out " + fixtures +
                  " --kind decision --bev-h 16 --bev-w 16 --phi 1.0") == kExitOk);
  CHECK(fs::exists(fixtures + "/decision.state"));
  CHECK(fs::exists(fixtures + "/decision.obs"));

  const std::string probe = (tmp.path / "probe.json").string();
  REQUIRE(run_cli("probe --ckpt " + ckpt + " --town " + town + " --state " + fixtures +
                  "/decision.state --data " + data + " --out " + probe +
                  " --m 5 --rollout-steps 30 --free-run-steps 50 --n-samples 64") == kExitOk);
  auto pj = ordered_json::parse(read_text_file(probe));
  CHECK(pj.at("m").get<int>() == 5);
  CHECK(pj.at("branch_fractions").size() == 2);

  const std::string grid = (tmp.path / "landscape.csv").string();
  REQUIRE(run_cli("landscape --ckpt " + ckpt + " --state " + fixtures + "/decision.obs --data " +
                  data + " --out " + grid + " --grid 21 --n-samples 64") == kExitOk);
  const std::string csv = read_text_file(grid);
  CHECK(csv.rfind("steering,accel,energy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 21 * 21);
  CHECK(fs::exists(tmp.path / "landscape_overlays.csv"));
}

TEST_CASE("eval rejects a beta checkpoint passed where an EBM is required") {
  testutil::TempDir tmp("cli_kind");
  const std::string town = (tmp.path / "town.json").string();
  const std::string data = (tmp.path / "data").string();
  REQUIRE(run_cli("gen-town --preset t-fixture --out " + town) == kExitOk);
  REQUIRE(run_cli("collect --town " + town + " --out " + data +
                  " --seed 4 --episodes 1 --steps 60 --bev-h 16 --bev-w 16 --phi 1.0") == kExitOk);
  const std::string run = (tmp.path / "bc").string();
  REQUIRE(run_cli("train --method bc --data " + data + " --out " + run +
                  " --epochs 1 --batch 16 --embed-dim 32") == kExitOk);
  CHECK(run_cli("landscape --ckpt " + run + "/checkpoint.bin --state nowhere.obs --data " + data +
                " --out " + (tmp.path / "x.csv").string()) == kExitInput);
}
