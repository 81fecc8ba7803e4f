// Smoke tests of the command-line front end: exit codes, CSV schemas,
// manifest determinism. The binary path comes from the build system.
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef KMT_CLI_PATH
#define KMT_CLI_PATH "kmt"
#endif

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(KMT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("unknown flags exit with the usage code") {
  CHECK(run_cli("thresholds --no-such-flag 3").exit_code == 2);
  CHECK(run_cli("definitely-not-a-subcommand").exit_code == 2);
}

TEST_CASE("thresholds subcommand writes the declared schema") {
  const RunResult r = run_cli(
      "thresholds --n 16 --R 1 --sigma 0.25 --alpha 0.1 --kind sum "
      "--out /tmp/kmt_t.csv --json /tmp/kmt_t.json --manifest /tmp/kmt_t.m.json");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp("/tmp/kmt_t.csv");
  CHECK(csv.rfind("k,value\n", 0) == 0);

  const nlohmann::json j = nlohmann::json::parse(slurp("/tmp/kmt_t.json"));
  CHECK(j["n"] == 16);
  CHECK(j["kind"] == "sum");
  REQUIRE(j["values"].size() == 16);
  // Endpoint identity: the last row equals meta.delta_star exactly.
  CHECK(double(j["values"].back()) == double(j["meta"]["delta_star"]));

  const nlohmann::json m = nlohmann::json::parse(slurp("/tmp/kmt_t.m.json"));
  CHECK(m.contains("command"));
  CHECK(m.contains("seed"));
  CHECK(m["artifacts"].size() == 2);
}

TEST_CASE("reruns reproduce outputs byte for byte") {
  const std::string args =
      "thresholds --n 16 --R 1 --sigma 0.3 --alpha 0.05 --kind bridge "
      "--out /tmp/kmt_rep.csv";
  CHECK(run_cli(args).exit_code == 0);
  const std::string first = slurp("/tmp/kmt_rep.csv");
  CHECK(run_cli(args).exit_code == 0);
  CHECK(slurp("/tmp/kmt_rep.csv") == first);
  CHECK(!first.empty());
}

TEST_CASE("empirical subcommand consumes a stream file") {
  {
    std::ofstream in("/tmp/kmt_stream.txt");
    for (int i = 0; i < 32; ++i) in << (0.2 + 0.6 * ((i * 37) % 11) / 10.0) << "\n";
  }
  const RunResult r = run_cli(
      "empirical --input /tmp/kmt_stream.txt --R 1 --alpha 0.1 --rho 0.5 --n 32 "
      "--kind bridge --out /tmp/kmt_emp.csv");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp("/tmp/kmt_emp.csv");
  CHECK(csv.rfind("k,sigma_L,sigma_U,threshold,fallback\n", 0) == 0);
  std::size_t rows = 0;
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 33);
}

TEST_CASE("validate coverage emits a JSON report") {
  const RunResult r =
      run_cli("--seed 5 validate coverage --n 16 --trials 40 --alpha 0.2");
  CHECK(r.exit_code == 0);
  const std::size_t brace = r.output.find('{');
  REQUIRE(brace != std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(r.output.substr(brace));
  CHECK(j["trials"] == 40);
  CHECK(double(j["exceedance_rate_bridge"]) <= 1.0);
}

TEST_CASE("validate wasserstein reports dominance") {
  const RunResult r = run_cli("validate wasserstein --alphabet 0,2 --n 4 --k 2 --p 2");
  CHECK(r.exit_code == 0);
  const std::size_t brace = r.output.find('{');
  REQUIRE(brace != std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(r.output.substr(brace));
  CHECK(bool(j["dominated"]));
  CHECK(double(j["bound"]) >= double(j["brute_force"]));
}

TEST_CASE("config file supplies defaults that flags override") {
  {
    std::ofstream cfg("/tmp/kmt_cfg.json");
    cfg << R"({"seed": 99, "thresholds": {"n": 8, "kind": "bridge", "R": 1.0,)"
        << R"( "sigma": 0.25, "alpha": 0.1, "out": "/tmp/kmt_cfg_out.csv"}})";
  }
  const RunResult r = run_cli("--config /tmp/kmt_cfg.json thresholds --alpha 0.2");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("seed=99") != std::string::npos);
  const std::string csv = slurp("/tmp/kmt_cfg_out.csv");
  std::size_t rows = 0;
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 9);  // header + 8 rows: config n=8 applied
}

TEST_CASE("hitting bound prints a JSON result") {
  const RunResult r = run_cli(
      "--seed 3 hitting bound --N 64 --mu -0.02 --sigma 0.5 --R 1 --g 8 "
      "--alpha 0.01 --paths 2000");
  CHECK(r.exit_code == 0);
  const std::size_t brace = r.output.find('{');
  REQUIRE(brace != std::string::npos);
  const nlohmann::json j = nlohmann::json::parse(r.output.substr(brace));
  CHECK(j.contains("bound"));
  CHECK(j.contains("crossing"));
}

TEST_CASE("computation errors exit with code 1") {
  // sigma > R/2 violates the bounded-model assumption.
  const RunResult r = run_cli(
      "thresholds --n 8 --R 1 --sigma 0.9 --alpha 0.1 --kind bridge --out /tmp/x.csv");
  CHECK(r.exit_code == 1);
}
