#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "relief/cli.hpp"
#include "relief/config.hpp"
#include "relief/error.hpp"

using namespace relief;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("relief_cli_" + std::to_string(std::rand()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void Put(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

// Runs the built binary, returns its exit status.
int Shell(const std::string& args) {
  std::string cmd = std::string(RELIEF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kSmallModel =
    R"({"n_e":4,"n_z":2,"epochs":2,"csd_event_samples":2,"csd_rollouts":1})";

}  // namespace

TEST_CASE("cli usage errors exit 1") {
  CHECK(RunCli({"relief"}) == kExitInvalid);
  CHECK(RunCli({"relief", "nosuch"}) == kExitInvalid);
  CHECK(RunCli({"relief", "train"}) == kExitInvalid);  // --data required
  CHECK(RunCli({"relief", "evaluate", "--data", "/nonexistent.csv"}) == kExitInvalid);
  CHECK(RunCli({"relief", "simulate", "--seed", "abc"}) == kExitInvalid);
  CHECK(RunCli({"relief", "--help"}) == kExitOk);
}

TEST_CASE("cli config validation precedes side effects") {
  TempDir d;
  Put(d / "bad.json", R"({"horizon": 48, "nonsense_key": 1})");
  CHECK(RunCli({"relief", "simulate", "--config", d / "bad.json", "--out", d / "x.csv"}) ==
        kExitInvalid);
  CHECK_FALSE(fs::exists(d / "x.csv"));
  Put(d / "neg.json", R"({"horizon": -1})");
  CHECK(RunCli({"relief", "simulate", "--config", d / "neg.json", "--out", d / "x.csv"}) ==
        kExitInvalid);
  CHECK_FALSE(fs::exists(d / "x.csv"));
  Put(d / "notjson.json", "{");
  CHECK(RunCli({"relief", "multi-agency", "--config", d / "notjson.json"}) == kExitInvalid);
}

TEST_CASE("cli simulate is byte-deterministic") {
  TempDir d;
  REQUIRE(RunCli({"relief", "simulate", "--seed", "5", "--out", d / "a.csv"}) == kExitOk);
  REQUIRE(RunCli({"relief", "simulate", "--seed", "5", "--threads", "3", "--out",
                  d / "b.csv"}) == kExitOk);
  REQUIRE(RunCli({"relief", "simulate", "--seed", "6", "--out", d / "c.csv"}) == kExitOk);
  CHECK(read_file(d / "a.csv") == read_file(d / "b.csv"));
  CHECK(read_file(d / "a.csv") != read_file(d / "c.csv"));
  CHECK(read_file(d / "a.csv").rfind("time,q1,q2,q3\n", 0) == 0);
}

TEST_CASE("cli train, predict, optimize round trip") {
  TempDir d;
  REQUIRE(RunCli({"relief", "simulate", "--seed", "2", "--out", d / "d.csv"}) == kExitOk);
  Put(d / "m.json", kSmallModel);
  REQUIRE(RunCli({"relief", "train", "--data", d / "d.csv", "--config", d / "m.json",
                  "--until", "36", "--seed", "1", "--out", d / "model.json"}) == kExitOk);
  REQUIRE(RunCli({"relief", "predict", "--model", d / "model.json", "--data", d / "d.csv",
                  "--T", "36", "--psi", "3", "--out", d / "p.json"}) == kExitOk);
  auto p = load_json_file(d / "p.json");
  CHECK(p["samples"].size() == 3);
  CHECK(p["T_plus"].get<double>() == doctest::Approx(48.0));
  for (const auto& s : p["samples"]) {
    for (const auto& e : s) {
      CHECK(e["time"].get<double>() > 36.0);
      CHECK(e["time"].get<double>() <= 48.0);
    }
  }

  Put(d / "s.json",
      R"({"T":36,"T_plus":48,"R":[0,3,1],"unmet":[[[35,2]],[],[]],"W":40,)"
      R"("w":[1,2,1],"c":[2,4,2]})");
  for (const char* th : {"1", "4"}) {
    REQUIRE(RunCli({"relief", "optimize", "--model", d / "model.json", "--state", d / "s.json",
                    "--data", d / "d.csv", "--psi", "8", "--seed", "3", "--threads", th,
                    "--out", d / (std::string("o") + th + ".json")}) == kExitOk);
  }
  CHECK(read_file(d / "o1.json") == read_file(d / "o4.json"));
  auto o = load_json_file(d / "o1.json");
  auto x = o["plan"]["x"].get<std::vector<int>>();
  REQUIRE(x.size() == 3);
  CHECK(x[0] + 2 * x[1] + x[2] <= 40);
  CHECK(o["state"]["U"] == nlohmann::json({2, 0, 0}));
  CHECK(o["psi"] == 8);

  // Arrival-time draws must respect xi > T_plus_max.
  Put(d / "s2.json",
      R"({"T":36,"T_plus":48,"R":[0,3,1],"W":40,"w":[1,1,1],"c":[2,4,2],"T_plus_max":62})");
  CHECK(RunCli({"relief", "optimize", "--model", d / "model.json", "--state", d / "s2.json",
                "--upsilon", "2", "--psi", "3"}) == kExitInvalid);
  Put(d / "s3.json",
      R"({"T":36,"T_plus":48,"R":[0,3,1],"W":40,"w":[1,1,1],"c":[2,4,2],"T_plus_max":54,)"
      R"("xi":[60,60,60]})");
  REQUIRE(RunCli({"relief", "optimize", "--model", d / "model.json", "--state", d / "s3.json",
                  "--upsilon", "2", "--psi", "3", "--out", d / "e.json"}) == kExitOk);
  auto e = load_json_file(d / "e.json");
  REQUIRE(e["arrivals"].size() == 2);
  for (const auto& a : e["arrivals"]) {
    CHECK(a.get<double>() > 36.0);
    CHECK(a.get<double>() <= 54.0);
  }

  // Model type count must match the state.
  Put(d / "s4.json", R"({"T":36,"T_plus":48,"R":[0,3],"W":40,"c":[2,4]})");
  CHECK(RunCli({"relief", "optimize", "--model", d / "model.json", "--state", d / "s4.json"}) ==
        kExitInvalid);
}

TEST_CASE("cli evaluate rer fulfils no future demand") {
  TempDir d;
  REQUIRE(RunCli({"relief", "simulate", "--seed", "4", "--out", d / "d.csv"}) == kExitOk);
  REQUIRE(RunCli({"relief", "evaluate", "--data", d / "d.csv", "--method", "rer", "--out",
                  d / "r.json"}) == kExitOk);
  auto r = load_json_file(d / "r.json");
  CHECK(r["report"]["fulfilled_future_pct"].get<double>() == 0.0);
  CHECK(r["config"]["method"] == "rer");
  CHECK(r["config"]["W"].get<double>() == 200.0);
  CHECK(RunCli({"relief", "evaluate", "--data", d / "d.csv", "--method", "magic"}) ==
        kExitInvalid);
}

TEST_CASE("cli selftest passes") {
  SelftestResult r = run_selftest(11, 40);
  CHECK(r.grad_max_rel_error < 1e-3);
  CHECK(r.certificate_instances == 41);
  CHECK(r.certificate_failures == 0);
  CHECK(r.binding_equality_seen);
  CHECK(RunCli({"relief", "selftest", "--seed", "2", "--instances", "20"}) == kExitOk);
}

TEST_CASE("cli binary exit codes and determinism") {
  TempDir d;
  CHECK(Shell("") == kExitInvalid);
  CHECK(Shell("simulate --out " + (d / "a.csv") + " --seed 9") == kExitOk);
  CHECK(Shell("simulate --out " + (d / "b.csv") + " --seed 9 --threads 2") == kExitOk);
  CHECK(read_file(d / "a.csv") == read_file(d / "b.csv"));
  CHECK(Shell("evaluate --data " + (d / "missing.csv")) == kExitInvalid);

  Put(d / "b.json",
      std::string(R"({"datasets":1,"sim":{"horizon":24},"horizon":{"end":24,"psi":4,"model":)") +
          kSmallModel + R"(},"grid":{"param":"W","values":[100,200]}})");
  CHECK(Shell("bench --config " + (d / "b.json") + " --seed 1 --out " + (d / "x.csv")) ==
        kExitOk);
  CHECK(Shell("bench --config " + (d / "b.json") + " --seed 1 --threads 3 --out " +
              (d / "y.csv")) == kExitOk);
  CHECK(read_file(d / "x.csv") == read_file(d / "y.csv"));
  std::istringstream lines(read_file(d / "x.csv"));
  int n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  CHECK(n == 1 + 3 * 2);
}

TEST_CASE("cli multi-agency report echoes config") {
  TempDir d;
  Put(d / "ma.json", std::string(R"({"runs":2,"horizon":{"psi":4,"model":)") + kSmallModel +
                         "}}");
  REQUIRE(RunCli({"relief", "multi-agency", "--config", d / "ma.json", "--seed", "1", "--out",
                  d / "o.json"}) == kExitOk);
  auto o = load_json_file(d / "o.json");
  CHECK(o["config"]["runs"] == 2);
  CHECK(o["config"]["stock"] == nlohmann::json({198, 220, 198}));
  REQUIRE(o["rows"].size() == 2);
  for (const auto& r : o["rows"]) {
    CHECK(r["avg_fill_rate"].get<double>() >= 0.0);
    CHECK(r["avg_fill_rate"].get<double>() <= 1.0);
    CHECK(r["run_deprivation"].size() == 2);
  }
}
