#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "support.hpp"

using namespace optira;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "optira");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("optira-cli-" + std::to_string(getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSample = test::source_path("data/sample_corpus.json");
const std::string kSampleMock = test::source_path("data/sample_corpus.mock.yaml");

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes cover every outcome") {
  CHECK(cli::exit_code_for(RunOutcome::Success) == 0);
  CHECK(cli::exit_code_for(RunOutcome::InputFailure) == 2);
  CHECK(cli::exit_code_for(RunOutcome::BackendFailure) == 3);
  CHECK(cli::exit_code_for(RunOutcome::ModelFailure) == 3);
  CHECK(cli::exit_code_for(RunOutcome::Infeasible) == 4);
  CHECK(cli::exit_code_for(RunOutcome::ExecutionFailed) == 4);
  CHECK(cli::exit_code_for(RunOutcome::Inconsistent) == 4);
  CHECK(cli::exit_code_for(RunOutcome::InternalError) == 5);
}

TEST_CASE("every flag is documented") {
  const std::string doc = slurp(test::source_path("docs/cli.md"));
  REQUIRE_FALSE(doc.empty());
  const std::string help = invoke({"solve", "--help"}).out + invoke({"bench", "--help"}).out + invoke({"inspect", "--help"}).out +
                           invoke({"--help"}).out;
  for (const std::string& flag : cli::registered_flags()) {
    CHECK_MESSAGE(doc.find("`" + flag) != std::string::npos, flag);
    CHECK_MESSAGE(help.find(flag) != std::string::npos, flag);
  }
  for (const char* code : {"| 0 ", "| 2 ", "| 3 ", "| 4 ", "| 5 "}) CHECK(doc.find(code) != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"inspect", "bogus", test::source_path("data/examples/convex.json")}).code == 2);
  CHECK(invoke({"solve", "/nonexistent/problem.txt"}).code == 2);
  CHECK(invoke({"bench", kSample, "--N", "0"}).code == 2);
  CHECK(invoke({"solve", "--text", "x", "--K", "99"}).code == 2);
  CHECK(invoke({"solve", "--text", "x", "--ablate", "o-nothing"}).code == 2);
  CHECK(invoke({"solve", kSample}).code == 2);  // a corpus needs --problem-id
}

TEST_CASE("malformed corpus exits 2 and names the line") {
  const fs::path dir = scratch("bad");
  const std::string path = write(dir / "c.json", "[\n{\"id\": \"a\",\n \"text\": }\n]");
  const Result r = invoke({"bench", path, "--out-dir", (dir / "out").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("c.json:3") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("solve writes its artifacts") {
  const fs::path dir = scratch("solve");
  const Result r = invoke({"solve", test::source_path("data/examples/bilinear.json"), "--out-dir", dir.string()});
  CHECK(r.code == 0);
  for (const char* f : {"run.json", "model.json", "summary.txt", "solution.json"}) CHECK(fs::exists(dir / f));
  const auto run = nlohmann::json::parse(slurp(dir / "run.json"));
  CHECK(run["V"] == 1);
  CHECK(run["objective"].get<double>() == doctest::Approx(2.0).epsilon(1e-4));
  fs::remove_all(dir);
}

TEST_CASE("solve through the mock backend") {
  const fs::path dir = scratch("mock");
  const Result ok = invoke({"solve", kSample, "--problem-id", "p07", "--mock-script", kSampleMock, "--out-dir", dir.string()});
  CHECK(ok.code == 0);
  const Result no_ecl = invoke({"solve", kSample, "--problem-id", "p07", "--mock-script", kSampleMock, "--ablate", "o-ecl",
                             "--out-dir", dir.string()});
  CHECK(no_ecl.code == 4);
  const Result no_fdc = invoke({"solve", kSample, "--problem-id", "p08", "--mock-script", kSampleMock, "--ablate", "o-fdc",
                             "--out-dir", dir.string()});
  CHECK(no_fdc.code == 4);
  const std::string empty = write(dir / "empty.yaml", "entries: []\n");
  CHECK(invoke({"solve", "--text", "minimize power", "--mock-script", empty, "--out-dir", dir.string()}).code == 3);
  fs::remove_all(dir);
}

TEST_CASE("remote backend without a key exits 3") {
  unsetenv("OPTIRA_CLI_TEST_KEY");
  const fs::path dir = scratch("remote");
  const Result r = invoke({"solve", "--text", "minimize power", "--backend", "remote", "--api-key-env", "OPTIRA_CLI_TEST_KEY",
                        "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("OPTIRA_CLI_TEST_KEY") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("bench writes metrics and report") {
  const fs::path dir = scratch("bench");
  const Result r = invoke({"bench", kSample, "--mock-script", kSampleMock, "--N", "1", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  for (const char* f : {"metrics.json", "report.json", "report.txt", "runs.jsonl"}) CHECK(fs::exists(dir / f));
  const auto m = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(m["success_rate"] == 1.0);
  CHECK(r.out.find("SuccessRate") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("config file supplies defaults") {
  const fs::path dir = scratch("config");
  const std::string cfg = write(dir / "optira.toml", "[bench]\nN = 2\nout-dir = \"" + (dir / "out").string() + "\"\n");
  const Result r = invoke({"--config", cfg, "bench", kSample});
  CHECK(r.code == 0);
  const auto m = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  CHECK(m["runs"] == 24);
  fs::remove_all(dir);
}

TEST_CASE("inspect stages") {
  const std::string bilinear = test::source_path("data/examples/bilinear.json");
  const Result model = invoke({"inspect", "model", bilinear});
  CHECK(model.code == 0);
  CHECK(model.out.find("x2 continuous [0.1, 2] W") != std::string::npos);
  CHECK(model.out.find("g0: 1 - x1 * x2 <= 0") != std::string::npos);

  const Result curv = invoke({"inspect", "curvature", bilinear});
  CHECK(curv.code == 0);
  CHECK(std::regex_search(curv.out, std::regex("problem non-convex, 1 offenders")));

  const Result conv = invoke({"inspect", "convexify", bilinear});
  CHECK(conv.code == 0);
  CHECK(conv.out.find("strategy") != std::string::npos);
  CHECK(conv.out.find("surrogate") != std::string::npos);

  const Result convex = invoke({"inspect", "curvature", test::source_path("data/examples/convex.json")});
  CHECK(convex.out.find("problem convex, 0 offenders") != std::string::npos);
}

}  // TEST_SUITE
