// Drives the installed CLI binary end to end. The path comes from
// MB_CLI_PATH (set by ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "mb/dataio.hpp"

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

std::string cli_path() {
  const char* p = std::getenv("MB_CLI_PATH");
  REQUIRE_MESSAGE(p != nullptr, "MB_CLI_PATH must point at the CLI binary");
  return p;
}

RunResult run_cli(const std::string& args, bool keep_stderr = false) {
  const std::string cmd =
      cli_path() + " " + args + (keep_stderr ? " 2>&1" : " 2>/dev/null");
  RunResult r;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe.get())) r.out += buf.data();
  const int status = pclose(pipe.release());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name)
      : path("/tmp/mb_cli_" + name + "_" + std::to_string(::getpid())) {}
  ~TempPath() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
  CHECK(run_cli("grad-check --dim 0").exit_code == 2);
  CHECK(run_cli("variance-scan --trials 1").exit_code == 2);
  CHECK(run_cli("train --k 15").exit_code == 2);  // 4 * 4 != 15
  CHECK(run_cli("train --lr-drop nonsense").exit_code == 2);
  CHECK(run_cli("train --data /no/such/file.csv").exit_code == 1);
}

TEST_CASE("unbiasedness subcommand verdicts") {
  const RunResult exhaustive = run_cli("unbiasedness --exhaustive");
  CHECK(exhaustive.exit_code == 0);
  CHECK(exhaustive.out.find("exhaustive mean over 120 batches") !=
        std::string::npos);

  const RunResult tiny = run_cli("unbiasedness --m 2 --classes 2 --k 2 --exhaustive");
  CHECK(tiny.exit_code == 0);

  const RunResult sampled = run_cli("unbiasedness --trials 5000");
  CHECK(sampled.exit_code == 0);
}

TEST_CASE("grad-check is deterministic for a fixed seed") {
  const RunResult a = run_cli("grad-check --states 2 --seed 7");
  const RunResult b = run_cli("grad-check --states 2 --seed 7");
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("train: csv shape, steps 0, checkpoint round trip") {
  const RunResult empty = run_cli("train --steps 0");
  CHECK(empty.exit_code == 0);
  CHECK(empty.out == "step,forward_passes,objective,accuracy\n");

  TempPath ckpt("ckpt.json");
  const RunResult r = run_cli(
      "train --steps 30 --eval-every 10 --classes 4 --per-class 8 "
      "--save-checkpoint " +
      ckpt.path);
  CHECK(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "step,forward_passes,objective,accuracy");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);

  const mb::EmbeddingState state = mb::load_checkpoint(ckpt.path);
  CHECK(state.spec.input_dim() == 8);
  CHECK(state.weights.size() > 0);
}

TEST_CASE("train accepts a dataset csv") {
  TempPath data("data.csv");
  mb::save_dataset_csv(mb::gen_gaussian_clusters(4, 8, 3, 3.0, 0.2, 5), data.path);
  const RunResult r = run_cli("train --data " + data.path +
                              " --steps 20 --eval-every 10 "
                              "--samples-per-class 2 --sig-dim 2");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("step,forward_passes") == 0);
}

TEST_CASE("variance-scan emits the documented csv") {
  const RunResult r =
      run_cli("variance-scan --classes 4 --per-class 4 --trials 50 --k 4 --k 8");
  CHECK(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "estimator,k,trials,empirical_variance,vanilla_variance,abar_term,"
        "bound_value");
  int rows = 0;
  std::string line;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK((line.rfind("multibatch,", 0) == 0 || line.rfind("pairwise,", 0) == 0));
  }
  CHECK(rows == 4);  // two estimators, two batch sizes
}

TEST_CASE("compare writes one history per estimator") {
  TempPath stem("cmp");
  const RunResult r = run_cli("compare --steps 30 --eval-every 10 --out " +
                              stem.path);
  CHECK(r.exit_code == 0);
  for (const char* suffix : {"_multibatch.csv", "_pairwise.csv"}) {
    std::ifstream in(stem.path + suffix);
    REQUIRE_MESSAGE(in.good(), suffix);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,forward_passes,objective,accuracy");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
    std::remove((stem.path + suffix).c_str());
  }
  // Inline mode tags each history with a comment line.
  const RunResult inline_run = run_cli("compare --steps 20 --eval-every 10");
  CHECK(inline_run.exit_code == 0);
  CHECK(inline_run.out.find("# estimator multibatch") != std::string::npos);
  CHECK(inline_run.out.find("# estimator pairwise") != std::string::npos);
}

TEST_CASE("hardness-demo passes and reports its numbers") {
  const RunResult r = run_cli("hardness-demo");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("trained metric objective: 0\n") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
}
