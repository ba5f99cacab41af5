#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SESSIONREC_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("unknown flags print usage and exit with 2") {
  const auto r = run_cli("bench --n 64 --bogus 3");
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("Usage") != std::string::npos);
  CHECK(run_cli("no-such-command").exit_code == 2);
}

TEST_CASE("bench forwards the pair ratio") {
  const auto r = run_cli("bench --n 1024 --m 16 --reps 1");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["pair_ratio"].get<double>() == 256.0);
}

TEST_CASE("failures exit nonzero with a one-line diagnostic") {
  const auto r = run_cli("evaluate --checkpoint /nonexistent/x.ckpt --data /nonexistent --protocol session");
  CHECK(r.exit_code == 1);
  CHECK(r.out.rfind("error: ", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
}

TEST_CASE("synth, prepare, train and evaluate run end to end") {
  const auto dir = fs::temp_directory_path() / "sessionrec_cli_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  REQUIRE(run_cli("synth --users 20 --sessions 5 --catalog 40 --pattern rotate-catalog --output " + d +
                  "/log.csv")
              .exit_code == 0);
  const auto prep = run_cli("prepare-data --input " + d + "/log.csv --output " + d + "/data");
  REQUIRE(prep.exit_code == 0);
  CHECK(nlohmann::json::parse(prep.out)["num_users"].get<int>() == 20);
  {
    std::ofstream cfg(dir / "train.cfg");
    cfg << "epochs = 2\nmodel.d = 8\nmodel.d_feature = 4\nsse.layers = 1\nloss.num_negatives = 8\n";
  }
  const auto tr = run_cli("--run-dir " + d + "/run train --data " + d + "/data --config " + d +
                          "/train.cfg --out " + d + "/model --set batch_size=4");
  REQUIRE(tr.exit_code == 0);
  CHECK(fs::exists(dir / "model" / "best.ckpt"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["config"]["batch_size"] == "4");

  const auto ev = run_cli("evaluate --checkpoint " + d + "/model/best.ckpt --data " + d +
                          "/data --protocol session");
  REQUIRE(ev.exit_code == 0);
  const auto report = nlohmann::json::parse(ev.out);
  CHECK(report["protocol"] == "leave_one_session_out");
  CHECK(report["num_users"].get<int>() == 20);
  fs::remove_all(dir);
}
