#include "sessionrec/manifest.hpp"

#include <ctime>
#include <fstream>
#include <json.hpp>
#include <sstream>

#ifndef SESSIONREC_GIT_DESCRIBE
#define SESSIONREC_GIT_DESCRIBE "unknown"
#endif

namespace sessionrec {

std::string build_git_describe() { return SESSIONREC_GIT_DESCRIBE; }

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["arguments"] = arguments;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream lines(resolved_config);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  j["config"] = cfg;
  j["paths"] = paths;
  j["seed"] = seed;
  j["git_describe"] = git_describe;
  j["started_at"] = started_at;
  j["wall_seconds"] = wall_seconds;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  return j.dump(2);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  const auto path = run_dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest.to_json() << '\n';
}

}  // namespace sessionrec
