#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace sessionrec {

// Record of one command invocation, written into its run directory before
// work starts and rewritten with the outcome at exit.
struct RunManifest {
  std::string command;
  std::string arguments;
  std::string resolved_config;  // key = value lines
  std::map<std::string, std::string> paths;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::string started_at;  // UTC, ISO 8601
  double wall_seconds = 0.0;
  std::string status = "running";
  std::string error;

  std::string to_json() const;
};

std::string build_git_describe();
std::string utc_timestamp(std::chrono::system_clock::time_point t);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& run_dir);

}  // namespace sessionrec
