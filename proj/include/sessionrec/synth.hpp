#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace sessionrec {

enum class SynthPattern : std::uint8_t { copy_last_session, rotate_catalog, hard_negative_sessions };

std::string_view to_string(SynthPattern p);
SynthPattern parse_synth_pattern(std::string_view s);

// copy_last_session: every session repeats the user's fixed positive set.
// rotate_catalog: each positive of the next session is the previous one + 1
//   (mod catalog).
// hard_negative_sessions: items are grouped into topics. Each user has a few
//   topics and privately splits each into items they click and items they
//   only look at. Sessions draw clicks and exposure-only items from the user's
//   topics, so distractors share a `category` column with the positives.
struct SynthConfig {
  SynthPattern pattern = SynthPattern::copy_last_session;
  std::size_t users = 200;
  std::size_t sessions = 10;
  std::size_t catalog = 500;
  std::size_t positives = 4;  // per session
  std::size_t negatives = 4;  // exposure-only items per session
  std::size_t topic_size = 20;
  std::size_t topics_per_user = 3;
  bool category_feature = false;  // always on for hard_negative_sessions
  std::uint64_t seed = 7;
};

// Writes a log with columns user,item,session,timestamp,action[,category].
// Timestamps order sessions of all users by session index, so a time-prefix
// of the log holds the earliest sessions of every user.
void write_synthetic_log(const SynthConfig& cfg, std::ostream& out);
void write_synthetic_log(const SynthConfig& cfg, const std::filesystem::path& path);

}  // namespace sessionrec
