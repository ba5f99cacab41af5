#include "sessionrec/synth.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace sessionrec {

std::string_view to_string(SynthPattern p) {
  switch (p) {
    case SynthPattern::copy_last_session: return "copy-last-session";
    case SynthPattern::rotate_catalog: return "rotate-catalog";
    case SynthPattern::hard_negative_sessions: return "hard-negative-sessions";
  }
  return "?";
}

SynthPattern parse_synth_pattern(std::string_view s) {
  for (auto p : {SynthPattern::copy_last_session, SynthPattern::rotate_catalog,
                 SynthPattern::hard_negative_sessions}) {
    if (s == to_string(p)) return p;
  }
  throw std::invalid_argument("unknown synthetic pattern '" + std::string(s) +
                              "' (copy-last-session, rotate-catalog, hard-negative-sessions)");
}

namespace {

struct Row {
  std::size_t item;
  bool positive;
};

class Emitter {
 public:
  Emitter(std::ostream& out, const SynthConfig& cfg, bool category)
      : out_(out), cfg_(cfg), category_(category) {
    out_ << "user,item,session,timestamp,action" << (category_ ? ",category" : "") << "\n";
  }

  void session(std::size_t user, std::size_t index, const std::vector<Row>& rows) {
    // Session index dominates the timestamp so prefixes in time are prefixes
    // of every user's history.
    const std::int64_t base = static_cast<std::int64_t>(index) * 10'000'000 +
                              static_cast<std::int64_t>(user) * 1000;
    std::int64_t t = base;
    for (const auto& r : rows) {
      out_ << 'u' << user << ",item" << r.item << ",u" << user << "_s" << index << ',' << t++
           << ',' << (r.positive ? "click" : "exposure");
      if (category_) out_ << ",topic" << r.item / cfg_.topic_size;
      out_ << '\n';
    }
  }

 private:
  std::ostream& out_;
  const SynthConfig& cfg_;
  bool category_;
};

std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// `count` distinct items not in `exclude`.
std::vector<std::size_t> random_items(std::mt19937_64& rng, std::size_t catalog, std::size_t count,
                                      const std::vector<std::size_t>& exclude) {
  std::vector<std::size_t> out;
  while (out.size() < count) {
    const std::size_t v = draw(rng, catalog);
    if (std::find(exclude.begin(), exclude.end(), v) != exclude.end()) continue;
    if (std::find(out.begin(), out.end(), v) != out.end()) continue;
    out.push_back(v);
  }
  return out;
}

std::vector<Row> mix(std::mt19937_64& rng, const std::vector<std::size_t>& pos,
                     const std::vector<std::size_t>& neg) {
  std::vector<Row> rows;
  for (auto v : pos) rows.push_back({v, true});
  for (auto v : neg) rows.push_back({v, false});
  std::shuffle(rows.begin(), rows.end(), rng);
  return rows;
}

void copy_or_rotate(const SynthConfig& cfg, std::mt19937_64& rng, Emitter& emit, bool rotate) {
  if (cfg.positives + cfg.negatives > cfg.catalog) {
    throw std::invalid_argument("synth: catalog too small for the requested session size");
  }
  // Starting positive sets walk through shuffled copies of the catalog, so
  // every item is somebody's positive.
  std::vector<std::size_t> deck;
  std::size_t next = 0;
  auto deal = [&]() {
    if (next == deck.size()) {
      deck.resize(cfg.catalog);
      std::iota(deck.begin(), deck.end(), 0);
      std::shuffle(deck.begin(), deck.end(), rng);
      next = 0;
    }
    return deck[next++];
  };
  for (std::size_t u = 0; u < cfg.users; ++u) {
    std::vector<std::size_t> pos;
    while (pos.size() < cfg.positives) {
      const std::size_t v = deal();
      if (std::find(pos.begin(), pos.end(), v) == pos.end()) pos.push_back(v);
    }
    for (std::size_t s = 0; s < cfg.sessions; ++s) {
      if (rotate && s > 0) {
        for (auto& v : pos) v = (v + 1) % cfg.catalog;
      }
      emit.session(u, s, mix(rng, pos, random_items(rng, cfg.catalog, cfg.negatives, pos)));
    }
  }
}

void hard_negatives(const SynthConfig& cfg, std::mt19937_64& rng, Emitter& emit) {
  const std::size_t topics = cfg.catalog / cfg.topic_size;
  if (topics == 0) throw std::invalid_argument("synth: catalog smaller than one topic");
  // Each user splits each of their topics into a half they click and a half
  // they skip. The split is private to the user, so an item one user skips
  // is clicked by others and popularity inside a topic stays flat.
  const std::size_t liked = cfg.topic_size / 2;
  if (cfg.positives > liked || cfg.negatives > cfg.topic_size - liked) {
    throw std::invalid_argument("synth: topic_size too small for the requested session size");
  }
  std::vector<std::size_t> topic_deck;
  std::size_t next = 0;
  auto deal_topic = [&]() {
    if (next == topic_deck.size()) {
      topic_deck.resize(topics);
      std::iota(topic_deck.begin(), topic_deck.end(), 0);
      std::shuffle(topic_deck.begin(), topic_deck.end(), rng);
      next = 0;
    }
    return topic_deck[next++];
  };
  for (std::size_t u = 0; u < cfg.users; ++u) {
    std::vector<std::size_t> interests;
    while (interests.size() < std::min(cfg.topics_per_user, topics)) {
      const std::size_t t = deal_topic();
      if (std::find(interests.begin(), interests.end(), t) == interests.end()) {
        interests.push_back(t);
      }
    }
    std::vector<std::vector<std::size_t>> good, bad;
    for (std::size_t t : interests) {
      std::vector<std::size_t> members(cfg.topic_size);
      std::iota(members.begin(), members.end(), t * cfg.topic_size);
      std::shuffle(members.begin(), members.end(), rng);
      good.emplace_back(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(liked));
      bad.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(liked), members.end());
    }
    // Each shown item comes from a random interest topic: clicks from the
    // user's half, skipped exposures from the other half.
    for (std::size_t s = 0; s < cfg.sessions; ++s) {
      std::vector<std::size_t> pos, neg;
      auto take = [&](const std::vector<std::vector<std::size_t>>& from,
                      std::vector<std::size_t>& into) {
        for (;;) {
          const auto& half = from[draw(rng, from.size())];
          const std::size_t v = half[draw(rng, half.size())];
          if (std::find(into.begin(), into.end(), v) == into.end()) {
            into.push_back(v);
            return;
          }
        }
      };
      while (pos.size() < cfg.positives) take(good, pos);
      while (neg.size() < cfg.negatives) take(bad, neg);
      emit.session(u, s, mix(rng, pos, neg));
    }
  }
}

}  // namespace

void write_synthetic_log(const SynthConfig& cfg, std::ostream& out) {
  if (cfg.users == 0 || cfg.sessions == 0 || cfg.catalog == 0 || cfg.positives == 0) {
    throw std::invalid_argument("synth: users, sessions, catalog and positives must be positive");
  }
  std::mt19937_64 rng(cfg.seed);
  const bool hard = cfg.pattern == SynthPattern::hard_negative_sessions;
  Emitter emit(out, cfg, hard || cfg.category_feature);
  if (hard) {
    hard_negatives(cfg, rng, emit);
  } else {
    copy_or_rotate(cfg, rng, emit, cfg.pattern == SynthPattern::rotate_catalog);
  }
}

void write_synthetic_log(const SynthConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_synthetic_log(cfg, out);
}

}  // namespace sessionrec
