#include "sessionrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace sessionrec {

namespace {

using json = nlohmann::json;

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a
// quote. Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.emplace_back(trim(cur));
  return fields;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is not available everywhere; strtod on a copy.
  std::string copy(s);
  if (copy.empty()) return false;
  char* end = nullptr;
  out = std::strtod(copy.c_str(), &end);
  return end == copy.c_str() + copy.size();
}

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::optional<Polarity> polarity_from_action(std::string_view action) {
  const std::string a = to_lower(trim(action));
  if (a == "click" || a == "purchase" || a == "buy" || a == "effective_view" || a == "like" ||
      a == "positive") {
    return Polarity::positive;
  }
  if (a == "exposure" || a == "impression" || a == "dislike" || a == "negative") {
    return Polarity::negative;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> FeatureSchema::cardinalities() const {
  std::vector<std::size_t> out;
  for (const auto& c : columns) out.push_back(c.cardinality());
  return out;
}

// ---------------------------------------------------------------- ingest

InteractionLog ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return ingest(in, options);
}

InteractionLog ingest(std::istream& in, const IngestOptions& options) {
  InteractionLog log;
  std::string line;
  std::size_t line_no = 0;

  // header
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      auto fields = split_csv(line);
      if (!fields) throw DataError(line_error(line_no, "unterminated quote in header"));
      header = std::move(*fields);
      break;
    }
  }
  if (options.polarity_feature) {
    FeatureColumn pol;
    pol.name = std::string(kPolarityFeature);
    pol.vocabulary = {"negative", "positive"};
    log.schema.columns.push_back(std::move(pol));
  }
  if (header.empty()) return log;

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[to_lower(header[i])] = i;
  for (const char* required : {"user", "item", "session", "timestamp", "action"}) {
    if (!column.contains(required)) {
      throw DataError("missing required column '" + std::string(required) + "'");
    }
  }
  const std::size_t user_col = column["user"];
  const std::size_t item_col = column["item"];
  const std::size_t session_col = column["session"];
  const std::size_t ts_col = column["timestamp"];
  const std::size_t action_col = column["action"];

  struct ExtraColumn {
    std::size_t index;
    std::size_t schema_index;
    bool continuous;
  };
  std::vector<ExtraColumn> extras;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == user_col || i == item_col || i == session_col || i == ts_col || i == action_col) {
      continue;
    }
    if (options.polarity_feature && to_lower(header[i]) == kPolarityFeature) {
      throw DataError("side-feature column name '" + header[i] + "' is reserved");
    }
    FeatureColumn fc;
    fc.name = header[i];
    fc.kind = header[i].starts_with("num_") ? FeatureKind::continuous : FeatureKind::categorical;
    extras.push_back({i, log.schema.columns.size(), fc.kind == FeatureKind::continuous});
    log.schema.columns.push_back(std::move(fc));
  }

  std::unordered_map<std::string, std::size_t> item_index;
  std::vector<std::unordered_map<std::string, std::uint32_t>> vocab(log.schema.columns.size());
  std::vector<std::vector<double>> raw_continuous(log.schema.columns.size());
  std::vector<std::vector<std::size_t>> continuous_rows(log.schema.columns.size());

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!fields) throw DataError(line_error(line_no, "unterminated quote"));
    if (fields->size() != header.size()) {
      throw DataError(line_error(line_no, "expected " + std::to_string(header.size()) +
                                              " fields, got " + std::to_string(fields->size())));
    }
    const auto& f = *fields;
    Interaction x;
    x.user_id = f[user_col];
    x.session_id = f[session_col];
    if (x.user_id.empty()) throw DataError(line_error(line_no, "empty user"));
    if (f[item_col].empty()) throw DataError(line_error(line_no, "empty item"));
    if (!parse_int(f[ts_col], x.timestamp)) {
      throw DataError(line_error(line_no, "bad timestamp '" + f[ts_col] + "'"));
    }
    const auto pol = polarity_from_action(f[action_col]);
    if (!pol) throw DataError(line_error(line_no, "unknown action label '" + f[action_col] + "'"));
    x.polarity = *pol;
    auto [it, inserted] = item_index.try_emplace(f[item_col], log.item_keys.size());
    if (inserted) log.item_keys.push_back(f[item_col]);
    x.item_id = it->second;

    x.side_features.assign(log.schema.columns.size(), 0);
    if (options.polarity_feature) x.side_features[0] = static_cast<std::uint32_t>(x.polarity);
    for (const auto& e : extras) {
      const std::string& raw = f[e.index];
      if (e.continuous) {
        double v = 0.0;
        if (!parse_double(raw, v)) {
          throw DataError(line_error(line_no, "bad numeric value '" + raw + "' in column " +
                                                  header[e.index]));
        }
        raw_continuous[e.schema_index].push_back(v);
        continuous_rows[e.schema_index].push_back(log.interactions.size());
      } else {
        auto& voc = vocab[e.schema_index];
        auto [vit, vnew] = voc.try_emplace(raw, static_cast<std::uint32_t>(voc.size()));
        if (vnew) log.schema.columns[e.schema_index].vocabulary.push_back(raw);
        x.side_features[e.schema_index] = vit->second;
      }
    }
    log.interactions.push_back(std::move(x));
  }

  for (const auto& e : extras) {
    if (!e.continuous) continue;
    auto& col = log.schema.columns[e.schema_index];
    col.binner = EqualFrequencyBinner::fit(raw_continuous[e.schema_index], options.num_bins);
    const auto& rows = continuous_rows[e.schema_index];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      log.interactions[rows[k]].side_features[e.schema_index] =
          col.binner.bin(raw_continuous[e.schema_index][k]);
    }
  }

  std::stable_sort(log.interactions.begin(), log.interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.user_id != b.user_id) return a.user_id < b.user_id;
                     return a.timestamp < b.timestamp;
                   });
  return log;
}

// ---------------------------------------------------------------- sessions

std::vector<std::size_t> Session::positives() const {
  std::vector<std::size_t> out;
  for (const auto& it : items) {
    if (it.polarity == Polarity::positive) out.push_back(it.item_id);
  }
  return out;
}

std::vector<std::size_t> Session::negatives() const {
  std::vector<std::size_t> out;
  for (const auto& it : items) {
    if (it.polarity == Polarity::negative) out.push_back(it.item_id);
  }
  return out;
}

bool Session::has_positive() const {
  return std::any_of(items.begin(), items.end(),
                     [](const SessionItem& i) { return i.polarity == Polarity::positive; });
}

std::size_t SessionizedSequence::num_items() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.items.size();
  return n;
}

std::size_t SessionizedSequence::num_positives() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.positives().size();
  return n;
}

std::vector<SessionizedSequence> sessionize(const InteractionLog& log) {
  std::vector<SessionizedSequence> out;
  std::size_t i = 0;
  const auto& xs = log.interactions;
  while (i < xs.size()) {
    std::size_t j = i;
    while (j < xs.size() && xs[j].user_id == xs[i].user_id) ++j;
    SessionizedSequence seq;
    seq.user_id = xs[i].user_id;
    std::map<std::string, std::size_t> session_index;
    for (std::size_t k = i; k < j; ++k) {
      const Interaction& x = xs[k];
      auto [it, inserted] = session_index.try_emplace(x.session_id, seq.sessions.size());
      if (inserted) seq.sessions.push_back(Session{x.session_id, {}});
      Session& s = seq.sessions[it->second];
      auto dup = std::find_if(s.items.begin(), s.items.end(),
                              [&](const SessionItem& si) { return si.item_id == x.item_id; });
      if (dup == s.items.end()) {
        s.items.push_back({x.item_id, x.polarity, x.timestamp, x.side_features});
      } else if (x.polarity == Polarity::positive && dup->polarity == Polarity::negative) {
        dup->polarity = Polarity::positive;
        dup->side_features = x.side_features;
      }
    }
    // Interactions arrive time-sorted, so insertion order is earliest-first for
    // both sessions and items within a session.
    for (auto& s : seq.sessions) {
      for (auto& item : s.items) {
        if (!item.side_features.empty()) {
          if (auto p = log.schema.index_of(kPolarityFeature)) {
            item.side_features[*p] = static_cast<std::uint32_t>(item.polarity);
          }
        }
      }
    }
    out.push_back(std::move(seq));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------- filtering

FilteredSequences filter_sequences(std::vector<SessionizedSequence> sequences,
                                   const FilterOptions& options) {
  std::size_t max_item = 0;
  for (const auto& seq : sequences) {
    for (const auto& s : seq.sessions) {
      for (const auto& it : s.items) max_item = std::max(max_item, it.item_id + 1);
    }
  }
  std::vector<std::uint8_t> item_alive(max_item, 1);

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::size_t> item_count(max_item, 0);
    for (const auto& seq : sequences) {
      for (const auto& s : seq.sessions) {
        for (const auto& it : s.items) ++item_count[it.item_id];
      }
    }
    for (std::size_t v = 0; v < max_item; ++v) {
      if (item_alive[v] && item_count[v] < options.min_item_feedback) {
        item_alive[v] = 0;
        changed = true;
      }
    }
    std::vector<SessionizedSequence> next;
    next.reserve(sequences.size());
    for (auto& seq : sequences) {
      SessionizedSequence kept;
      kept.user_id = std::move(seq.user_id);
      for (auto& s : seq.sessions) {
        const std::size_t before = s.items.size();
        std::erase_if(s.items, [&](const SessionItem& it) { return !item_alive[it.item_id]; });
        if (s.items.size() != before) changed = true;
        if (s.has_positive()) {
          kept.sessions.push_back(std::move(s));
        } else {
          changed = true;
        }
      }
      if (kept.num_items() >= options.min_user_feedback &&
          kept.sessions.size() >= options.min_sessions) {
        if (kept.sessions.size() != seq.sessions.size()) changed = true;
        next.push_back(std::move(kept));
      } else {
        changed = true;
      }
    }
    sequences = std::move(next);
  }
  if (sequences.empty()) throw DataError("dataset degenerate: no user survives filtering");

  FilteredSequences out;
  std::vector<std::size_t> remap(max_item, 0);
  std::vector<std::uint8_t> used(max_item, 0);
  for (const auto& seq : sequences) {
    for (const auto& s : seq.sessions) {
      for (const auto& it : s.items) used[it.item_id] = 1;
    }
  }
  for (std::size_t v = 0; v < max_item; ++v) {
    if (used[v]) {
      remap[v] = out.kept_items.size();
      out.kept_items.push_back(v);
    }
  }
  for (auto& seq : sequences) {
    for (auto& s : seq.sessions) {
      for (auto& it : s.items) it.item_id = remap[it.item_id];
    }
  }
  std::sort(sequences.begin(), sequences.end(),
            [](const auto& a, const auto& b) { return a.user_id < b.user_id; });
  out.sequences = std::move(sequences);
  return out;
}

DatasetStats compute_stats(const std::vector<SessionizedSequence>& sequences,
                           std::size_t catalog_size) {
  DatasetStats st;
  st.num_users = sequences.size();
  st.num_items = catalog_size;
  std::size_t positives = 0;
  for (const auto& seq : sequences) {
    st.num_sessions += seq.sessions.size();
    st.num_interactions += seq.num_items();
    positives += seq.num_positives();
  }
  if (st.num_users > 0) {
    st.avg_length = static_cast<double>(st.num_interactions) / static_cast<double>(st.num_users);
    st.avg_positive_length = static_cast<double>(positives) / static_cast<double>(st.num_users);
  }
  if (st.num_sessions > 0) {
    st.avg_session_length =
        static_cast<double>(st.num_interactions) / static_cast<double>(st.num_sessions);
  }
  return st;
}

std::vector<std::uint32_t> canonical_catalog_features(
    const std::vector<SessionizedSequence>& sequences, const FeatureSchema& schema,
    std::size_t catalog_size) {
  const std::size_t w = schema.width();
  std::vector<std::uint32_t> feats(catalog_size * w, 0);
  // 0 = unseen, 1 = from a negative row, 2 = from a positive row
  std::vector<std::uint8_t> source(catalog_size, 0);
  for (const auto& seq : sequences) {
    for (const auto& s : seq.sessions) {
      for (const auto& it : s.items) {
        const std::uint8_t rank = it.polarity == Polarity::positive ? 2 : 1;
        if (source[it.item_id] >= rank) continue;
        source[it.item_id] = rank;
        for (std::size_t f = 0; f < w && f < it.side_features.size(); ++f) {
          feats[it.item_id * w + f] = it.side_features[f];
        }
      }
    }
  }
  if (auto p = schema.index_of(kPolarityFeature)) {
    for (std::size_t v = 0; v < catalog_size; ++v) {
      feats[v * w + *p] = static_cast<std::uint32_t>(Polarity::positive);
    }
  }
  return feats;
}

ProcessedDataset filter_dataset(const InteractionLog& log, const FilterOptions& options) {
  auto filtered = filter_sequences(sessionize(log), options);
  ProcessedDataset data;
  data.catalog_size = filtered.kept_items.size();
  for (std::size_t old : filtered.kept_items) data.item_keys.push_back(log.item_keys.at(old));
  data.schema = log.schema;
  data.sequences = std::move(filtered.sequences);
  data.catalog_features =
      canonical_catalog_features(data.sequences, data.schema, data.catalog_size);
  data.stats = compute_stats(data.sequences, data.catalog_size);
  return data;
}

// ---------------------------------------------------------------- splits

std::string_view protocol_name(Protocol p) {
  return p == Protocol::leave_one_session_out ? "leave_one_session_out" : "leave_one_item_out";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "session" || name == "leave_one_session_out") return Protocol::leave_one_session_out;
  if (name == "item" || name == "leave_one_item_out") return Protocol::leave_one_item_out;
  throw std::invalid_argument("unknown protocol '" + std::string(name) +
                              "' (expected session or item)");
}

SessionizedSequence truncate_positive_length(const SessionizedSequence& seq,
                                             std::size_t max_positive_length) {
  if (max_positive_length == 0 || seq.num_positives() <= max_positive_length) return seq;
  SessionizedSequence out;
  out.user_id = seq.user_id;
  std::size_t remaining = max_positive_length;
  // Walk newest to oldest; the cut lands just after the last admitted positive.
  std::vector<Session> rev;
  for (auto s = seq.sessions.rbegin(); s != seq.sessions.rend() && remaining > 0; ++s) {
    Session kept{s->session_id, {}};
    std::vector<SessionItem> items_rev;
    for (auto it = s->items.rbegin(); it != s->items.rend(); ++it) {
      if (it->polarity == Polarity::positive) {
        if (remaining == 0) break;
        --remaining;
      }
      items_rev.push_back(*it);
      if (remaining == 0) break;
    }
    kept.items.assign(items_rev.rbegin(), items_rev.rend());
    if (!kept.items.empty()) rev.push_back(std::move(kept));
  }
  out.sessions.assign(std::make_move_iterator(rev.rbegin()), std::make_move_iterator(rev.rend()));
  return out;
}

DatasetSplit make_split(const std::vector<SessionizedSequence>& sequences,
                        std::size_t catalog_size, Protocol protocol,
                        std::size_t max_positive_length) {
  DatasetSplit split;
  split.protocol = protocol;
  split.catalog_size = catalog_size;
  split.stats = compute_stats(sequences, catalog_size);
  for (const auto& seq : sequences) {
    UserExample ex;
    ex.user_id = seq.user_id;
    if (protocol == Protocol::leave_one_session_out) {
      if (seq.sessions.size() < 2 || !seq.sessions.back().has_positive()) {
        ++split.stats.skipped_users;
        continue;
      }
      ex.test_target = seq.sessions.back().positives();
      ex.train_view.user_id = seq.user_id;
      ex.train_view.sessions.assign(seq.sessions.begin(), seq.sessions.end() - 1);
    } else {
      if (seq.num_positives() < 2) {
        ++split.stats.skipped_users;
        continue;
      }
      // locate the last positive
      std::size_t s_idx = seq.sessions.size();
      std::size_t i_idx = 0;
      for (std::size_t s = seq.sessions.size(); s-- > 0 && s_idx == seq.sessions.size();) {
        const auto& items = seq.sessions[s].items;
        for (std::size_t i = items.size(); i-- > 0;) {
          if (items[i].polarity == Polarity::positive) {
            s_idx = s;
            i_idx = i;
            break;
          }
        }
      }
      ex.test_target = {seq.sessions[s_idx].items[i_idx].item_id};
      ex.train_view.user_id = seq.user_id;
      ex.train_view.sessions.assign(seq.sessions.begin(),
                                    seq.sessions.begin() + static_cast<std::ptrdiff_t>(s_idx));
      if (i_idx > 0) {
        Session partial{seq.sessions[s_idx].session_id, {}};
        partial.items.assign(seq.sessions[s_idx].items.begin(),
                             seq.sessions[s_idx].items.begin() + static_cast<std::ptrdiff_t>(i_idx));
        ex.train_view.sessions.push_back(std::move(partial));
      }
    }
    ex.train_view = truncate_positive_length(ex.train_view, max_positive_length);
    if (ex.train_view.sessions.empty()) {
      ++split.stats.skipped_users;
      continue;
    }
    split.users.push_back(std::move(ex));
  }
  return split;
}

DatasetSplit make_split(const ProcessedDataset& data, Protocol protocol) {
  return make_split(data.sequences, data.catalog_size, protocol, data.max_positive_length);
}

// ---------------------------------------------------------------- persistence

std::string stats_json(const DatasetStats& st) {
  json j;
  j["num_users"] = st.num_users;
  j["num_items"] = st.num_items;
  j["num_interactions"] = st.num_interactions;
  j["num_sessions"] = st.num_sessions;
  j["avg_length"] = st.avg_length;
  j["avg_positive_length"] = st.avg_positive_length;
  j["avg_session_length"] = st.avg_session_length;
  j["skipped_users"] = st.skipped_users;
  return j.dump();
}

namespace {

constexpr int kProcessedFormatVersion = 1;

json schema_to_json(const FeatureSchema& schema) {
  json cols = json::array();
  for (const auto& c : schema.columns) {
    json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == FeatureKind::categorical ? "categorical" : "continuous";
    jc["cardinality"] = c.cardinality();
    if (c.kind == FeatureKind::categorical) jc["vocabulary"] = c.vocabulary;
    else jc["bin_edges"] = c.binner.edges();
    cols.push_back(jc);
  }
  return cols;
}

FeatureSchema schema_from_json(const json& cols) {
  FeatureSchema schema;
  for (const auto& jc : cols) {
    FeatureColumn c;
    c.name = jc.at("name").get<std::string>();
    const auto kind = jc.at("kind").get<std::string>();
    if (kind == "categorical") {
      c.kind = FeatureKind::categorical;
      c.vocabulary = jc.at("vocabulary").get<std::vector<std::string>>();
    } else if (kind == "continuous") {
      c.kind = FeatureKind::continuous;
      c.binner = EqualFrequencyBinner(jc.at("bin_edges").get<std::vector<double>>());
    } else {
      throw DataError("stats.json: unknown feature kind '" + kind + "'");
    }
    schema.columns.push_back(std::move(c));
  }
  return schema;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  return out + "\"";
}

}  // namespace

void save_processed(const ProcessedDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t w = data.schema.width();
  {
    std::ofstream out(dir / "interactions.csv");
    if (!out) throw DataError("cannot write " + (dir / "interactions.csv").string());
    out << "user,session,item,timestamp,polarity";
    for (const auto& c : data.schema.columns) out << ',' << csv_field(c.name);
    out << '\n';
    for (const auto& seq : data.sequences) {
      for (const auto& s : seq.sessions) {
        for (const auto& it : s.items) {
          out << csv_field(seq.user_id) << ',' << csv_field(s.session_id) << ',' << it.item_id
              << ',' << it.timestamp << ',' << static_cast<int>(it.polarity);
          for (std::size_t f = 0; f < w; ++f) out << ',' << it.side_features.at(f);
          out << '\n';
        }
      }
    }
  }
  {
    std::ofstream out(dir / "items.csv");
    if (!out) throw DataError("cannot write " + (dir / "items.csv").string());
    out << "item,raw_id";
    for (const auto& c : data.schema.columns) out << ',' << csv_field(c.name);
    out << '\n';
    for (std::size_t v = 0; v < data.catalog_size; ++v) {
      out << v << ',' << csv_field(data.item_keys.at(v));
      for (std::size_t f = 0; f < w; ++f) out << ',' << data.catalog_features.at(v * w + f);
      out << '\n';
    }
  }
  {
    json j;
    j["format_version"] = kProcessedFormatVersion;
    j["stats"] = json::parse(stats_json(data.stats));
    j["max_positive_length"] = data.max_positive_length;
    j["schema"] = schema_to_json(data.schema);
    std::ofstream out(dir / "stats.json");
    if (!out) throw DataError("cannot write " + (dir / "stats.json").string());
    out << j.dump(2) << '\n';
  }
}

ProcessedDataset load_processed(const std::filesystem::path& dir) {
  ProcessedDataset data;
  json meta;
  {
    std::ifstream in(dir / "stats.json");
    if (!in) throw DataError("cannot open " + (dir / "stats.json").string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("stats.json: " + std::string(e.what()));
    }
  }
  try {
    if (meta.at("format_version").get<int>() != kProcessedFormatVersion) {
      throw DataError("stats.json: unsupported format_version");
    }
    data.schema = schema_from_json(meta.at("schema"));
    data.max_positive_length = meta.at("max_positive_length").get<std::size_t>();
    data.catalog_size = meta.at("stats").at("num_items").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError("stats.json: " + std::string(e.what()));
  }
  const std::size_t w = data.schema.width();

  auto read_rows = [&](const std::filesystem::path& file, std::size_t fixed_cols,
                       auto&& on_row) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto fields = split_csv(line);
      if (!fields || fields->size() != fixed_cols + w) {
        throw DataError(file.filename().string() + " " +
                        line_error(line_no, "expected " + std::to_string(fixed_cols + w) +
                                                " fields"));
      }
      if (header) {
        header = false;
        continue;
      }
      on_row(*fields, line_no);
    }
  };
  auto need_int = [&](const std::string& s, auto& out, std::size_t line_no) {
    if (!parse_int(s, out)) throw DataError(line_error(line_no, "bad integer '" + s + "'"));
  };

  data.item_keys.resize(data.catalog_size);
  data.catalog_features.assign(data.catalog_size * w, 0);
  read_rows(dir / "items.csv", 2, [&](const std::vector<std::string>& f, std::size_t ln) {
    std::size_t v = 0;
    need_int(f[0], v, ln);
    if (v >= data.catalog_size) throw DataError(line_error(ln, "item id out of catalog"));
    data.item_keys[v] = f[1];
    for (std::size_t k = 0; k < w; ++k) need_int(f[2 + k], data.catalog_features[v * w + k], ln);
  });

  read_rows(dir / "interactions.csv", 5, [&](const std::vector<std::string>& f, std::size_t ln) {
    SessionItem it;
    need_int(f[2], it.item_id, ln);
    if (it.item_id >= data.catalog_size) throw DataError(line_error(ln, "item id out of catalog"));
    need_int(f[3], it.timestamp, ln);
    int pol = 0;
    need_int(f[4], pol, ln);
    it.polarity = pol != 0 ? Polarity::positive : Polarity::negative;
    it.side_features.resize(w);
    for (std::size_t k = 0; k < w; ++k) need_int(f[5 + k], it.side_features[k], ln);
    if (data.sequences.empty() || data.sequences.back().user_id != f[0]) {
      data.sequences.push_back(SessionizedSequence{f[0], {}});
    }
    auto& seq = data.sequences.back();
    if (seq.sessions.empty() || seq.sessions.back().session_id != f[1]) {
      seq.sessions.push_back(Session{f[1], {}});
    }
    seq.sessions.back().items.push_back(std::move(it));
  });

  data.stats = compute_stats(data.sequences, data.catalog_size);
  return data;
}

}  // namespace sessionrec
