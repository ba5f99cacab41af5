#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sessionrec/binning.hpp"

namespace sessionrec {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Polarity : std::uint8_t { negative = 0, positive = 1 };

// Maps a raw action label to a polarity. Exposure-only events are negative;
// effective views, clicks and purchases are positive. Unknown labels yield
// nullopt.
std::optional<Polarity> polarity_from_action(std::string_view action);

enum class FeatureKind : std::uint8_t { categorical, continuous };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::categorical;
  std::vector<std::string> vocabulary;  // categorical: code -> raw value
  EqualFrequencyBinner binner;          // continuous

  std::size_t cardinality() const {
    return kind == FeatureKind::categorical ? vocabulary.size() : binner.cardinality();
  }
};

// Name of the built-in feature carrying each interaction's polarity.
inline constexpr std::string_view kPolarityFeature = "polarity";

struct FeatureSchema {
  std::vector<FeatureColumn> columns;

  std::size_t width() const { return columns.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::size_t> cardinalities() const;
};

struct Interaction {
  std::string user_id;
  std::string session_id;
  std::size_t item_id = 0;  // index into InteractionLog::item_keys
  std::int64_t timestamp = 0;
  Polarity polarity = Polarity::positive;
  std::vector<std::uint32_t> side_features;  // aligned with the schema
};

struct InteractionLog {
  std::vector<Interaction> interactions;  // sorted by (user_id, timestamp)
  std::vector<std::string> item_keys;     // raw item id per catalog index
  FeatureSchema schema;
};

struct IngestOptions {
  std::size_t num_bins = 10;     // for num_* continuous columns
  bool polarity_feature = true;  // prepend the polarity as a side feature
};

// Reads a delimited log with header columns user,item,session,timestamp,action
// plus optional side-feature columns (names starting with num_ are binned).
InteractionLog ingest(const std::filesystem::path& path, const IngestOptions& options = {});
InteractionLog ingest(std::istream& in, const IngestOptions& options = {});

struct SessionItem {
  std::size_t item_id = 0;
  Polarity polarity = Polarity::positive;
  std::int64_t timestamp = 0;
  std::vector<std::uint32_t> side_features;
};

struct Session {
  std::string session_id;
  std::vector<SessionItem> items;

  std::vector<std::size_t> positives() const;
  std::vector<std::size_t> negatives() const;
  bool has_positive() const;
};

struct SessionizedSequence {
  std::string user_id;
  std::vector<Session> sessions;

  std::size_t num_items() const;
  std::size_t num_positives() const;
};

// Groups interactions by (user, session). Sessions are ordered by earliest
// timestamp; repeated rows for one item inside a session collapse into one
// interaction that is positive if any row was positive.
std::vector<SessionizedSequence> sessionize(const InteractionLog& log);

struct FilterOptions {
  std::size_t min_item_feedback = 5;
  std::size_t min_user_feedback = 5;
  std::size_t min_sessions = 3;
};

struct FilteredSequences {
  std::vector<SessionizedSequence> sequences;  // item ids remapped to 0..kept-1
  std::vector<std::size_t> kept_items;         // new id -> old id
};

// Iterates the retention rules to a fixpoint and remaps item ids densely.
// Throws DataError("dataset degenerate...") if nothing survives.
FilteredSequences filter_sequences(std::vector<SessionizedSequence> sequences,
                                   const FilterOptions& options = {});

struct DatasetStats {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_interactions = 0;
  std::size_t num_sessions = 0;
  double avg_length = 0.0;
  double avg_positive_length = 0.0;
  double avg_session_length = 0.0;  // M
  std::size_t skipped_users = 0;
};

DatasetStats compute_stats(const std::vector<SessionizedSequence>& sequences,
                           std::size_t catalog_size);

struct ProcessedDataset {
  std::vector<SessionizedSequence> sequences;  // sorted by user id
  std::size_t catalog_size = 0;
  std::vector<std::string> item_keys;  // dense id -> raw id
  FeatureSchema schema;
  // catalog_size × schema.width() canonical features used on the scoring side.
  std::vector<std::uint32_t> catalog_features;
  DatasetStats stats;
  std::size_t max_positive_length = 200;
};

ProcessedDataset filter_dataset(const InteractionLog& log, const FilterOptions& options = {});

// Features of each item's first positive interaction (first interaction if it
// never appears positive); the polarity feature is always set to positive.
std::vector<std::uint32_t> canonical_catalog_features(
    const std::vector<SessionizedSequence>& sequences, const FeatureSchema& schema,
    std::size_t catalog_size);

enum class Protocol : std::uint8_t { leave_one_session_out, leave_one_item_out };

std::string_view protocol_name(Protocol p);
Protocol parse_protocol(std::string_view name);  // "session" | "item" or full names

struct UserExample {
  std::string user_id;
  SessionizedSequence train_view;
  std::vector<std::size_t> test_target;
};

struct DatasetSplit {
  Protocol protocol = Protocol::leave_one_session_out;
  std::vector<UserExample> users;
  std::size_t catalog_size = 0;
  DatasetStats stats;
};

// Keeps the most recent interactions such that at most max_positive_length
// positives remain; 0 disables truncation.
SessionizedSequence truncate_positive_length(const SessionizedSequence& seq,
                                             std::size_t max_positive_length);

DatasetSplit make_split(const std::vector<SessionizedSequence>& sequences,
                        std::size_t catalog_size, Protocol protocol,
                        std::size_t max_positive_length);
DatasetSplit make_split(const ProcessedDataset& data, Protocol protocol);

// Processed dataset directory: interactions.csv, items.csv, stats.json.
void save_processed(const ProcessedDataset& data, const std::filesystem::path& dir);
ProcessedDataset load_processed(const std::filesystem::path& dir);

// Canonical JSON text of the stats block, also used for hashing.
std::string stats_json(const DatasetStats& stats);

}  // namespace sessionrec
