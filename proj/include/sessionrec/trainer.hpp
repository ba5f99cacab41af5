#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sessionrec/checkpoint.hpp"
#include "sessionrec/config.hpp"
#include "sessionrec/data.hpp"
#include "sessionrec/model.hpp"

namespace sessionrec {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Histories the model learns from, plus the catalog they index.
struct TrainingSet {
  std::vector<SessionizedSequence> histories;
  Catalog catalog;
  std::vector<FeatureSpec> features;
  std::uint64_t stats_hash = 0;
};

// Uses each user's session-protocol train_view, so no test session is seen.
TrainingSet make_training_set(const ProcessedDataset& data);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // per positive
  double retrieval_loss = 0.0;
  double rank_loss = 0.0;
  double loss_sum = 0.0;  // optimized objective summed over the epoch
  std::size_t positives = 0;
  std::optional<double> validation_recall;
  double seconds = 0.0;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep checkpoints in memory only
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> log;
  Checkpoint best;
  std::size_t best_epoch = 0;
  std::optional<double> best_validation_recall;
};

// Per batch: embed, encode sessions, encode sequences, score, Adam step.
// Validation holds out each user's last training session (users with at
// least three) and picks the epoch with the best Recall@selection_k.
TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const TrainOptions& options = {});

// Rebuilds the model stored in a checkpoint.
void load_model_from(const Checkpoint& ckpt, Model<float>& model);

}  // namespace sessionrec
