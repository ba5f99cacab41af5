#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sessionrec/data.hpp"
#include "sessionrec/model.hpp"

namespace sessionrec {

inline const std::vector<std::size_t> kDefaultCutoffs{10, 100, 500};

struct EvalReport {
  std::string protocol;
  std::vector<std::size_t> cutoffs;
  std::vector<double> recall;  // aligned with cutoffs
  std::vector<double> ndcg;
  std::size_t num_users = 0;
  std::size_t catalog_size = 0;
  std::uint64_t config_hash = 0;

  double recall_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
  std::string to_json() const;
  std::string to_table() const;
};

// One ranking problem: a history to encode and the items it should surface.
struct EvalCase {
  const SessionizedSequence* history = nullptr;
  const std::vector<std::size_t>* targets = nullptr;
};

struct EvalOptions {
  std::vector<std::size_t> cutoffs = kDefaultCutoffs;
  std::size_t threads = 1;
};

// Per-case metrics, row-major cases × cutoffs. Cutoffs beyond the catalog
// size rank the whole catalog.
struct CaseMetrics {
  std::vector<double> recall;
  std::vector<double> ndcg;
};
CaseMetrics evaluate_cases(const Model<float>& model, const Tensor<float>& item_vecs,
                           std::span<const EvalCase> cases, const EvalOptions& options);

// Encodes each user's train_view, ranks the full catalog and scores the
// held-out target. Dropout is off.
EvalReport evaluate(const Model<float>& model, const Catalog& catalog, const DatasetSplit& split,
                    const EvalOptions& options = {});

// Loads a checkpoint and evaluates it on a processed dataset; throws if the
// checkpoint was trained for a different catalog.
EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const ProcessedDataset& data, Protocol protocol,
                               const EvalOptions& options = {});

}  // namespace sessionrec
