#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sessionrec/config.hpp"
#include "sessionrec/data.hpp"
#include "sessionrec/evaluator.hpp"

namespace sessionrec {

struct AlphaRow {
  double alpha = 0.0;
  std::optional<EvalReport> report;  // empty when the cell failed
  std::string error;
};

// Trains one model per alpha from the same seed and evaluates each. A failing
// cell records its error and the sweep moves on. If out_dir is set, each cell
// trains under out_dir/alpha_<value>.
std::vector<AlphaRow> alpha_sweep(const ProcessedDataset& data, const TrainConfig& cfg,
                                  const std::vector<double>& alphas, Protocol protocol,
                                  const std::filesystem::path& out_dir = {});
std::string alpha_table_csv(const std::vector<AlphaRow>& rows);

struct ScalingRow {
  double fraction = 0.0;
  std::size_t train_items = 0;  // interactions in the training window
  std::optional<double> recall;  // Recall@500 on the fixed final sessions
  bool skipped = false;
  std::string note;
};

// For each fraction f, trains on the sessions starting no later than the
// f-quantile of session start times (earliest first) and evaluates every
// user's last session from the full preceding history. Rows come back sorted
// by train_items.
std::vector<ScalingRow> scaling_run(const ProcessedDataset& data, const TrainConfig& cfg,
                                    const std::vector<double>& fractions,
                                    std::size_t recall_k = 500);
std::string scaling_table_csv(const std::vector<ScalingRow>& rows);

struct BenchOptions {
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t layers = 1;
  std::size_t repetitions = 3;
  std::uint64_t seed = 1;
};

struct ComplexityResult {
  std::size_t n_items = 0;
  std::size_t session_len = 0;
  std::uint64_t item_level_pairs = 0;     // n²
  std::uint64_t session_level_pairs = 0;  // (n/M)²
  double pair_ratio = 0.0;                // exactly M²
  std::uint64_t measured_item_pairs = 0;  // per head and layer
  std::uint64_t measured_session_pairs = 0;
  double item_seconds = 0.0;  // best of the repetitions
  double session_seconds = 0.0;
  double time_ratio = 0.0;
  std::string to_json() const;
};

// Forward cost of the causal attention sequence encoder over n item tokens
// versus n/M session tokens.
ComplexityResult complexity_bench(std::size_t n_items, std::size_t session_len,
                                  const BenchOptions& options = {});

}  // namespace sessionrec
