#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sessionrec {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IseKind : std::uint8_t { mean, max, max_relu, recurrent, attention };
enum class SseBackbone : std::uint8_t { recurrent, causal_attention };

std::string_view to_string(IseKind k);
std::string_view to_string(SseBackbone b);
IseKind parse_ise_kind(std::string_view s);
SseBackbone parse_sse_backbone(std::string_view s);

struct IseConfig {
  IseKind kind = IseKind::mean;
  std::size_t layers = 1;
  std::size_t heads = 1;  // attention only
};

struct SseConfig {
  SseBackbone backbone = SseBackbone::causal_attention;
  std::size_t layers = 4;
  std::size_t heads = 2;
  double dropout = 0.2;
  std::size_t max_positions = 64;
};

struct FeatureSpec {
  std::string name;
  std::size_t cardinality = 0;
};

struct EmbeddingConfig {
  std::size_t num_items = 0;
  std::size_t d = 64;
  std::size_t d_id = 64;
  std::size_t d_feature = 16;
  std::vector<FeatureSpec> features;
};

// Everything that fixes the parameter shapes of a model.
struct ModelConfig {
  EmbeddingConfig embedding;
  IseConfig ise;
  SseConfig sse;

  std::size_t d() const { return embedding.d; }
};

struct LossConfig {
  double alpha = 0.2;
  std::size_t num_negatives = 128;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t epochs = 200;
  std::uint64_t seed = 42;
  // Validation runs every N epochs on each user's last training session; 0 disables.
  std::size_t validation_interval = 5;
  std::size_t selection_k = 500;
  std::size_t threads = 1;
  std::size_t d = 64;
  std::size_t d_id = 0;  // 0: same as d
  std::size_t d_feature = 16;
  LossConfig loss;
  AdamConfig adam;
  IseConfig ise;
  SseConfig sse;
};

// Sets one dotted key ("sse.layers", "loss.alpha", ...). Throws ConfigError
// naming the key on unknown keys or unparsable values.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

// Parses "key = value" lines; '#' starts a comment.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
std::string config_to_text(const TrainConfig& cfg);

// Throws ConfigError on violated invariants.
void validate(const TrainConfig& cfg);

ModelConfig make_model_config(const TrainConfig& cfg, std::size_t num_items,
                              std::vector<FeatureSpec> features);
std::string model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);
std::uint64_t config_hash(const ModelConfig& cfg);

}  // namespace sessionrec
