#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sessionrec/adam.hpp"
#include "sessionrec/model.hpp"

namespace sessionrec {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
  Tensor<float> first_moment;
  Tensor<float> second_moment;
};

struct Checkpoint {
  ModelConfig model;
  std::uint64_t config_hash = 0;
  std::uint64_t stats_hash = 0;
  std::uint64_t epoch = 0;
  std::uint64_t optimizer_steps = 0;
  std::string train_config;  // resolved key = value text
  std::vector<NamedTensor> tensors;
};

// Binary layout: magic, format version, then length-prefixed fields.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint capture_checkpoint(const Model<float>& model, const Adam<float>* optimizer,
                              std::uint64_t epoch, std::uint64_t stats_hash,
                              const std::string& train_config);

// Dotted name of the first model-config field that differs, or "" if equal.
std::string first_config_difference(const ModelConfig& expected, const ModelConfig& found);

// Throws CheckpointError naming the first differing field when the checkpoint
// was written for another configuration, unless `force` is set (shapes must
// still agree).
void restore_model(Model<float>& model, const Checkpoint& ckpt, bool force = false);
void restore_optimizer(Adam<float>& optimizer, const Checkpoint& ckpt);

}  // namespace sessionrec
