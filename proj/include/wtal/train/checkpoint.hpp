#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "wtal/model/model.hpp"
#include "wtal/train/trainer.hpp"

namespace wtal::train {

// Binary container, little-endian:
//   "WTCK", u32 version, u64 header length, header JSON,
//   u32 tensor count, then per tensor: u32 name length, name, u32 ndim,
//   u64 dims[ndim], f64 values.
// The header holds the model and training configs, the iteration counter,
// the generator states and the data-order cursor. Tensors are the model
// parameters followed by the Adam moments ("adam.<group>.<m|v>.<param>").
inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::ordered_json to_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const model::Model& model, const Trainer& trainer);
// Parameters only (no optimiser state), e.g. for an untrained model.
void save_checkpoint(const std::filesystem::path& path, const model::Model& model);

struct LoadedCheckpoint {
  model::Model model;
  std::optional<TrainConfig> train;
  long long iteration = 0;
  nlohmann::json header;
  std::map<std::string, nn::Tensor> extra;  // optimiser moments
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Restores optimiser moments, generator states and the iteration counter of
// a trainer built on the checkpoint's model.
void restore_trainer(Trainer& trainer, const LoadedCheckpoint& checkpoint);

}  // namespace wtal::train
