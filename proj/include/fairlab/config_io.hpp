#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fairlab/dataset.hpp"
#include "fairlab/sweep.hpp"
#include "fairlab/trainer.hpp"

namespace fairlab {

// JSON objects mirror the struct fields by name. from_json updates the target
// in place: missing keys keep the target's current values, unknown keys are
// rejected.

void to_json(nlohmann::json& j, const SpuriousSpec& s);
void from_json(const nlohmann::json& j, SpuriousSpec& s);

void to_json(nlohmann::json& j, const SplitSpec& s);
void from_json(const nlohmann::json& j, SplitSpec& s);

void to_json(nlohmann::json& j, const KernelSpec& k);
void from_json(const nlohmann::json& j, KernelSpec& k);

/// flood_level and early_stopping are null when disabled. early_stopping is
/// {"criterion": "primary_val_loss" | "total_val_loss", "patience": n}.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Regularizers are written as their labels ("none", "wd=0.1", "es(LP)", ...).
void to_json(nlohmann::json& j, const SweepConfig& c);
void from_json(const nlohmann::json& j, SweepConfig& c);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

template <typename T>
T load_config(const std::filesystem::path& path) {
  return read_json_file(path).get<T>();
}

template <typename T>
void save_config(const T& value, const std::filesystem::path& path) {
  write_json_file(nlohmann::json(value), path);
}

}  // namespace fairlab
