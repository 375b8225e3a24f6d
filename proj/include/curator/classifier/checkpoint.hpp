#pragma once

#include <filesystem>

#include <json.hpp>

#include "curator/classifier/model.hpp"
#include "curator/classifier/trainer.hpp"

namespace curator {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    PreferenceModel model;
    TrainConfig train_config;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON container: {"format", "version", "dims", "seed", "train_config",
/// "blocks": [{"name", "rows", "cols", "values"}]}. Doubles are written in
/// shortest round-trip form, so save/load is bit-exact.
nlohmann::json checkpoint_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c);
/// Throws FormatError on a foreign or newer container.
Checkpoint load_checkpoint(const std::filesystem::path& p);

void to_json(nlohmann::json& j, const ModelDims& d);
void from_json(const nlohmann::json& j, ModelDims& d);

}  // namespace curator
