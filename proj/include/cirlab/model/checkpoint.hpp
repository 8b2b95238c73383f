#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/model/cir_model.hpp"

#include <filesystem>

namespace cirlab::model {

/// Writes adapters, fusion and mixer weights plus the model config. The backbone is
/// recorded by fingerprint only.
void save_checkpoint(const CirModel& model, const std::filesystem::path& path, const Json& extra = Json::object());

/// Rebuilds a model from the embedded config and loads its weights.
CirModel load_checkpoint(const std::filesystem::path& path);

/// Loads weights into an existing model after checking config equality, backbone
/// fingerprint and every tensor shape.
void load_checkpoint_into(CirModel& model, const std::filesystem::path& path);

Json checkpoint_metadata(const std::filesystem::path& path);

}  // namespace cirlab::model
