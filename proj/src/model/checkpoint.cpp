#include "cirlab/model/checkpoint.hpp"

#include "cirlab/archive.hpp"
#include "cirlab/error.hpp"

namespace cirlab::model {

namespace {
constexpr const char* kStoredGroups[] = {"adapters", "fusion", "mixer"};
}

void save_checkpoint(const CirModel& model, const std::filesystem::path& path, const Json& extra) {
  Archive archive;
  archive.metadata["format"] = "cirlab-checkpoint";
  archive.metadata["format_version"] = 1;
  archive.metadata["config"] = to_json(model.config());
  archive.metadata["backbone"] = {{"kind", "reference"}, {"fingerprint", model.backbone().fingerprint()}};
  Json groups = Json::object();
  for (const char* group : kStoredGroups) {
    Json names = Json::array();
    for (const auto& [name, param] : model.parameters(group)) {
      names.push_back(name);
      archive.tensors.push_back({name, param.value()});
    }
    groups[group] = names;
  }
  archive.metadata["groups"] = groups;
  archive.metadata["model_fingerprint"] = model.fingerprint();
  archive.metadata["extra"] = extra;
  write_archive(path, archive);
}

namespace {

void fill_from_archive(CirModel& model, const Archive& archive, const std::filesystem::path& path) {
  const Json& meta = archive.metadata;
  if (meta.value("format", "") != "cirlab-checkpoint") throw DataError(path.string() + " is not a cirlab checkpoint");
  const std::string stored_backbone = meta.at("backbone").at("fingerprint").get<std::string>();
  if (stored_backbone != model.backbone().fingerprint())
    throw DataError("checkpoint " + path.string() + " was trained against a different backbone");
  for (const char* group : kStoredGroups) {
    const auto params = model.parameters(group);
    if (meta.at("groups").at(group).size() != params.size())
      throw DataError("checkpoint group '" + std::string(group) + "' has a different parameter count");
    for (auto [name, param] : params) {
      const ad::Matrix& value = archive.at(name);
      if (value.rows() != param.rows() || value.cols() != param.cols()) {
        throw DataError("checkpoint tensor '" + name + "' is " + std::to_string(value.rows()) + "x" +
                        std::to_string(value.cols()) + ", model expects " + std::to_string(param.rows()) + "x" +
                        std::to_string(param.cols()));
      }
      param.mutable_value() = value;
    }
  }
}

}  // namespace

CirModel load_checkpoint(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  const ModelConfig config = model_config_from_json(archive.metadata.at("config"));
  CirModel model = CirModel::create(config, 0);
  fill_from_archive(model, archive, path);
  return model;
}

void load_checkpoint_into(CirModel& model, const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  const ModelConfig stored = model_config_from_json(archive.metadata.at("config"));
  if (!(stored == model.config())) throw DataError("checkpoint " + path.string() + " was saved with a different model config");
  fill_from_archive(model, archive, path);
}

Json checkpoint_metadata(const std::filesystem::path& path) { return read_archive(path).metadata; }

}  // namespace cirlab::model
