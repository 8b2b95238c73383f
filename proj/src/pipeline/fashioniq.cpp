#include "cirlab/pipeline/fashioniq.hpp"

#include "cirlab/error.hpp"
#include "cirlab/jsonl.hpp"
#include "cirlab/text.hpp"

#include <fmt/format.h>

#include <set>

namespace cirlab::data {

namespace {

std::filesystem::path find_image(const std::filesystem::path& dir, const std::string& id) {
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    const auto candidate = dir / (id + ext);
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw DataError("no image file for Fashion IQ id '" + id + "' under " + dir.string());
}

}  // namespace

std::string join_annotations(const std::vector<std::string>& captions) {
  std::string out;
  for (const auto& c : captions) {
    const std::string t = trim(c);
    if (t.empty()) continue;
    out += (out.empty() ? "" : " and ") + t;
  }
  return out;
}

FashionIqSplit load_fashioniq(const std::filesystem::path& root, const std::vector<std::string>& categories,
                              const std::string& split) {
  FashionIqSplit out;
  for (const auto& category : categories) {
    const auto caption_file = root / "captions" / fmt::format("cap.{}.{}.json", category, split);
    const Json entries = read_json_file(caption_file);
    std::set<std::string> ids;
    std::size_t index = 0;
    for (const auto& e : entries) {
      CirTriplet t;
      t.id = fmt::format("{}_{}_{:06d}", category, split, index++);
      t.reference_id = e.at("candidate").get<std::string>();
      t.target_id = e.at("target").get<std::string>();
      t.category = category;
      t.modification_text = join_annotations(e.at("captions").get<std::vector<std::string>>());
      if (t.modification_text.empty()) throw DataError(caption_file.string() + ": entry " + t.id + " has no annotation");
      ids.insert(t.reference_id);
      ids.insert(t.target_id);
      out.triplets.push_back(std::move(t));
    }
    const auto split_file = root / "image_splits" / fmt::format("split.{}.{}.json", category, split);
    if (std::filesystem::exists(split_file)) {
      for (const auto& id : read_json_file(split_file)) ids.insert(id.get<std::string>());
    }
    for (const auto& id : ids) {
      ImageRecord r;
      r.id = id;
      r.path = find_image(root / "images", id);
      r.category = category;
      r.item_group = id;
      out.images.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace cirlab::data
