#include "cirlab/pipeline/records.hpp"

#include "cirlab/error.hpp"

#include <set>

namespace cirlab::data {

std::string to_string(ImageSource source) {
  switch (source) {
    case ImageSource::fashion200k: return "fashion200k";
    case ImageSource::deepfashion_mm: return "deepfashion_mm";
    case ImageSource::other: return "other";
  }
  return "other";
}

ImageSource parse_image_source(const std::string& text) {
  if (text == "fashion200k") return ImageSource::fashion200k;
  if (text == "deepfashion_mm") return ImageSource::deepfashion_mm;
  if (text == "other") return ImageSource::other;
  throw DataError("unknown image source '" + text + "'");
}

Json to_json(const ImageRecord& r, const std::filesystem::path& relative_to) {
  std::filesystem::path path = r.path;
  if (!relative_to.empty() && path.is_absolute()) path = std::filesystem::relative(path, relative_to);
  Json j{{"id", r.id},
         {"path", path.generic_string()},
         {"source", to_string(r.source)},
         {"category", r.category},
         {"item_group", r.item_group}};
  if (r.web_caption) j["web_caption"] = *r.web_caption;
  if (!r.attributes.empty()) j["attributes"] = r.attributes;
  return j;
}

Json to_json(const CandidatePair& p) {
  return Json{{"reference_id", p.reference_id},
              {"target_id", p.target_id},
              {"similarity", p.similarity},
              {"rank_of_target", p.rank_of_target},
              {"below_similarity_floor", p.below_similarity_floor}};
}

Json to_json(const CaptionRecord& c) {
  return Json{{"image_id", c.image_id},
              {"caption", c.caption},
              {"generator", c.generator},
              {"prompt_fingerprint", c.prompt_fingerprint},
              {"truncated", c.truncated}};
}

Json to_json(const ModificationRecord& m) {
  return Json{{"reference_id", m.reference_id},
              {"target_id", m.target_id},
              {"text", m.text},
              {"no_change", m.no_change},
              {"generator", m.generator},
              {"prompt_fingerprint", m.prompt_fingerprint}};
}

Json to_json(const CirTriplet& t) {
  return Json{{"id", t.id},
              {"reference_id", t.reference_id},
              {"target_id", t.target_id},
              {"category", t.category},
              {"modification_text", t.modification_text},
              {"reference_caption", t.reference_caption},
              {"target_caption", t.target_caption},
              {"provenance",
               {{"pair_similarity", t.provenance.pair_similarity},
                {"rank_of_target", t.provenance.rank_of_target},
                {"caption_generator", t.provenance.caption_generator},
                {"synthesis_generator", t.provenance.synthesis_generator},
                {"prompt_fingerprint", t.provenance.prompt_fingerprint}}}};
}

ImageRecord image_record_from_json(const Json& j, const std::filesystem::path& base_dir) {
  try {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    if (!base_dir.empty() && r.path.is_relative()) r.path = base_dir / r.path;
    r.source = parse_image_source(j.value("source", std::string("other")));
    r.category = j.at("category").get<std::string>();
    r.item_group = j.value("item_group", std::string());
    if (j.contains("web_caption") && !j["web_caption"].is_null()) r.web_caption = j["web_caption"].get<std::string>();
    if (j.contains("attributes") && !j["attributes"].is_null())
      r.attributes = j["attributes"].get<std::map<std::string, std::string>>();
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed image record: ") + e.what());
  }
}

CandidatePair candidate_pair_from_json(const Json& j) {
  try {
    return {j.at("reference_id").get<std::string>(), j.at("target_id").get<std::string>(),
            j.at("similarity").get<double>(), j.at("rank_of_target").get<int>(),
            j.value("below_similarity_floor", false)};
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed pair record: ") + e.what());
  }
}

CaptionRecord caption_record_from_json(const Json& j) {
  try {
    return {j.at("image_id").get<std::string>(), j.at("caption").get<std::string>(),
            j.value("generator", std::string()), j.value("prompt_fingerprint", std::string()),
            j.value("truncated", false)};
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed caption record: ") + e.what());
  }
}

ModificationRecord modification_record_from_json(const Json& j) {
  try {
    return {j.at("reference_id").get<std::string>(), j.at("target_id").get<std::string>(),
            j.at("text").get<std::string>(),         j.value("no_change", false),
            j.value("generator", std::string()),     j.value("prompt_fingerprint", std::string())};
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed modification record: ") + e.what());
  }
}

CirTriplet triplet_from_json(const Json& j) {
  try {
    CirTriplet t;
    t.id = j.at("id").get<std::string>();
    t.reference_id = j.at("reference_id").get<std::string>();
    t.target_id = j.at("target_id").get<std::string>();
    t.category = j.value("category", std::string());
    t.modification_text = j.at("modification_text").get<std::string>();
    t.reference_caption = j.value("reference_caption", std::string());
    t.target_caption = j.value("target_caption", std::string());
    if (j.contains("provenance")) {
      const Json& p = j["provenance"];
      t.provenance.pair_similarity = p.value("pair_similarity", 0.0);
      t.provenance.rank_of_target = p.value("rank_of_target", 0);
      t.provenance.caption_generator = p.value("caption_generator", std::string());
      t.provenance.synthesis_generator = p.value("synthesis_generator", std::string());
      t.provenance.prompt_fingerprint = p.value("prompt_fingerprint", std::string());
    }
    if (t.modification_text.empty()) throw DataError("triplet " + t.id + " has an empty modification text");
    return t;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed triplet record: ") + e.what());
  }
}

std::vector<ImageRecord> read_image_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  std::vector<ImageRecord> records;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(path)) {
    ImageRecord r = image_record_from_json(j, base);
    if (!seen.insert(r.id).second) throw DataError(path.string() + ": duplicate image id '" + r.id + "'");
    if (r.item_group.empty()) throw DataError(path.string() + ": image '" + r.id + "' has no item_group");
    records.push_back(std::move(r));
  }
  return records;
}

void write_image_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  const auto base = std::filesystem::absolute(path).parent_path();
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    ImageRecord copy = r;
    copy.path = std::filesystem::absolute(r.path).lexically_normal();
    lines.push_back(to_json(copy, base));
  }
  write_jsonl(path, lines);
}

std::vector<CirTriplet> read_triplet_manifest(const std::filesystem::path& path) {
  std::vector<CirTriplet> out;
  for (const auto& j : read_jsonl(path)) out.push_back(triplet_from_json(j));
  return out;
}

void write_triplet_manifest(const std::filesystem::path& path, const std::vector<CirTriplet>& triplets) {
  std::vector<Json> lines;
  lines.reserve(triplets.size());
  for (const auto& t : triplets) lines.push_back(to_json(t));
  write_jsonl(path, lines);
}

std::vector<CandidatePair> read_pairs(const std::filesystem::path& path) {
  std::vector<CandidatePair> out;
  for (const auto& j : read_jsonl(path)) out.push_back(candidate_pair_from_json(j));
  return out;
}

void write_pairs(const std::filesystem::path& path, const std::vector<CandidatePair>& pairs) {
  std::vector<Json> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) lines.push_back(to_json(p));
  write_jsonl(path, lines);
}

}  // namespace cirlab::data
