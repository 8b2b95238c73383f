#pragma once

#include "cirlab/jsonl.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cirlab::data {

enum class ImageSource { fashion200k, deepfashion_mm, other };

std::string to_string(ImageSource source);
ImageSource parse_image_source(const std::string& text);

struct ImageRecord {
  std::string id;
  std::filesystem::path path;  ///< resolved against the manifest's directory on load
  ImageSource source = ImageSource::other;
  std::string category;
  std::string item_group;
  std::optional<std::string> web_caption;
  std::map<std::string, std::string> attributes;
};

struct CandidatePair {
  std::string reference_id;
  std::string target_id;
  double similarity = 0.0;
  int rank_of_target = 0;
  bool below_similarity_floor = false;
};

struct CaptionRecord {
  std::string image_id;
  std::string caption;
  std::string generator;
  std::string prompt_fingerprint;
  bool truncated = false;
};

/// Output of the text-synthesis stage for one pair.
struct ModificationRecord {
  std::string reference_id;
  std::string target_id;
  std::string text;
  bool no_change = false;  ///< the service reported no visible difference
  std::string generator;
  std::string prompt_fingerprint;
};

struct TripletProvenance {
  double pair_similarity = 0.0;
  int rank_of_target = 0;
  std::string caption_generator;
  std::string synthesis_generator;
  std::string prompt_fingerprint;
};

/// <reference image, modification text, target image>. Captions are empty for datasets
/// that do not ship image captions (Fashion IQ style).
struct CirTriplet {
  std::string id;
  std::string reference_id;
  std::string target_id;
  std::string category;
  std::string modification_text;
  std::string reference_caption;
  std::string target_caption;
  TripletProvenance provenance;
};

Json to_json(const ImageRecord& record, const std::filesystem::path& relative_to = {});
Json to_json(const CandidatePair& pair);
Json to_json(const CaptionRecord& record);
Json to_json(const ModificationRecord& record);
Json to_json(const CirTriplet& triplet);

ImageRecord image_record_from_json(const Json& json, const std::filesystem::path& base_dir = {});
CandidatePair candidate_pair_from_json(const Json& json);
CaptionRecord caption_record_from_json(const Json& json);
ModificationRecord modification_record_from_json(const Json& json);
CirTriplet triplet_from_json(const Json& json);

/// Validates unique ids and non-empty item groups.
std::vector<ImageRecord> read_image_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest's directory.
void write_image_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records);

std::vector<CirTriplet> read_triplet_manifest(const std::filesystem::path& path);
void write_triplet_manifest(const std::filesystem::path& path, const std::vector<CirTriplet>& triplets);

std::vector<CandidatePair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<CandidatePair>& pairs);

}  // namespace cirlab::data
