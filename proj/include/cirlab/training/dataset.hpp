#pragma once

#include "cirlab/image.hpp"
#include "cirlab/pipeline/records.hpp"
#include "cirlab/training/losses.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cirlab::training {

/// Decoded images plus triplets. A dataset directory holds `images.jsonl` and
/// `triplets.jsonl`.
class TripletDataset {
 public:
  TripletDataset(std::vector<data::ImageRecord> images, std::vector<data::CirTriplet> triplets, int image_size);

  static TripletDataset load(const std::filesystem::path& dataset_dir, int image_size);

  const std::vector<data::CirTriplet>& triplets() const { return triplets_; }
  const std::vector<data::ImageRecord>& records() const { return records_; }
  const Image& image(const std::string& id) const;
  bool contains_image(const std::string& id) const { return images_.contains(id); }
  /// True when every triplet carries a target caption (caption retrieval is possible).
  bool has_captions() const;

  TripletBatch batch(std::span<const std::size_t> indices) const;

 private:
  std::vector<data::ImageRecord> records_;
  std::vector<data::CirTriplet> triplets_;
  std::unordered_map<std::string, Image> images_;
};

}  // namespace cirlab::training
