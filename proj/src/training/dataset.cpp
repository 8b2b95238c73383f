#include "cirlab/training/dataset.hpp"

#include "cirlab/error.hpp"

namespace cirlab::training {

TripletDataset::TripletDataset(std::vector<data::ImageRecord> images, std::vector<data::CirTriplet> triplets,
                               int image_size)
    : records_(std::move(images)), triplets_(std::move(triplets)) {
  std::unordered_map<std::string, const data::ImageRecord*> by_id;
  for (const auto& r : records_) by_id.emplace(r.id, &r);
  auto decode = [&](const std::string& id, const std::string& triplet_id) {
    if (images_.contains(id)) return;
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("triplet " + triplet_id + " references unknown image '" + id + "'");
    images_.emplace(id, resize_image(load_image(it->second->path), image_size));
  };
  for (const auto& t : triplets_) {
    decode(t.reference_id, t.id);
    decode(t.target_id, t.id);
  }
}

TripletDataset TripletDataset::load(const std::filesystem::path& dataset_dir, int image_size) {
  return TripletDataset(data::read_image_manifest(dataset_dir / "images.jsonl"),
                        data::read_triplet_manifest(dataset_dir / "triplets.jsonl"), image_size);
}

const Image& TripletDataset::image(const std::string& id) const {
  const auto it = images_.find(id);
  if (it == images_.end()) throw DataError("image '" + id + "' is not loaded in this dataset");
  return it->second;
}

bool TripletDataset::has_captions() const {
  if (triplets_.empty()) return false;
  for (const auto& t : triplets_)
    if (t.target_caption.empty()) return false;
  return true;
}

TripletBatch TripletDataset::batch(std::span<const std::size_t> indices) const {
  TripletBatch b;
  const bool captions = has_captions();
  if (captions) b.target_captions.emplace();
  for (std::size_t i : indices) {
    const data::CirTriplet& t = triplets_.at(i);
    b.reference_images.push_back(&image(t.reference_id));
    b.modification_texts.push_back(t.modification_text);
    b.target_images.push_back(&image(t.target_id));
    if (captions) b.target_captions->push_back(t.target_caption);
  }
  return b;
}

}  // namespace cirlab::training
