#include "cirlab/pipeline/embedding.hpp"

#include "cirlab/archive.hpp"
#include "cirlab/error.hpp"
#include "cirlab/hashing.hpp"
#include "cirlab/parallel.hpp"
#include "cirlab/seed.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <mutex>

namespace cirlab::data {

PixelProjectionEmbedder::PixelProjectionEmbedder(int dims, std::uint64_t seed, int input_size)
    : dims_(dims), seed_(seed), input_size_(input_size) {
  if (dims < 1 || input_size < 1) throw ConfigError("embedder dims and input size must be positive");
  auto rng = substream(seed, "embedder.projection");
  std::normal_distribution<double> normal(0.0, 1.0);
  projection_.resize(dims, static_cast<Eigen::Index>(input_size) * input_size * 3);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = normal(rng);
}

std::string PixelProjectionEmbedder::tag() const {
  return fmt::format("pixel-projection-v1/d{}/s{}/px{}", dims_, seed_, input_size_);
}

Eigen::VectorXd PixelProjectionEmbedder::embed(const Image& image) const {
  const Image small = resize_image(image, input_size_);
  Eigen::VectorXd x(static_cast<Eigen::Index>(small.pixels.size()));
  for (std::size_t i = 0; i < small.pixels.size(); ++i) x(static_cast<Eigen::Index>(i)) = small.pixels[i] - 0.5;
  return projection_ * x;
}

EmbeddingStore::EmbeddingStore(EmbeddingStore&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  entries_ = std::move(other.entries_);
  by_content_ = std::move(other.by_content_);
}

EmbeddingStore& EmbeddingStore::operator=(EmbeddingStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = std::move(other.entries_);
    by_content_ = std::move(other.by_content_);
  }
  return *this;
}

std::optional<EmbeddingStore::Entry> EmbeddingStore::find(const std::string& id, const std::string& tag) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find({id, tag});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<Eigen::VectorXd> EmbeddingStore::find_by_content(const std::string& sha, const std::string& tag) const {
  std::shared_lock lock(mutex_);
  const auto it = by_content_.find({sha, tag});
  if (it == by_content_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingStore::put(const std::string& id, const std::string& tag, Entry entry) {
  std::unique_lock lock(mutex_);
  by_content_[{entry.content_sha256, tag}] = entry.vector;
  entries_[{id, tag}] = std::move(entry);
}

std::size_t EmbeddingStore::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::map<std::string, Eigen::VectorXd> EmbeddingStore::vectors(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& [key, entry] : entries_)
    if (key.second == tag) out.emplace(key.first, entry.vector);
  return out;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  Archive archive;
  archive.metadata["format"] = "cirlab-embeddings";
  Json index = Json::array();
  std::size_t i = 0;
  for (const auto& [key, entry] : entries_) {
    const std::string name = fmt::format("v{:08d}", i++);
    index.push_back({{"id", key.first}, {"tag", key.second}, {"sha256", entry.content_sha256}, {"tensor", name}});
    archive.tensors.push_back({name, entry.vector});
  }
  archive.metadata["entries"] = index;
  write_archive(path, archive);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  EmbeddingStore store;
  if (!std::filesystem::exists(path)) return store;
  const Archive archive = read_archive(path);
  if (archive.metadata.value("format", "") != "cirlab-embeddings")
    throw DataError(path.string() + " is not an embedding cache");
  for (const auto& e : archive.metadata.at("entries")) {
    const ad::Matrix& m = archive.at(e.at("tensor").get<std::string>());
    store.put(e.at("id").get<std::string>(), e.at("tag").get<std::string>(),
              {e.at("sha256").get<std::string>(), Eigen::VectorXd(m.col(0))});
  }
  return store;
}

EmbedSummary compute_embeddings(const std::vector<ImageRecord>& records, const Embedder& embedder,
                                EmbeddingStore& store, std::size_t workers) {
  const std::string tag = embedder.tag();
  enum class Outcome { computed, reused, skipped };
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const ImageRecord& r = records[i];
    std::string sha;
    try {
      sha = sha256_file(r.path);
    } catch (const std::exception& e) {
      spdlog::warn("embed: skipping '{}': {}", r.id, e.what());
      outcomes[i] = Outcome::skipped;
      return;
    }
    if (const auto cached = store.find(r.id, tag); cached && cached->content_sha256 == sha) {
      outcomes[i] = Outcome::reused;
      return;
    }
    if (auto same_bytes = store.find_by_content(sha, tag)) {
      store.put(r.id, tag, {sha, std::move(*same_bytes)});
      outcomes[i] = Outcome::reused;
      return;
    }
    Eigen::VectorXd v;
    try {
      v = embedder.embed(load_image(r.path));
    } catch (const DataError& e) {
      spdlog::warn("embed: skipping '{}': {}", r.id, e.what());
      outcomes[i] = Outcome::skipped;
      return;
    }
    const double norm = v.norm();
    if (!(norm > 0.0) || !v.allFinite()) {
      spdlog::warn("embed: skipping '{}': embedder returned a zero or non-finite vector", r.id);
      outcomes[i] = Outcome::skipped;
      return;
    }
    store.put(r.id, tag, {sha, v / norm});
    outcomes[i] = Outcome::computed;
  });
  EmbedSummary summary;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcomes[i] == Outcome::computed) ++summary.computed;
    if (outcomes[i] == Outcome::reused) ++summary.reused;
    if (outcomes[i] == Outcome::skipped) summary.skipped.push_back(records[i].id);
  }
  return summary;
}

}  // namespace cirlab::data
