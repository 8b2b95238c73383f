#pragma once

#include "cirlab/image.hpp"
#include "cirlab/pipeline/records.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace cirlab::data {

/// Any image-to-vector model. Outputs need not be normalised; the store normalises.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Identifies model and settings; part of the cache key.
  virtual std::string tag() const = 0;
  virtual Eigen::VectorXd embed(const Image& image) const = 0;
};

/// Deterministic stand-in: resizes to `input_size`, centres pixels on 0.5 and applies a
/// Gaussian random projection seeded from `seed`. Cosine similarity between outputs
/// approximates cosine similarity between the centred pixel vectors.
class PixelProjectionEmbedder final : public Embedder {
 public:
  explicit PixelProjectionEmbedder(int dims = 64, std::uint64_t seed = 0, int input_size = 16);
  std::string tag() const override;
  Eigen::VectorXd embed(const Image& image) const override;

 private:
  int dims_;
  std::uint64_t seed_;
  int input_size_;
  Eigen::MatrixXd projection_;
};

/// Unit vectors keyed by (image id, embedder tag), remembering the SHA-256 of the image
/// bytes each was computed from. Safe for concurrent readers and serialised writers.
class EmbeddingStore {
 public:
  struct Entry {
    std::string content_sha256;
    Eigen::VectorXd vector;
  };

  std::optional<Entry> find(const std::string& id, const std::string& tag) const;
  /// Any entry for `tag` computed from identical bytes, whatever its id.
  std::optional<Eigen::VectorXd> find_by_content(const std::string& content_sha256, const std::string& tag) const;
  void put(const std::string& id, const std::string& tag, Entry entry);
  std::size_t size() const;

  /// id -> vector for one tag.
  std::map<std::string, Eigen::VectorXd> vectors(const std::string& tag) const;

  void save(const std::filesystem::path& path) const;
  /// Missing file yields an empty store.
  static EmbeddingStore load(const std::filesystem::path& path);

  EmbeddingStore() = default;
  EmbeddingStore(EmbeddingStore&& other) noexcept;
  EmbeddingStore& operator=(EmbeddingStore&& other) noexcept;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
  std::map<std::pair<std::string, std::string>, Eigen::VectorXd> by_content_;
};

struct EmbedSummary {
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::vector<std::string> skipped;  ///< ids whose image could not be read
};

/// Fills `store` with one unit vector per readable record. Re-runs reuse cached entries
/// whose image bytes are unchanged. Unreadable images are logged and skipped.
EmbedSummary compute_embeddings(const std::vector<ImageRecord>& records, const Embedder& embedder,
                                EmbeddingStore& store, std::size_t workers = 1);

}  // namespace cirlab::data
