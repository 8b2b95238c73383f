#pragma once

// Procedurally rendered garments with known attributes, used as fixtures for tests,
// demos and the smoke pipeline. Nothing here is needed to run on real data.

#include "cirlab/image.hpp"
#include "cirlab/pipeline/records.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace cirlab::synthetic {

inline constexpr std::array<std::string_view, 8> kColors{"red", "blue", "green", "yellow",
                                                         "black", "white", "purple", "orange"};
inline constexpr std::array<std::string_view, 5> kPatterns{"solid", "striped", "pinstriped", "checkered", "dotted"};
inline constexpr std::array<std::string_view, 5> kLengths{"cropped", "short", "knee-length", "midi", "maxi"};

struct Garment {
  int color = 0;
  int pattern = 0;
  int length = 0;

  bool operator==(const Garment&) const = default;
};

/// Renders on a light gray background; `noise` is the stddev of per-pixel jitter.
Image render_garment(const Garment& garment, int size, double noise, std::mt19937_64& rng);

/// "a red striped midi dress"
std::string describe(const Garment& garment, std::string_view category);

/// Short instruction naming what changes from `from` to `to`, e.g. "make it blue".
/// Several templates are drawn from `rng` so the text is not a fixed function of the delta.
std::string modification_text(const Garment& from, const Garment& to, std::mt19937_64& rng);

/// Attribute map as stored in image manifests.
std::map<std::string, std::string> attributes_of(const Garment& garment);

struct PlantedOptions {
  int train_triplets = 64;
  int heldout_triplets = 64;
  int image_size = 8;
  double noise = 0.02;
  std::string category = "dress";
  std::uint64_t seed = 0;
};

/// Writes a full-factorial gallery (8 colors x 5 patterns x 5 lengths = 200 images) and two
/// triplet splits whose targets differ from their references in exactly one attribute:
///   root/images/*.png
///   root/train/{images.jsonl,triplets.jsonl}
///   root/heldout/{images.jsonl,triplets.jsonl}
/// Both image manifests list the whole gallery. Train and held-out references are disjoint.
void write_planted_dataset(const std::filesystem::path& root, const PlantedOptions& options);

struct FixtureOptions {
  int images = 50;  ///< rounded down to an even count; every item has two views
  int image_size = 16;
  std::uint64_t seed = 0;
};

/// Raw image pool for the construction pipeline: root/images/*.png plus root/images.jsonl
/// with mixed sources and categories, noisy web captions and attribute maps.
void write_pipeline_fixture(const std::filesystem::path& root, const FixtureOptions& options);

}  // namespace cirlab::synthetic
