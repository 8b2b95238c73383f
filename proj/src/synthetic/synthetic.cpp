#include "cirlab/synthetic.hpp"

#include "cirlab/error.hpp"
#include "cirlab/seed.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cirlab::synthetic {

namespace {

constexpr std::array<std::array<double, 3>, 8> kRgb{{{0.85, 0.10, 0.10},
                                                      {0.10, 0.20, 0.85},
                                                      {0.10, 0.65, 0.20},
                                                      {0.95, 0.85, 0.10},
                                                      {0.05, 0.05, 0.05},
                                                      {0.97, 0.97, 0.97},
                                                      {0.50, 0.10, 0.60},
                                                      {1.00, 0.50, 0.00}}};
constexpr double kBackground = 0.72;

// True where the secondary tone of the pattern shows.
bool pattern_mark(int pattern, int y, int x) {
  switch (pattern) {
    case 1: return y % 2 == 1;
    case 2: return x % 2 == 1;
    case 3: return ((x / 2) + (y / 2)) % 2 == 1;
    case 4: return x % 3 == 1 && y % 3 == 1;
    default: return false;
  }
}

template <class Array>
std::string_view pick(const Array& options, std::mt19937_64& rng) {
  return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
}

std::string fill(std::string_view templ, std::string_view value) {
  return fmt::format(fmt::runtime(templ), value);
}

}  // namespace

Image render_garment(const Garment& g, int size, double noise, std::mt19937_64& rng) {
  if (size < 4) throw ContractViolation("render_garment: size must be at least 4");
  Image image(size, size);
  const auto& base = kRgb.at(static_cast<std::size_t>(g.color));
  const int rows = std::max(1, static_cast<int>(std::lround(size * (g.length + 2) / 6.0)));
  std::normal_distribution<double> jitter(0.0, noise);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool inside = y < rows && x >= 1 && x < size - 1;
      const bool mark = inside && pattern_mark(g.pattern, y, x);
      for (int c = 0; c < 3; ++c) {
        double v = kBackground;
        if (inside) v = mark ? 0.4 * base[c] + 0.6 * (1.0 - base[c]) : base[c];
        if (noise > 0.0) v += jitter(rng);
        image.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return image;
}

std::string describe(const Garment& g, std::string_view category) {
  return fmt::format("a {} {} {} {}", kColors.at(g.color), kPatterns.at(g.pattern), kLengths.at(g.length), category);
}

std::string modification_text(const Garment& from, const Garment& to, std::mt19937_64& rng) {
  static constexpr std::array<std::string_view, 4> color_t{"make it {}", "change the color to {}", "{} instead",
                                                          "in {}"};
  static constexpr std::array<std::string_view, 3> pattern_t{"make it {}", "change to a {} pattern", "{} instead"};
  static constexpr std::array<std::string_view, 3> length_t{"make it {}", "change to a {} cut", "{} instead"};
  std::vector<std::string> parts;
  if (from.color != to.color) parts.push_back(fill(pick(color_t, rng), kColors.at(to.color)));
  if (from.pattern != to.pattern) parts.push_back(fill(pick(pattern_t, rng), kPatterns.at(to.pattern)));
  if (from.length != to.length) parts.push_back(fill(pick(length_t, rng), kLengths.at(to.length)));
  if (parts.empty()) return "no visible difference";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += " and " + parts[i];
  return out;
}

std::map<std::string, std::string> attributes_of(const Garment& g) {
  return {{"color", std::string(kColors.at(g.color))},
          {"length", std::string(kLengths.at(g.length))},
          {"pattern", std::string(kPatterns.at(g.pattern))}};
}

void write_planted_dataset(const std::filesystem::path& root, const PlantedOptions& options) {
  constexpr int kGallery = static_cast<int>(kColors.size() * kPatterns.size() * kLengths.size());
  if (options.train_triplets < 2 || options.heldout_triplets < 1 ||
      options.train_triplets + options.heldout_triplets > kGallery)
    throw ContractViolation("write_planted_dataset: split sizes must fit inside the 200-image gallery");
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  fs::create_directories(root / "train");
  fs::create_directories(root / "heldout");

  std::vector<Garment> garments;
  std::vector<data::ImageRecord> records;
  auto render_rng = substream(options.seed, "planted.render");
  for (int c = 0; c < static_cast<int>(kColors.size()); ++c)
    for (int p = 0; p < static_cast<int>(kPatterns.size()); ++p)
      for (int l = 0; l < static_cast<int>(kLengths.size()); ++l) {
        const Garment g{c, p, l};
        const std::string id = fmt::format("g{:03d}", garments.size());
        const fs::path file = root / "images" / (id + ".png");
        save_image(file, render_garment(g, options.image_size, options.noise, render_rng));
        data::ImageRecord r;
        r.id = id;
        r.path = file;
        r.source = data::ImageSource::other;
        r.category = options.category;
        r.item_group = id;
        r.attributes = attributes_of(g);
        records.push_back(std::move(r));
        garments.push_back(g);
      }
  auto index_of = [](const Garment& g) {
    return (g.color * static_cast<int>(kPatterns.size()) + g.pattern) * static_cast<int>(kLengths.size()) + g.length;
  };

  std::vector<int> references(kGallery);
  std::iota(references.begin(), references.end(), 0);
  auto rng = substream(options.seed, "planted.triplets");
  std::shuffle(references.begin(), references.end(), rng);

  auto make_split = [&](const std::string& name, int offset, int count) {
    std::vector<data::CirTriplet> triplets;
    for (int i = 0; i < count; ++i) {
      const Garment from = garments[static_cast<std::size_t>(references[static_cast<std::size_t>(offset + i)])];
      Garment to = from;
      const int attribute = std::uniform_int_distribution<int>(0, 2)(rng);
      int* slot = attribute == 0 ? &to.color : attribute == 1 ? &to.pattern : &to.length;
      const int arity = attribute == 0 ? static_cast<int>(kColors.size())
                        : attribute == 1 ? static_cast<int>(kPatterns.size())
                                         : static_cast<int>(kLengths.size());
      *slot = (*slot + std::uniform_int_distribution<int>(1, arity - 1)(rng)) % arity;

      data::CirTriplet t;
      t.id = fmt::format("{}_{:03d}", name, i);
      t.reference_id = records[static_cast<std::size_t>(index_of(from))].id;
      t.target_id = records[static_cast<std::size_t>(index_of(to))].id;
      t.category = options.category;
      t.modification_text = modification_text(from, to, rng);
      t.reference_caption = describe(from, options.category);
      t.target_caption = describe(to, options.category);
      t.provenance.caption_generator = "planted";
      t.provenance.synthesis_generator = "planted";
      triplets.push_back(std::move(t));
    }
    data::write_image_manifest(root / name / "images.jsonl", records);
    data::write_triplet_manifest(root / name / "triplets.jsonl", triplets);
  };
  make_split("train", 0, options.train_triplets);
  make_split("heldout", options.train_triplets, options.heldout_triplets);
}

void write_pipeline_fixture(const std::filesystem::path& root, const FixtureOptions& options) {
  static constexpr std::array<std::string_view, 3> categories{"dress", "skirt", "top"};
  static constexpr std::array<std::string_view, 4> filler{"new season", "free shipping", "best seller", "slim fit"};
  const int items = options.images / 2;
  if (items < 1) throw ContractViolation("write_pipeline_fixture: need at least 2 images");
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");

  auto rng = substream(options.seed, "fixture");
  std::vector<data::ImageRecord> records;
  for (int i = 0; i < items; ++i) {
    const Garment g{std::uniform_int_distribution<int>(0, kColors.size() - 1)(rng),
                    std::uniform_int_distribution<int>(0, kPatterns.size() - 1)(rng),
                    std::uniform_int_distribution<int>(0, kLengths.size() - 1)(rng)};
    const auto source = i % 2 == 0 ? data::ImageSource::fashion200k : data::ImageSource::deepfashion_mm;
    const std::string category(categories[static_cast<std::size_t>((i / 2) % categories.size())]);
    for (const char* view : {"a", "b"}) {
      data::ImageRecord r;
      r.id = fmt::format("item{:03d}_{}", i, view);
      r.path = root / "images" / (r.id + ".png");
      r.source = source;
      r.category = category;
      r.item_group = fmt::format("item{:03d}", i);
      if (source == data::ImageSource::fashion200k) {
        r.web_caption = fmt::format("Women's {} {} {} {} - {}", kColors.at(g.color), kPatterns.at(g.pattern),
                                    kLengths.at(g.length), category, pick(filler, rng));
      } else {
        r.attributes = attributes_of(g);
      }
      save_image(r.path, render_garment(g, options.image_size, 0.04, rng));
      records.push_back(std::move(r));
    }
  }
  data::write_image_manifest(root / "images.jsonl", records);
}

}  // namespace cirlab::synthetic
