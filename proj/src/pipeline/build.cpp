#include "cirlab/pipeline/build.hpp"

#include "cirlab/error.hpp"
#include "cirlab/text.hpp"

#include <fmt/format.h>

#include <unordered_map>

namespace cirlab::data {

namespace {

struct TextCounts {
  std::set<std::string> vocab;
  std::size_t words = 0;
  std::size_t texts = 0;

  void add(const std::string& text) {
    const auto tokens = tokenize_words(text);
    vocab.insert(tokens.begin(), tokens.end());
    words += tokens.size();
    ++texts;
  }
  double average() const { return texts == 0 ? 0.0 : static_cast<double>(words) / static_cast<double>(texts); }
};

}  // namespace

DatasetStats compute_stats(const std::vector<CirTriplet>& triplets) {
  DatasetStats s;
  std::set<std::string> images;
  std::map<std::string, std::string> captions;
  TextCounts modifications;
  for (const auto& t : triplets) {
    images.insert(t.reference_id);
    images.insert(t.target_id);
    modifications.add(t.modification_text);
    if (!t.reference_caption.empty()) captions.emplace(t.reference_id, t.reference_caption);
    if (!t.target_caption.empty()) captions.emplace(t.target_id, t.target_caption);
  }
  TextCounts caption_counts;
  for (const auto& [id, caption] : captions) caption_counts.add(caption);
  s.triplets = triplets.size();
  s.unique_images = images.size();
  s.vocab_size = modifications.vocab.size();
  s.avg_modification_length = modifications.average();
  s.caption_pairs = captions.size();
  s.caption_vocab_size = caption_counts.vocab.size();
  s.avg_caption_length = caption_counts.average();
  return s;
}

Json DatasetStats::to_json() const {
  return Json{{"triplets", triplets},
              {"unique_images", unique_images},
              {"vocab_size", vocab_size},
              {"avg_modification_length", avg_modification_length},
              {"caption_pairs", caption_pairs},
              {"caption_vocab_size", caption_vocab_size},
              {"avg_caption_length", avg_caption_length},
              {"excluded_no_change", excluded_no_change},
              {"excluded_incomplete", excluded_incomplete},
              {"below_similarity_floor", below_similarity_floor}};
}

std::string DatasetStats::to_table() const {
  constexpr const char* row = "{:>11} {:>10} {:<28} {:>10} {:>11} {:>12}\n";
  std::string out = fmt::format(row, "#Uniq imgs", "Ann. type", "Pair type", "#Pairs", "Vocab size", "Avg. length");
  out += fmt::format(row, unique_images, "Auto", "<ref img, mod txt, tgt img>", triplets, vocab_size,
                     fmt::format("{:.2f}", avg_modification_length));
  out += fmt::format(row, "", "", "<img, caption>", caption_pairs, caption_vocab_size,
                     fmt::format("{:.2f}", avg_caption_length));
  out += fmt::format("# excluded: {} no-change, {} incomplete; {} kept pairs below the similarity floor\n",
                     excluded_no_change, excluded_incomplete, below_similarity_floor);
  return out;
}

BuildResult build_dataset(const std::vector<ImageRecord>& images, const std::vector<CandidatePair>& pairs,
                          const std::map<std::string, CaptionRecord>& captions,
                          const std::vector<ModificationRecord>& modifications, const std::string& id_prefix,
                          const std::set<std::string>& holdout) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& r : images) by_id.emplace(r.id, &r);

  std::vector<std::string> dangling;
  std::vector<std::string> leaked;
  for (const auto& p : pairs) {
    for (const auto* id : {&p.reference_id, &p.target_id}) {
      if (!by_id.contains(*id)) dangling.push_back(p.reference_id + " -> " + p.target_id + " (unknown '" + *id + "')");
      if (holdout.contains(*id)) leaked.push_back(p.reference_id + " -> " + p.target_id + " (held-out '" + *id + "')");
    }
  }
  auto fail_listing = [](const std::string& what, const std::vector<std::string>& items) {
    std::string message = what + " in " + std::to_string(items.size()) + " pair record(s):";
    for (const auto& item : items) message += "\n  " + item;
    throw DataError(message);
  };
  if (!dangling.empty()) fail_listing("dangling image ids", dangling);
  if (!leaked.empty()) fail_listing("held-out images", leaked);

  std::map<std::pair<std::string, std::string>, const ModificationRecord*> mods;
  for (const auto& m : modifications) mods[{m.reference_id, m.target_id}] = &m;

  BuildResult result;
  std::size_t no_change = 0, incomplete = 0, below_floor = 0;
  for (const auto& p : pairs) {
    const auto m = mods.find({p.reference_id, p.target_id});
    const auto ref_caption = captions.find(p.reference_id);
    const auto tgt_caption = captions.find(p.target_id);
    if (m == mods.end() || ref_caption == captions.end() || tgt_caption == captions.end() ||
        trim(m->second->text).empty()) {
      ++incomplete;
      continue;
    }
    if (m->second->no_change) {
      ++no_change;
      continue;
    }
    if (p.below_similarity_floor) ++below_floor;
    CirTriplet t;
    t.id = fmt::format("{}{:06d}", id_prefix, result.triplets.size());
    t.reference_id = p.reference_id;
    t.target_id = p.target_id;
    t.category = by_id.at(p.reference_id)->category;
    t.modification_text = trim(m->second->text);
    t.reference_caption = ref_caption->second.caption;
    t.target_caption = tgt_caption->second.caption;
    t.provenance.pair_similarity = p.similarity;
    t.provenance.rank_of_target = p.rank_of_target;
    t.provenance.caption_generator = tgt_caption->second.generator;
    t.provenance.synthesis_generator = m->second->generator;
    t.provenance.prompt_fingerprint = m->second->prompt_fingerprint;
    result.triplets.push_back(std::move(t));
  }
  result.stats = compute_stats(result.triplets);
  result.stats.excluded_no_change = no_change;
  result.stats.excluded_incomplete = incomplete;
  result.stats.below_similarity_floor = below_floor;
  return result;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<ImageRecord>& images,
                   const BuildResult& result) {
  std::filesystem::create_directories(dir);
  write_image_manifest(dir / "images.jsonl", images);
  write_triplet_manifest(dir / "triplets.jsonl", result.triplets);
  write_text_file(dir / "stats.json", result.stats.to_json().dump(2) + "\n");
  write_text_file(dir / "stats.txt", result.stats.to_table());
}

}  // namespace cirlab::data
