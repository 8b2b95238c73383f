#include "cirlab/eval/evaluate.hpp"

#include "cirlab/error.hpp"
#include "cirlab/parallel.hpp"
#include "cirlab/seed.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace cirlab::eval {

std::string to_string(GalleryMode mode) {
  switch (mode) {
    case GalleryMode::split_images: return "split_images";
    case GalleryMode::target_images: return "target_images";
    case GalleryMode::manifest: return "manifest";
  }
  return "split_images";
}

GalleryMode parse_gallery_mode(const std::string& text) {
  if (text == "split_images") return GalleryMode::split_images;
  if (text == "target_images") return GalleryMode::target_images;
  if (text == "manifest") return GalleryMode::manifest;
  throw ConfigError("unknown gallery mode '" + text + "' (split_images, target_images, manifest)");
}

namespace {

Json scored_json(const std::vector<ScoredId>& list) {
  Json out = Json::array();
  for (const auto& s : list) out.push_back({{"id", s.id}, {"score", s.score}});
  return out;
}

Json qualitative_json(const QualitativeEntry& q) {
  return Json{{"triplet_id", q.triplet_id},
              {"category", q.category},
              {"reference_id", q.reference_id},
              {"modification_text", q.modification_text},
              {"target_id", q.target_id},
              {"target_rank", q.target_rank},
              {"top", scored_json(q.top)}};
}

}  // namespace

Json EvalReport::to_json() const {
  Json per = Json::object();
  for (const auto& c : per_category) {
    per[c.category] = {{"recall_at_10", c.recall_at_10},
                       {"recall_at_50", c.recall_at_50},
                       {"triplets", c.triplets},
                       {"gallery_size", c.gallery_size}};
  }
  return Json{{"dataset", dataset_tag},
              {"checkpoint_fingerprint", checkpoint_fingerprint},
              {"gallery", {{"mode", gallery_mode}, {"scope", "category-restricted"}}},
              {"triplet_count", triplet_count},
              {"per_category", per},
              {"excluded_categories", excluded_categories},
              {"average", average}};
}

std::string EvalReport::to_table() const {
  std::string out = fmt::format("# dataset: {}  triplets: {}  gallery: {} (category-restricted)\n", dataset_tag,
                                triplet_count, gallery_mode);
  std::string names, heads, values;
  for (const auto& c : per_category) {
    names += fmt::format("{:^18}", c.category);
    heads += fmt::format("{:>9}{:>9}", "R@10", "R@50");
    values += fmt::format("{:>9.2f}{:>9.2f}", c.recall_at_10, c.recall_at_50);
  }
  out += names + fmt::format("{:>10}", "Average") + "\n";
  out += heads + "\n";
  out += values + fmt::format("{:>10.2f}", average) + "\n";
  for (const auto& e : excluded_categories) out += "# excluded (no triplets): " + e + "\n";
  return out;
}

EvalReport evaluate(const std::vector<data::ImageRecord>& images, const std::vector<data::CirTriplet>& triplets,
                    const model::CirModel& model, const EvalOptions& options) {
  std::vector<data::ImageRecord> gallery_records = images;
  if (options.gallery == GalleryMode::manifest) {
    if (options.gallery_manifest.empty()) throw ConfigError("gallery mode 'manifest' needs a gallery manifest path");
    gallery_records = data::read_image_manifest(options.gallery_manifest);
  }

  std::vector<std::string> categories = options.categories;
  if (categories.empty()) {
    std::set<std::string> present;
    for (const auto& t : triplets) present.insert(t.category);
    categories.assign(present.begin(), present.end());
  }

  // Which images are needed, then decode each once.
  std::unordered_map<std::string, const data::ImageRecord*> by_id;
  for (const auto& r : images) by_id.emplace(r.id, &r);
  for (const auto& r : gallery_records) by_id.emplace(r.id, &r);

  struct Plan {
    std::string category;
    std::vector<const data::CirTriplet*> queries;
    std::vector<std::string> gallery;
  };
  std::vector<Plan> plans;
  EvalReport report;
  report.dataset_tag = options.dataset_tag;
  report.gallery_mode = to_string(options.gallery);
  for (const auto& category : categories) {
    Plan plan{category, {}, {}};
    for (const auto& t : triplets)
      if (t.category == category) plan.queries.push_back(&t);
    if (plan.queries.empty()) {
      spdlog::warn("category '{}' has no triplets; excluded from the report", category);
      report.excluded_categories.push_back(category);
      continue;
    }
    std::set<std::string> pool;
    if (options.gallery == GalleryMode::target_images) {
      for (const auto* t : plan.queries) pool.insert(t->target_id);
    } else {
      for (const auto& r : gallery_records)
        if (r.category == category) pool.insert(r.id);
    }
    if (pool.empty()) {
      spdlog::warn("category '{}' has an empty gallery; excluded from the report", category);
      report.excluded_categories.push_back(category);
      continue;
    }
    plan.gallery.assign(pool.begin(), pool.end());
    plans.push_back(std::move(plan));
  }
  if (plans.empty()) throw DataError("no category has both triplets and gallery images");

  std::set<std::string> needed;
  for (const auto& p : plans) {
    needed.insert(p.gallery.begin(), p.gallery.end());
    for (const auto* t : p.queries) needed.insert(t->reference_id);
  }
  std::vector<std::string> needed_ids(needed.begin(), needed.end());
  std::vector<Image> decoded(needed_ids.size());
  const int size = model.config().backbone.image_size;
  parallel_for(needed_ids.size(), options.workers, [&](std::size_t i) {
    const auto it = by_id.find(needed_ids[i]);
    if (it == by_id.end()) throw DataError("evaluation references unknown image '" + needed_ids[i] + "'");
    decoded[i] = resize_image(load_image(it->second->path), size);
  });
  std::unordered_map<std::string, const Image*> image_of;
  for (std::size_t i = 0; i < needed_ids.size(); ++i) image_of.emplace(needed_ids[i], &decoded[i]);

  const std::string fingerprint = model.fingerprint();
  report.checkpoint_fingerprint = fingerprint;

  struct Outcome {
    std::size_t rank = 0;
    std::vector<ScoredId> top;
    std::vector<std::string> head;  // ids of the first 50
  };
  std::map<std::string, Outcome> outcomes;
  std::map<std::string, std::string> category_of;
  std::vector<double> recall_values;
  for (const auto& plan : plans) {
    std::vector<IndexedImage> candidates;
    for (const auto& id : plan.gallery) candidates.push_back({id, image_of.at(id)});
    const RetrievalIndex index = build_index(candidates, model, fingerprint, options.workers);
    require_same_model(index, fingerprint);

    std::vector<Outcome> per_query(plan.queries.size());
    parallel_for(plan.queries.size(), options.workers, [&](std::size_t q) {
      ad::NoGradGuard no_grad;
      const auto* t = plan.queries[q];
      const ad::Matrix query = model.query_embedding(*image_of.at(t->reference_id), t->modification_text).value();
      const auto ranking = retrieve(query, index, index.size());
      for (std::size_t r = 0; r < ranking.size(); ++r)
        if (ranking[r].id == t->target_id) per_query[q].rank = r + 1;
      const auto prefix = [&](std::size_t n) {
        return ranking.begin() + static_cast<std::ptrdiff_t>(std::min(n, ranking.size()));
      };
      per_query[q].top.assign(ranking.begin(), prefix(3));
      for (auto it = ranking.begin(); it != prefix(50); ++it) per_query[q].head.push_back(it->id);
    });

    std::map<std::string, std::vector<std::string>> results;
    std::map<std::string, std::string> truth;
    for (std::size_t q = 0; q < plan.queries.size(); ++q) {
      const auto* t = plan.queries[q];
      results[t->id] = per_query[q].head;
      truth[t->id] = t->target_id;
      outcomes[t->id] = per_query[q];
      category_of[t->id] = plan.category;
    }
    CategoryRecall c;
    c.category = plan.category;
    c.recall_at_10 = recall_at_k(results, truth, 10);
    c.recall_at_50 = recall_at_k(results, truth, 50);
    c.triplets = plan.queries.size();
    c.gallery_size = index.size();
    recall_values.push_back(c.recall_at_10);
    recall_values.push_back(c.recall_at_50);
    report.triplet_count += c.triplets;
    report.per_category.push_back(c);
  }
  report.average =
      std::accumulate(recall_values.begin(), recall_values.end(), 0.0) / static_cast<double>(recall_values.size());

  if (options.qualitative > 0) {
    std::vector<const data::CirTriplet*> evaluated;
    for (const auto& plan : plans) evaluated.insert(evaluated.end(), plan.queries.begin(), plan.queries.end());
    auto rng = substream(options.seed, "sampling:qualitative");
    std::shuffle(evaluated.begin(), evaluated.end(), rng);
    evaluated.resize(std::min(options.qualitative, evaluated.size()));
    std::sort(evaluated.begin(), evaluated.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const auto* t : evaluated) {
      const Outcome& o = outcomes.at(t->id);
      report.qualitative.push_back(
          {t->id, category_of.at(t->id), t->reference_id, t->modification_text, t->target_id, o.rank, o.top});
    }
  }
  return report;
}

EvalReport evaluate_dir(const std::filesystem::path& dataset_dir, const model::CirModel& model, EvalOptions options) {
  if (options.dataset_tag.empty()) options.dataset_tag = dataset_dir.filename().string();
  return evaluate(data::read_image_manifest(dataset_dir / "images.jsonl"),
                  data::read_triplet_manifest(dataset_dir / "triplets.jsonl"), model, options);
}

void write_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_file(out_dir / "report.txt", report.to_table());
  if (!report.qualitative.empty()) {
    std::vector<Json> lines;
    for (const auto& q : report.qualitative) lines.push_back(qualitative_json(q));
    write_jsonl(out_dir / "qualitative.jsonl", lines);
  }
}

}  // namespace cirlab::eval
