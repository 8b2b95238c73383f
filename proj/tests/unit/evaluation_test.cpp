#include "cirlab/error.hpp"
#include "cirlab/eval/evaluate.hpp"
#include "cirlab/eval/quality.hpp"
#include "cirlab/eval/retrieval.hpp"
#include "cirlab/jsonl.hpp"
#include "cirlab/model/cir_model.hpp"
#include "test_support.hpp"

#include <fmt/format.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace cirlab::eval {
namespace {

using model::CirModel;
using testing::scratch_dir;

ad::Matrix gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Sum over rows of the cosine between matching rows, written out longhand.
double cosine_sum(const ad::Matrix& a, const ad::Matrix& b) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      dot += a(r, c) * b(r, c);
      na += a(r, c) * a(r, c);
      nb += b(r, c) * b(r, c);
    }
    total += dot / std::sqrt(na * nb);
  }
  return total;
}

RetrievalIndex random_index(int size, int n_t, int d_c, std::mt19937_64& rng) {
  RetrievalIndex index;
  index.model_fingerprint = "synthetic";
  for (int i = 0; i < size; ++i) {
    index.candidate_ids.push_back(fmt::format("c{:03d}", (i * 37) % size));  // ids not in insertion order
    index.embeddings.push_back(gaussian(n_t, d_c, rng));
  }
  return index;
}

// ---------------------------------------------------------------- index

struct Images {
  std::vector<Image> images;
  std::vector<IndexedImage> indexed;
};

Images random_images(int count, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Images out;
  for (int i = 0; i < count; ++i) out.images.push_back(testing::random_image(size, rng));
  for (int i = 0; i < count; ++i) out.indexed.push_back({fmt::format("img{}", i), &out.images[static_cast<std::size_t>(i)]});
  return out;
}

TEST(BuildIndex, OneEmbeddingSetPerCandidate) {
  const auto model = CirModel::create(testing::toy_config(), 1);
  const auto images = random_images(5, 4, 1);
  const auto index = build_index(images.indexed, model);
  EXPECT_EQ(index.size(), 5u);
  ASSERT_EQ(index.embeddings.size(), 5u);
  for (const auto& e : index.embeddings) {
    EXPECT_EQ(e.rows(), model.config().n_t);
    EXPECT_EQ(e.cols(), model.config().d_c);
  }
  EXPECT_EQ(index.model_fingerprint, model.fingerprint());
}

TEST(BuildIndex, RebuildIsBitIdenticalAcrossWorkerCounts) {
  const auto model = CirModel::create(testing::toy_config(), 1);
  const auto images = random_images(9, 4, 2);
  const auto a = build_index(images.indexed, model, 1);
  const auto b = build_index(images.indexed, model, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.candidate_ids[i], b.candidate_ids[i]);
    EXPECT_EQ(a.embeddings[i], b.embeddings[i]);
  }
}

TEST(BuildIndex, SaveLoadRoundTrip) {
  const auto model = CirModel::create(testing::toy_config(), 1);
  const auto images = random_images(4, 4, 3);
  const auto index = build_index(images.indexed, model);
  const auto path = scratch_dir("index_roundtrip") / "index.bin";
  index.save(path);
  const auto back = RetrievalIndex::load(path);
  EXPECT_EQ(back.candidate_ids, index.candidate_ids);
  EXPECT_EQ(back.model_fingerprint, index.model_fingerprint);
  for (std::size_t i = 0; i < index.size(); ++i) EXPECT_EQ(back.embeddings[i], index.embeddings[i]);
}

TEST(BuildIndex, DuplicateIdIsRejected) {
  const auto model = CirModel::create(testing::toy_config(), 1);
  auto images = random_images(3, 4, 4);
  images.indexed[2].id = images.indexed[0].id;
  EXPECT_THROW(build_index(images.indexed, model), ContractViolation);
}

TEST(Retrieve, MismatchedCheckpointIsRejected) {
  const auto model = CirModel::create(testing::toy_config(), 1);
  const auto other = CirModel::create(testing::toy_config(), 2);
  const auto images = random_images(4, 4, 5);
  const auto index = build_index(images.indexed, model);
  EXPECT_NO_THROW(retrieve(images.images[0], "make it red", index, 2, model));
  EXPECT_THROW(retrieve(images.images[0], "make it red", index, 2, other), DataError);
}

TEST(Retrieve, QueryEqualToACandidateRanksItFirstWithScoreNt) {
  std::mt19937_64 rng(6);
  const auto index = random_index(50, 12, 16, rng);
  for (std::size_t probe : {0u, 17u, 49u}) {
    const auto top = retrieve(index.embeddings[probe], index, 5);
    EXPECT_EQ(top[0].id, index.candidate_ids[probe]);
    EXPECT_DOUBLE_EQ(top[0].score, 12.0);
  }
}

TEST(Retrieve, MatchesAnExhaustiveSortOn200Candidates) {
  std::mt19937_64 rng(7);
  auto index = random_index(200, 12, 16, rng);
  // Exact duplicates create score ties that only the id rule can order.
  index.embeddings[5] = index.embeddings[120];
  index.embeddings[77] = index.embeddings[120];
  for (int q = 0; q < 50; ++q) {
    const ad::Matrix query = q % 10 == 0 ? ad::Matrix(index.embeddings[120]) : gaussian(12, 16, rng);
    std::vector<std::pair<double, std::string>> oracle;
    for (std::size_t i = 0; i < index.size(); ++i)
      oracle.emplace_back(cosine_sum(query, index.embeddings[i]), index.candidate_ids[i]);
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k : {1u, 10u, 50u, 200u}) {
      const auto got = retrieve(query, index, k);
      ASSERT_EQ(got.size(), k);
      for (std::size_t i = 0; i < k; ++i) {
        ASSERT_EQ(got[i].id, oracle[i].second) << "query " << q << " k " << k << " position " << i;
        ASSERT_NEAR(got[i].score, oracle[i].first, 1e-12);
      }
    }
  }
}

TEST(Retrieve, IdenticalEmbeddingsAreOrderedById) {
  std::mt19937_64 rng(8);
  RetrievalIndex index;
  const ad::Matrix shared = gaussian(3, 4, rng);
  for (const char* id : {"zeta", "alpha", "mid"}) {
    index.candidate_ids.push_back(id);
    index.embeddings.push_back(shared);
  }
  const auto top = retrieve(gaussian(3, 4, rng), index, 3);
  EXPECT_EQ(top[0].id, "alpha");
  EXPECT_EQ(top[1].id, "mid");
  EXPECT_EQ(top[2].id, "zeta");
}

TEST(Retrieve, KLargerThanIndexIsAContractViolation) {
  std::mt19937_64 rng(9);
  const auto index = random_index(10, 2, 3, rng);
  EXPECT_NO_THROW(retrieve(index.embeddings[0], index, 10));
  EXPECT_THROW(retrieve(index.embeddings[0], index, 11), ContractViolation);
}

TEST(Retrieve, ScoresAreNonIncreasing) {
  std::mt19937_64 rng(10);
  const auto index = random_index(80, 4, 6, rng);
  const auto all = retrieve(gaussian(4, 6, rng), index, 80);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_TRUE(ranks_before(all[i - 1], all[i]));
}

// ---------------------------------------------------------------- recall

// Query i has its target at position ranks[i] of a 100-long ranking.
std::pair<std::map<std::string, std::vector<std::string>>, std::map<std::string, std::string>> ranked_fixture(
    const std::vector<std::size_t>& ranks) {
  std::map<std::string, std::vector<std::string>> results;
  std::map<std::string, std::string> truth;
  for (std::size_t q = 0; q < ranks.size(); ++q) {
    const std::string id = "q" + std::to_string(q);
    std::vector<std::string> list;
    for (std::size_t r = 1; r <= 100; ++r) list.push_back(r == ranks[q] ? "target" : "other" + std::to_string(r));
    results[id] = list;
    truth[id] = "target";
  }
  return {results, truth};
}

TEST(RecallAtK, RanksOneFiveTwelveSixty) {
  const auto [results, truth] = ranked_fixture({1, 5, 12, 60});
  EXPECT_DOUBLE_EQ(recall_at_k(results, truth, 10), 50.0);
  EXPECT_DOUBLE_EQ(recall_at_k(results, truth, 50), 75.0);
  EXPECT_DOUBLE_EQ(recall_at_k(results, truth, 1), 25.0);
  EXPECT_DOUBLE_EQ(recall_at_k(results, truth, 60), 100.0);
}

TEST(RecallAtK, PerfectRetrievalIsHundredForAnyK) {
  const auto [results, truth] = ranked_fixture({1, 1, 1});
  for (std::size_t k : {1u, 2u, 10u, 50u, 100u}) EXPECT_DOUBLE_EQ(recall_at_k(results, truth, k), 100.0);
}

TEST(RecallAtK, MonotoneInKAndFullAtPoolSize) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> rank(1, 100);
  std::vector<std::size_t> ranks(40);
  for (auto& r : ranks) r = rank(rng);
  const auto [results, truth] = ranked_fixture(ranks);
  double previous = 0.0;
  for (std::size_t k = 1; k <= 100; ++k) {
    const double r = recall_at_k(results, truth, k);
    EXPECT_GE(r, previous);
    previous = r;
  }
  EXPECT_DOUBLE_EQ(previous, 100.0);
}

TEST(RecallAtK, MissingGroundTruthIsAnError) {
  auto [results, truth] = ranked_fixture({1, 2});
  truth.erase("q1");
  EXPECT_THROW(recall_at_k(results, truth, 10), DataError);
  EXPECT_THROW(recall_at_k({}, truth, 10), ContractViolation);
}

TEST(RecallAtK, RandomScorerMatchesTheUniformExpectation) {
  // A fixed 200-candidate index, fresh random queries and a uniformly drawn target:
  // E[R@10] = 100 * 10 / 200 = 5, sd of the mean = 100 * sqrt(p (1 - p) / trials).
  constexpr int kTrials = 10000;
  constexpr double p = 10.0 / 200.0;
  std::mt19937_64 rng(12);
  const auto index = random_index(200, 1, 8, rng);
  std::uniform_int_distribution<std::size_t> pick(0, 199);
  std::map<std::string, std::vector<std::string>> results;
  std::map<std::string, std::string> truth;
  for (int t = 0; t < kTrials; ++t) {
    const auto top = retrieve(gaussian(1, 8, rng), index, 10);
    const std::string id = "trial" + std::to_string(t);
    for (const auto& s : top) results[id].push_back(s.id);
    truth[id] = index.candidate_ids[pick(rng)];
  }
  const double sigma = 100.0 * std::sqrt(p * (1.0 - p) / kTrials);
  EXPECT_NEAR(recall_at_k(results, truth, 10), 5.0, 3.0 * sigma);
}

// ---------------------------------------------------------------- evaluate

struct EvalFixture {
  std::filesystem::path dir;
  std::vector<data::ImageRecord> images;
  std::vector<data::CirTriplet> triplets;
};

// Three categories, 12 gallery images each, 5 queries per category.
EvalFixture three_categories() {
  EvalFixture f;
  f.dir = scratch_dir("eval_three");
  std::mt19937_64 rng(13);
  for (const std::string category : {"dress", "shirt", "toptee"}) {
    for (int i = 0; i < 12; ++i) {
      data::ImageRecord r;
      r.id = fmt::format("{}_{:02d}", category, i);
      r.path = f.dir / (r.id + ".png");
      r.category = category;
      r.item_group = r.id;
      save_image(r.path, testing::random_image(4, rng));
      f.images.push_back(r);
    }
    for (int q = 0; q < 5; ++q) {
      data::CirTriplet t;
      t.id = fmt::format("{}_q{}", category, q);
      t.category = category;
      t.reference_id = fmt::format("{}_{:02d}", category, q);
      t.target_id = fmt::format("{}_{:02d}", category, 11 - q);
      t.modification_text = q % 2 ? "make it darker with long sleeves" : "shorter and red";
      f.triplets.push_back(t);
    }
  }
  return f;
}

TEST(Evaluate, AverageIsTheMeanOfSixRecallValuesAndRecallsMatchARecount) {
  const auto f = three_categories();
  const auto model = CirModel::create(testing::toy_config(), 3);
  const auto report = evaluate(f.images, f.triplets, model, {});
  ASSERT_EQ(report.per_category.size(), 3u);
  EXPECT_EQ(report.triplet_count, 15u);

  double sum = 0.0;
  for (const auto& c : report.per_category) {
    EXPECT_EQ(c.gallery_size, 12u);
    sum += c.recall_at_10 + c.recall_at_50;
    // Recount through the pairwise score path: rank = 1 + #candidates ranked strictly ahead.
    std::size_t hits = 0, queries = 0;
    for (const auto& t : f.triplets) {
      if (t.category != c.category) continue;
      ++queries;
      const auto load = [&](const std::string& id) {
        return load_image(f.dir / (id + ".png"));
      };
      const Image reference = load(t.reference_id);
      const double target_score = model.score(reference, t.modification_text, load(t.target_id)).item();
      std::size_t rank = 1;
      for (const auto& r : f.images) {
        if (r.category != c.category || r.id == t.target_id) continue;
        const double s = model.score(reference, t.modification_text, load(r.id)).item();
        if (s > target_score + 1e-12 || (std::abs(s - target_score) <= 1e-12 && r.id < t.target_id)) ++rank;
      }
      hits += rank <= 10 ? 1 : 0;
    }
    EXPECT_DOUBLE_EQ(c.recall_at_10, 100.0 * static_cast<double>(hits) / static_cast<double>(queries)) << c.category;
    EXPECT_DOUBLE_EQ(c.recall_at_50, 100.0);  // gallery of 12
  }
  EXPECT_NEAR(report.average, sum / 6.0, 1e-9);
  for (const auto& c : report.per_category) {
    EXPECT_GE(c.recall_at_10, 0.0);
    EXPECT_LE(c.recall_at_10, c.recall_at_50);
    EXPECT_LE(c.recall_at_50, 100.0);
  }
}

TEST(Evaluate, SingleSuccessfulTripletReportsHundred) {
  const auto dir = scratch_dir("eval_single");
  std::mt19937_64 rng(14);
  std::vector<data::ImageRecord> images;
  for (const auto& [id, category] : std::vector<std::pair<std::string, std::string>>{{"ref", "other"}, {"tgt", "dress"}}) {
    data::ImageRecord r;
    r.id = id;
    r.path = dir / (id + ".png");
    r.category = category;
    r.item_group = id;
    save_image(r.path, testing::random_image(4, rng));
    images.push_back(r);
  }
  data::CirTriplet t;
  t.id = "only";
  t.category = "dress";
  t.reference_id = "ref";
  t.target_id = "tgt";
  t.modification_text = "make it red";
  const auto report = evaluate(images, {t}, CirModel::create(testing::toy_config(), 1), {});
  ASSERT_EQ(report.per_category.size(), 1u);
  EXPECT_DOUBLE_EQ(report.per_category[0].recall_at_10, 100.0);
  EXPECT_DOUBLE_EQ(report.per_category[0].recall_at_50, 100.0);
  EXPECT_DOUBLE_EQ(report.average, 100.0);
}

TEST(Evaluate, EmptyCategoryIsExcludedNotZero) {
  const auto f = three_categories();
  EvalOptions options;
  options.categories = {"dress", "hat"};
  const auto report = evaluate(f.images, f.triplets, CirModel::create(testing::toy_config(), 3), options);
  ASSERT_EQ(report.per_category.size(), 1u);
  EXPECT_EQ(report.excluded_categories, std::vector<std::string>{"hat"});
  EXPECT_DOUBLE_EQ(report.average, (report.per_category[0].recall_at_10 + report.per_category[0].recall_at_50) / 2);
  EXPECT_NE(report.to_table().find("excluded"), std::string::npos);
}

TEST(Evaluate, TargetImageGalleryUsesOnlyTargets) {
  const auto f = three_categories();
  EvalOptions options;
  options.gallery = GalleryMode::target_images;
  const auto report = evaluate(f.images, f.triplets, CirModel::create(testing::toy_config(), 3), options);
  for (const auto& c : report.per_category) {
    EXPECT_EQ(c.gallery_size, 5u);
    EXPECT_DOUBLE_EQ(c.recall_at_10, 100.0);
  }
  EXPECT_EQ(report.to_json()["gallery"]["mode"], "target_images");
}

TEST(Evaluate, ReportsAreByteIdenticalAcrossRunsAndWorkers) {
  const auto f = three_categories();
  const auto model = CirModel::create(testing::toy_config(), 3);
  EvalOptions options;
  options.qualitative = 4;
  options.seed = 1;
  const auto a = evaluate(f.images, f.triplets, model, options);
  options.workers = 3;
  const auto b = evaluate(f.images, f.triplets, model, options);
  const auto da = scratch_dir("eval_det_a"), db = scratch_dir("eval_det_b");
  write_report(a, da);
  write_report(b, db);
  for (const char* file : {"report.json", "report.txt", "qualitative.jsonl"})
    EXPECT_EQ(read_text_file(da / file), read_text_file(db / file)) << file;
}

TEST(Evaluate, QualitativeDumpHasTopThreeAndTheTargetRank) {
  const auto f = three_categories();
  const auto model = CirModel::create(testing::toy_config(), 3);
  EvalOptions options;
  options.qualitative = 6;
  options.seed = 2;
  const auto report = evaluate(f.images, f.triplets, model, options);
  ASSERT_EQ(report.qualitative.size(), 6u);
  for (std::size_t i = 0; i < report.qualitative.size(); ++i) {
    const auto& q = report.qualitative[i];
    if (i > 0) EXPECT_LT(report.qualitative[i - 1].triplet_id, q.triplet_id);
    ASSERT_EQ(q.top.size(), 3u);
    EXPECT_GE(q.target_rank, 1u);
    EXPECT_LE(q.target_rank, 12u);
    if (q.target_rank <= 3) EXPECT_EQ(q.top[q.target_rank - 1].id, q.target_id);
  }
  options.seed = 3;
  const auto other = evaluate(f.images, f.triplets, model, options);
  std::vector<std::string> a, b;
  for (const auto& q : report.qualitative) a.push_back(q.triplet_id);
  for (const auto& q : other.qualitative) b.push_back(q.triplet_id);
  EXPECT_NE(a, b);
}

TEST(Evaluate, TableLayout) {
  const auto f = three_categories();
  const auto report = evaluate(f.images, f.triplets, CirModel::create(testing::toy_config(), 3), {});
  const auto table = report.to_table();
  for (const char* needle : {"dress", "shirt", "toptee", "R@10", "R@50", "Average"})
    EXPECT_NE(table.find(needle), std::string::npos) << needle;
  EXPECT_NE(table.find(fmt::format("{:.2f}", report.average)), std::string::npos);
}

// ---------------------------------------------------------------- quality protocol

std::vector<data::CirTriplet> manifest(const std::vector<std::pair<std::string, int>>& categories) {
  std::vector<data::CirTriplet> out;
  for (const auto& [category, count] : categories)
    for (int i = 0; i < count; ++i) {
      data::CirTriplet t;
      t.id = fmt::format("{}_{:05d}", category, i);
      t.category = category;
      t.reference_id = t.id + "_r";
      t.target_id = t.id + "_t";
      t.modification_text = "make it blue";
      out.push_back(t);
    }
  return out;
}

TEST(SampleQuality, EmitsExactly216StratifiedSheets) {
  const auto triplets = manifest({{"dress", 5000}, {"shirt", 3001}, {"toptee", 1999}});
  const auto sheets = sample_quality(triplets, 216, 42, "ann1");
  ASSERT_EQ(sheets.size(), 216u);

  std::map<std::string, std::size_t> counts;
  std::set<std::string> ids;
  for (const auto& s : sheets) {
    ++counts[s.category];
    ids.insert(s.triplet_id);
    EXPECT_EQ(s.annotator_id, "ann1");
    for (const auto& score : s.scores) EXPECT_FALSE(score.has_value());
  }
  EXPECT_EQ(ids.size(), 216u);
  for (const auto& [category, count] : std::map<std::string, double>{{"dress", 5000}, {"shirt", 3001}, {"toptee", 1999}})
    EXPECT_LE(std::abs(static_cast<double>(counts[category]) - 216.0 * count / 10000.0), 1.0) << category;
  EXPECT_TRUE(std::is_sorted(sheets.begin(), sheets.end(),
                             [](const auto& a, const auto& b) { return a.triplet_id < b.triplet_id; }));
}

TEST(SampleQuality, QuotasAreWithinOneOfExactProportions) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> size(1, 500);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::string, int>> sizes;
    for (int c = 0; c < 1 + trial % 5; ++c) sizes.emplace_back("c" + std::to_string(c), size(rng));
    const auto triplets = manifest(sizes);
    const std::size_t n = std::min<std::size_t>(216, triplets.size());
    std::size_t total = 0;
    for (const auto& [category, quota] : stratified_quotas(triplets, 216)) {
      const auto it = std::find_if(sizes.begin(), sizes.end(), [&](auto& s) { return s.first == category; });
      const double exact = static_cast<double>(n) * it->second / static_cast<double>(triplets.size());
      EXPECT_LT(std::abs(static_cast<double>(quota) - exact), 1.0);
      total += quota;
    }
    EXPECT_EQ(total, n);
  }
}

TEST(SampleQuality, FixedSeedIsReproducibleAndSeedMatters) {
  const auto triplets = manifest({{"dress", 400}, {"shirt", 300}});
  const auto a = sample_quality(triplets, 50, 7);
  const auto b = sample_quality(triplets, 50, 7);
  const auto c = sample_quality(triplets, 50, 8);
  std::vector<Json> ja, jb, jc;
  for (const auto& s : a) ja.push_back(s.to_json());
  for (const auto& s : b) jb.push_back(s.to_json());
  for (const auto& s : c) jc.push_back(s.to_json());
  EXPECT_EQ(ja, jb);
  EXPECT_NE(ja, jc);
}

TEST(SampleQuality, SmallDatasetIsSampledWhole) {
  const auto triplets = manifest({{"dress", 7}, {"shirt", 3}});
  EXPECT_EQ(sample_quality(triplets, 216, 1).size(), 10u);
}

QualitySheet scored(const std::string& id, int f, int d, int s) {
  QualitySheet sheet;
  sheet.triplet_id = id;
  sheet.annotator_id = "a";
  sheet.scores = {f, d, s};
  return sheet;
}

TEST(AggregateQuality, ConstantAndTwoPointFixtures) {
  const auto fives = aggregate_quality({scored("a", 5, 5, 5), scored("b", 5, 5, 5), scored("c", 5, 5, 5)});
  for (const auto& c : fives.criteria) EXPECT_EQ(format_mean_std(c), "5.00 ± 0.00");
  const auto two = aggregate_quality({scored("a", 3, 3, 3), scored("b", 5, 5, 5)});
  for (const auto& c : two.criteria) EXPECT_EQ(format_mean_std(c), "4.00 ± 1.00");
}

TEST(AggregateQuality, MatchesARecountOnThirtySheets) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> score(1, 5);
  std::vector<QualitySheet> sheets;
  std::array<std::vector<double>, 3> columns;
  for (int i = 0; i < 30; ++i) {
    auto sheet = scored(fmt::format("t{:02d}", i / 2), score(rng), score(rng), score(rng));
    sheet.annotator_id = i % 2 ? "x" : "y";
    for (int c = 0; c < 3; ++c) columns[static_cast<std::size_t>(c)].push_back(*sheet.scores[static_cast<std::size_t>(c)]);
    sheets.push_back(sheet);
  }
  const auto summary = aggregate_quality(sheets);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& v = columns[c];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 30.0;
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    EXPECT_NEAR(summary.criteria[c].mean, mean, 1e-9);
    EXPECT_NEAR(summary.criteria[c].stddev, std::sqrt(sq / 30.0), 1e-9);
    EXPECT_EQ(summary.criteria[c].count, 30u);
    EXPECT_EQ(format_mean_std(summary.criteria[c]), fmt::format("{:.2f} ± {:.2f}", mean, std::sqrt(sq / 30.0)));
  }
}

TEST(AggregateQuality, BadSheetsAreNamed) {
  auto missing = scored("t-missing", 4, 4, 4);
  missing.scores[1].reset();
  auto high = scored("t-high", 4, 6, 4);
  for (const auto& bad : {missing, high}) {
    try {
      aggregate_quality({scored("fine", 3, 3, 3), bad});
      FAIL() << bad.triplet_id;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(bad.triplet_id), std::string::npos) << e.what();
    }
  }
  Json fractional = scored("t-frac", 4, 4, 4).to_json();
  fractional["saliency"] = 4.5;
  try {
    QualitySheet::from_json(fractional);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("t-frac"), std::string::npos);
  }
}

TEST(QualitySheets, FileRoundTripAndLineNumbers) {
  const auto dir = scratch_dir("quality_sheets");
  std::vector<QualitySheet> sheets{scored("a", 1, 2, 3), scored("b", 5, 4, 3)};
  sheets[1].scores[2].reset();
  write_quality_sheets(dir / "sheets.jsonl", sheets);
  const auto back = read_quality_sheets(dir / "sheets.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].to_json(), sheets[0].to_json());
  EXPECT_EQ(back[1].to_json(), sheets[1].to_json());

  std::ofstream(dir / "sheets.jsonl", std::ios::app) << R"({"triplet_id": "c", "faithfulness": "high"})" << "\n";
  try {
    read_quality_sheets(dir / "sheets.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("sheets.jsonl:3"), std::string::npos) << e.what();
  }
}

TEST(QualityTable, RowsAndColumns) {
  const auto facap = aggregate_quality({scored("a", 4, 5, 4), scored("b", 5, 4, 4)});
  const auto fiq = aggregate_quality({scored("a", 3, 3, 3), scored("b", 5, 5, 5)});
  const auto table = format_quality_table({{"Fashion IQ", fiq}, {"Ours", facap}});
  for (const char* needle : {"Dataset", "Faithfulness", "Details", "Saliency", "Fashion IQ", "Ours", "4.00 ± 1.00",
                             "4.50 ± 0.50", "4.00 ± 0.00"})
    EXPECT_NE(table.find(needle), std::string::npos) << needle;
}

}  // namespace
}  // namespace cirlab::eval
