#include "cirlab/error.hpp"
#include "cirlab/hashing.hpp"
#include "cirlab/model/matching.hpp"
#include "cirlab/synthetic.hpp"
#include "cirlab/training/dataset.hpp"
#include "cirlab/training/losses.hpp"
#include "cirlab/training/optimizer.hpp"
#include "cirlab/training/trainer.hpp"
#include "finite_difference.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

namespace cirlab {
namespace {

using ad::Matrix;
using model::CirModel;
using training::contrastive_loss;

// Direct evaluation of -(1/n) sum_i log(exp(s_ii) / sum_j exp(s_ij)) with no stabilisation,
// valid for the small magnitudes used below.
double naive_contrastive(const Matrix& s) {
  double total = 0.0;
  for (ad::Index i = 0; i < s.rows(); ++i) {
    double denom = 0.0;
    for (ad::Index j = 0; j < s.cols(); ++j) denom += std::exp(s(i, j));
    total -= std::log(std::exp(s(i, i)) / denom);
  }
  return total / static_cast<double>(s.rows());
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> d(0.0, stddev);
  Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// ---- contrastive_loss ------------------------------------------------------------

TEST(ContrastiveLoss, ConstantMatrixGivesLogN) {
  EXPECT_NEAR(contrastive_loss(Matrix::Constant(4, 4, 0.7)), 1.3862943611198906, 1e-9);
  for (int n = 2; n <= 9; ++n)
    EXPECT_NEAR(contrastive_loss(Matrix::Constant(n, n, -3.25)), std::log(static_cast<double>(n)), 1e-9);
}

TEST(ContrastiveLoss, SaturatedPositivesVanish) {
  Matrix s = Matrix::Constant(8, 8, -20.0);
  s.diagonal().setConstant(20.0);
  EXPECT_LT(contrastive_loss(s), 1e-6);
  EXPECT_GE(contrastive_loss(s), 0.0);
}

TEST(ContrastiveLoss, MatchesScratchSoftmaxCrossEntropy) {
  Matrix s(3, 3);
  s << 2, 0.5, -1, 0.3, 1.5, 0.2, -0.7, 0.9, 0.4;
  EXPECT_NEAR(contrastive_loss(s), 0.59573828692664688, 1e-9);
  Matrix s2(3, 3);
  s2 << 10, -3, 4, 1, 1, 1, -2, 5, 0;
  EXPECT_NEAR(contrastive_loss(s2), 2.0362369819794117, 1e-9);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix r = random_matrix(5, 5, rng, 2.0);
    EXPECT_NEAR(contrastive_loss(r), naive_contrastive(r), 1e-9);
  }
}

TEST(ContrastiveLoss, RowShiftInvariantAndNonNegative) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = random_matrix(6, 6, rng, 3.0);
    Matrix shifted = s;
    for (ad::Index r = 0; r < s.rows(); ++r) shifted.row(r).array() += shift(rng);
    EXPECT_NEAR(contrastive_loss(shifted), contrastive_loss(s), 1e-9);
    EXPECT_GE(contrastive_loss(s), 0.0);
  }
}

TEST(ContrastiveLoss, StableForLargeScores) {
  Matrix s(2, 2);
  s << 1000, 0, 0, 1000;
  EXPECT_TRUE(std::isfinite(contrastive_loss(s)));
  EXPECT_NEAR(contrastive_loss(s), 0.0, 1e-12);
}

TEST(ContrastiveLoss, RejectsDegenerateInput) {
  EXPECT_THROW(contrastive_loss(Matrix::Zero(1, 1)), ContractViolation);
  EXPECT_THROW(contrastive_loss(Matrix::Zero(2, 3)), ContractViolation);
  Matrix s = Matrix::Zero(3, 3);
  s(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(contrastive_loss(s), ContractViolation);
  s(1, 2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(contrastive_loss(s), ContractViolation);
  EXPECT_THROW(contrastive_loss(Matrix::Zero(3, 3), 0.0), ContractViolation);
}

TEST(ContrastiveLoss, TemperatureDividesScores) {
  std::mt19937_64 rng(5);
  const Matrix s = random_matrix(4, 4, rng);
  EXPECT_NEAR(contrastive_loss(s, 0.5), contrastive_loss(Matrix(s * 2.0)), 1e-12);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (double tau : {1.0, 0.3}) {
    ad::Parameter s(random_matrix(4, 4, rng, 2.0));
    contrastive_loss(ad::Var(s), tau).backward();
    const Matrix numeric =
        testing::numeric_gradient(s.mutable_value(), [&] { return contrastive_loss(s.value(), tau); });
    EXPECT_LT(testing::relative_error(s.grad(), numeric), 1e-5);
  }
}

TEST(ContrastiveLoss, PlantedAlignmentClosedForm) {
  // Query i equals target i and every head of target i is orthogonal to the other target,
  // so the score matrix is diag(n_t, n_t) with zeros elsewhere.
  for (const auto& [n_t, expected] : std::map<int, double>{{3, 0.04858735157374202}, {12, 6.144193477725374e-06}}) {
    Matrix t1 = Matrix::Zero(n_t, 4);
    Matrix t2 = Matrix::Zero(n_t, 4);
    t1.col(0).setOnes();
    t1.col(1).setConstant(2.0);
    t2.col(2).setConstant(-1.0);
    t2.col(3).setConstant(0.5);
    const std::vector<ad::Var> q{ad::Var(t1), ad::Var(t2)};
    const std::vector<ad::Var> t{ad::Var(t1), ad::Var(t2)};
    const ad::Var scores = training::score_matrix(q, t);
    EXPECT_EQ(scores.value()(0, 0), n_t);
    EXPECT_EQ(scores.value()(0, 1), 0.0);
    EXPECT_NEAR(contrastive_loss(scores).item(), expected, 1e-12);
    EXPECT_NEAR(expected, -std::log(std::exp(n_t) / (std::exp(n_t) + 1.0)), 1e-15);
  }
}

// ---- batch losses ----------------------------------------------------------------

struct BatchFixture {
  std::vector<Image> images;
  training::TripletBatch batch;
};

BatchFixture make_batch(int n, std::mt19937_64& rng, bool same_target, bool captions) {
  BatchFixture f;
  f.images.reserve(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < 2 * n; ++i) f.images.push_back(testing::random_image(4, rng));
  for (int i = 0; i < n; ++i) {
    f.batch.reference_images.push_back(&f.images[static_cast<std::size_t>(i)]);
    f.batch.target_images.push_back(&f.images[same_target ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n + i)]);
    f.batch.modification_texts.push_back("text number " + std::to_string(i));
  }
  if (captions) {
    f.batch.target_captions.emplace();
    for (int i = 0; i < n; ++i) f.batch.target_captions->push_back("caption " + std::to_string(i) + " long sleeves");
  }
  return f;
}

TEST(CirLoss, IdenticalTargetsGiveLogN) {
  CirModel m = CirModel::create(testing::toy_config(), 8);
  std::mt19937_64 rng(7);
  auto f = make_batch(5, rng, true, false);
  EXPECT_NEAR(training::cir_loss(f.batch, m).item(), std::log(5.0), 1e-9);
}

TEST(CirLoss, MatchesManualComposition) {
  CirModel m = CirModel::create(testing::toy_config(), 8);
  std::mt19937_64 rng(8);
  auto f = make_batch(3, rng, false, false);
  Matrix s(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s(i, j) = m.score(*f.batch.reference_images[i], f.batch.modification_texts[i], *f.batch.target_images[j]).item();
  EXPECT_NEAR(training::cir_loss(f.batch, m).item(), naive_contrastive(s), 1e-12);
}

TEST(CtrLoss, IdenticalCaptionsGiveLogN) {
  CirModel m = CirModel::create(testing::toy_config(), 9);
  std::mt19937_64 rng(9);
  auto f = make_batch(4, rng, false, true);
  for (auto& c : *f.batch.target_captions) c = "the same caption";
  EXPECT_NEAR(training::ctr_loss(f.batch, m).item(), std::log(4.0), 1e-9);
}

TEST(CtrLoss, MatchesManualComposition) {
  CirModel m = CirModel::create(testing::toy_config(), 9);
  std::mt19937_64 rng(10);
  auto f = make_batch(3, rng, false, true);
  Matrix s(3, 3);
  for (int i = 0; i < 3; ++i) {
    const ad::Var q = m.query_embedding(*f.batch.reference_images[i], f.batch.modification_texts[i]);
    for (int j = 0; j < 3; ++j) {
      const ad::Var c = model::mix(m.encode_text((*f.batch.target_captions)[j]), *m.query_mixer());
      s(i, j) = model::multi_head_similarity(q, c).item();
    }
  }
  EXPECT_NEAR(training::ctr_loss(f.batch, m).item(), naive_contrastive(s), 1e-12);
}

TEST(CtrLoss, MissingCaptionsIsConfigErrorNeverZero) {
  CirModel m = CirModel::create(testing::toy_config(), 9);
  std::mt19937_64 rng(11);
  auto f = make_batch(3, rng, false, false);
  try {
    (void)training::ctr_loss(f.batch, m);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("does not contain image-caption pairs"), std::string::npos);
  }
}

TEST(TripletBatch, RejectsSingletonsAndRaggedLists) {
  CirModel m = CirModel::create(testing::toy_config(), 9);
  std::mt19937_64 rng(12);
  auto f = make_batch(1, rng, false, false);
  EXPECT_THROW(training::cir_loss(f.batch, m), ContractViolation);
  auto g = make_batch(3, rng, false, false);
  g.batch.modification_texts.pop_back();
  EXPECT_THROW(training::cir_loss(g.batch, m), ContractViolation);
}

// ---- optimizer -------------------------------------------------------------------

TEST(AdamW, FirstStepIsSignScaledPlusDecoupledDecay) {
  ad::Parameter p(Matrix::Constant(1, 2, 1.0));
  ad::sum(ad::scale(p, 0.5)).backward();
  training::AdamW opt({p}, {.weight_decay = 0.01});
  opt.step(0.1);
  // Bias-corrected moments equal g and g^2 after one step, so the Adam term is g/(|g|+eps).
  const double expected = 1.0 * (1.0 - 0.1 * 0.01) - 0.1 * (0.5 / (0.5 + 1e-8));
  EXPECT_NEAR(p.value()(0, 0), expected, 1e-15);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(LrSchedule, CosineDecaysFromBaseToZero) {
  using training::LrSchedule;
  EXPECT_DOUBLE_EQ(training::learning_rate_at(LrSchedule::cosine, 2.0, 0, 10), 2.0);
  EXPECT_NEAR(training::learning_rate_at(LrSchedule::cosine, 2.0, 5, 10), 1.0, 1e-15);
  EXPECT_NEAR(training::learning_rate_at(LrSchedule::cosine, 2.0, 10, 10), 0.0, 1e-15);
  EXPECT_EQ(training::learning_rate_at(LrSchedule::constant, 2.0, 7, 10), 2.0);
}

// ---- stage config ----------------------------------------------------------------

TEST(StageConfig, DefaultsSatisfyStageInvariants) {
  using training::Stage;
  const auto s1 = training::StageConfig::defaults(Stage::stage1_pretrain);
  EXPECT_TRUE(s1.use_ctr);
  EXPECT_EQ(s1.frozen_groups, (std::set<std::string>{"backbone"}));
  EXPECT_NO_THROW(s1.validate());
  const auto s2 = training::StageConfig::defaults(Stage::stage2_finetune);
  EXPECT_FALSE(s2.use_ctr);
  EXPECT_EQ(s2.frozen_groups, (std::set<std::string>{"adapters", "backbone"}));
  EXPECT_NO_THROW(s2.validate());
}

TEST(StageConfig, RejectsInconsistentFreezing) {
  using training::Stage;
  auto c = training::StageConfig::defaults(Stage::stage2_finetune);
  c.use_ctr = true;
  EXPECT_THROW(c.validate(), ConfigError);
  c = training::StageConfig::defaults(Stage::stage2_finetune);
  c.frozen_groups = {"backbone"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = training::StageConfig::defaults(Stage::stage1_pretrain);
  c.frozen_groups.insert("encoder");
  EXPECT_THROW(c.validate(), ConfigError);
  c = training::StageConfig::defaults(Stage::stage1_pretrain);
  c.frozen_groups.erase("backbone");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(StageConfig, JsonRoundTripAndStrictKeys) {
  using training::Stage;
  auto c = training::StageConfig::defaults(Stage::stage1_pretrain);
  c.learning_rate = 0.003;
  c.epochs = 7;
  const auto back = training::stage_config_from_json(training::to_json(c), Stage::stage1_pretrain, "stage1");
  EXPECT_EQ(training::to_json(back), training::to_json(c));
  Json bad = training::to_json(c);
  bad["learnig_rate"] = 0.1;
  try {
    (void)training::stage_config_from_json(bad, Stage::stage1_pretrain, "stage1");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("stage1.learnig_rate"), std::string::npos);
  }
}

// ---- train_stage -----------------------------------------------------------------

model::ModelConfig small_config() {
  auto c = testing::toy_config();
  c.backbone.image_size = 8;
  c.backbone.patch_size = 4;
  return c;
}

const std::filesystem::path& planted_root() {
  static const std::filesystem::path root = [] {
    auto dir = testing::scratch_dir("planted_training");
    synthetic::write_planted_dataset(dir, {.train_triplets = 12, .heldout_triplets = 4});
    return dir;
  }();
  return root;
}

std::map<std::string, std::string> digests(const CirModel& m, std::string_view group) {
  std::map<std::string, std::string> out;
  for (const auto& [name, p] : m.parameters(group))
    out[name] = sha256_hex(std::span<const double>(p.value().data(), static_cast<std::size_t>(p.value().size())));
  return out;
}

TEST(TrainStage, StageOneNeverTouchesTheBackbone) {
  auto ds = training::TripletDataset::load(planted_root() / "train", 8);
  CirModel m = CirModel::create(small_config(), 1);
  const auto backbone = digests(m, "backbone");
  const auto adapters = digests(m, "adapters");
  auto cfg = training::StageConfig::defaults(training::Stage::stage1_pretrain);
  cfg.batch_size = 4;
  cfg.epochs = 4;
  cfg.learning_rate = 1e-2;
  const auto result = training::train_stage(ds, cfg, m, {.max_steps = 10});
  EXPECT_EQ(result.log.size(), 10u);
  EXPECT_EQ(digests(m, "backbone"), backbone);
  EXPECT_NE(digests(m, "adapters"), adapters);
}

TEST(TrainStage, StageTwoFreezesBackboneAndAdapters) {
  auto ds = training::TripletDataset::load(planted_root() / "train", 8);
  CirModel m = CirModel::create(small_config(), 1);
  std::mt19937_64 rng(2);
  for (auto& named : m.parameters("adapters")) named.param.mutable_value() = random_matrix(
      static_cast<int>(named.param.rows()), static_cast<int>(named.param.cols()), rng, 0.1);
  const auto backbone = digests(m, "backbone");
  const auto adapters = digests(m, "adapters");
  const auto fusion = digests(m, "fusion");
  const auto mixer = digests(m, "mixer");
  auto cfg = training::StageConfig::defaults(training::Stage::stage2_finetune);
  cfg.batch_size = 4;
  cfg.epochs = 4;
  cfg.learning_rate = 1e-2;
  const auto result = training::train_stage(ds, cfg, m, {.max_steps = 10});
  EXPECT_EQ(result.log.size(), 10u);
  EXPECT_FALSE(result.log.front().loss_ctr.has_value());
  EXPECT_EQ(digests(m, "backbone"), backbone);
  EXPECT_EQ(digests(m, "adapters"), adapters);
  EXPECT_NE(digests(m, "fusion"), fusion);
  EXPECT_NE(digests(m, "mixer"), mixer);
  // Trainable flags are restored once the stage ends.
  EXPECT_TRUE(m.parameters("adapters").front().param.trainable());
}

TEST(TrainStage, RunDirectoryHoldsMetricsAndEpochCheckpoints) {
  auto ds = training::TripletDataset::load(planted_root() / "train", 8);
  CirModel m = CirModel::create(small_config(), 1);
  const auto run = testing::scratch_dir("train_rundir");
  auto cfg = training::StageConfig::defaults(training::Stage::stage1_pretrain);
  cfg.batch_size = 5;  // 12 = 5 + 5 + 2, so three batches per epoch
  cfg.epochs = 2;
  const auto result = training::train_stage(ds, cfg, m, {.run_dir = run});
  EXPECT_EQ(result.log.size(), 6u);
  const auto lines = read_jsonl(run / "metrics.jsonl");
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0]["step"], 1);
  EXPECT_TRUE(lines[0]["loss_ctr"].is_number());
  EXPECT_TRUE(lines[5].contains("lr"));
  EXPECT_TRUE(std::filesystem::exists(run / "checkpoints" / "epoch_001.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(run / "checkpoints" / "epoch_002.ckpt"));
}

TEST(TrainStage, SameSeedSameLog) {
  auto ds = training::TripletDataset::load(planted_root() / "train", 8);
  auto run_once = [&](std::uint64_t seed, const std::string& name) {
    CirModel m = CirModel::create(small_config(), 1);
    auto cfg = training::StageConfig::defaults(training::Stage::stage1_pretrain);
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = seed;
    const auto dir = testing::scratch_dir(name);
    training::train_stage(ds, cfg, m, {.run_dir = dir});
    return read_text_file(dir / "metrics.jsonl");
  };
  const std::string a = run_once(5, "det_a");
  EXPECT_EQ(a, run_once(5, "det_b"));
  EXPECT_NE(a, run_once(6, "det_c"));
}

TEST(TrainStage, CaptionLossNeedsCaptions) {
  const auto dir = testing::scratch_dir("no_captions");
  auto records = data::read_image_manifest(planted_root() / "train" / "images.jsonl");
  auto triplets = data::read_triplet_manifest(planted_root() / "train" / "triplets.jsonl");
  for (auto& t : triplets) t.target_caption.clear();
  training::TripletDataset ds(records, triplets, 8);
  CirModel m = CirModel::create(small_config(), 1);
  auto cfg = training::StageConfig::defaults(training::Stage::stage1_pretrain);
  EXPECT_THROW(training::train_stage(ds, cfg, m), ConfigError);
  cfg.use_ctr = false;
  EXPECT_NO_THROW(training::train_stage(ds, cfg, m, {.max_steps = 1}));
}

TEST(TrainStage, OverfitsATinyBatch) {
  const auto dir = testing::scratch_dir("overfit");
  synthetic::write_planted_dataset(dir, {.train_triplets = 4, .heldout_triplets = 1, .seed = 3});
  auto ds = training::TripletDataset::load(dir / "train", 8);
  CirModel m = CirModel::create(small_config(), 1);
  auto cfg = training::StageConfig::defaults(training::Stage::stage1_pretrain);
  cfg.use_ctr = false;
  cfg.batch_size = 4;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-2;
  const auto result = training::train_stage(ds, cfg, m);
  ASSERT_EQ(result.log.size(), 50u);
  // Smoothed over windows of 10 steps, the loss must fall window after window.
  std::vector<double> windows;
  for (std::size_t w = 0; w < 5; ++w) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 10; ++i) sum += result.log[w * 10 + i].loss_cir;
    windows.push_back(sum / 10.0);
  }
  for (std::size_t w = 1; w < windows.size(); ++w) EXPECT_LT(windows[w], windows[w - 1]) << "window " << w;
  EXPECT_LT(windows.back(), 0.5 * std::log(4.0));
}

TEST(TripletDataset, DanglingImageIdIsDataError) {
  auto records = data::read_image_manifest(planted_root() / "train" / "images.jsonl");
  auto triplets = data::read_triplet_manifest(planted_root() / "train" / "triplets.jsonl");
  triplets[3].target_id = "nope";
  EXPECT_THROW(training::TripletDataset(records, triplets, 8), DataError);
}

}  // namespace
}  // namespace cirlab
