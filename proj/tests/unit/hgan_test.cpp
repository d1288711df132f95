#include <cmath>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "hgan_tsa/hgan/bundle.hpp"
#include "hgan_tsa/hgan/config.hpp"
#include "hgan_tsa/hgan/data.hpp"
#include "hgan_tsa/hgan/model.hpp"

using namespace hgan_tsa;
using namespace hgan_tsa::hgan;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hgan_tsa_hgan_" + name);
  std::filesystem::remove_all(p);
  return p;
}

// Two-channel toy dataset: stable records decay slowly, unstable ones
// collapse. Rows 0 is pre-clearing, the measured sample is row 1.
grid::Dataset toy_dataset(std::size_t per_class = 12, std::size_t rows = 6) {
  grid::Dataset ds;
  ds.case_name = "toy";
  ds.pmu_bus_ids = {1, 2};
  ds.machine_count = 2;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    grid::TransientSample s;
    s.scenario_id = "toy-" + std::to_string(i);
    s.label = i % 2 == 0 ? 1 : 0;
    s.measured_index = 1;
    const double jitter = 0.01 * static_cast<double>(i % 5);
    const double slope = s.label == 1 ? 0.02 : 0.12;
    s.voltages.resize(static_cast<Eigen::Index>(rows), 2);
    for (std::size_t r = 0; r < rows; ++r) {
      const double t = static_cast<double>(r);
      s.voltages(static_cast<Eigen::Index>(r), 0) = 1.0 - slope * t - jitter;
      s.voltages(static_cast<Eigen::Index>(r), 1) = 0.9 - 0.5 * slope * t + jitter;
    }
    s.rotor_angles = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), 2);
    s.eta = s.label == 1 ? 50.0 : -50.0;
    ds.records.push_back(std::move(s));
    ds.split.push_back(i < 2 * per_class - 4 ? grid::Split::kTrain : grid::Split::kTest);
  }
  return ds;
}

HganConfig small_config(std::size_t levels = 2, std::size_t episodes = 30) {
  HganConfig c;
  c.levels = levels;
  c.episodes = episodes;
  c.hidden_units = 4;
  c.gru_layers = 1;
  c.batch_size = 8;
  c.lr_generator = 0.05;
  c.lr_discriminator = 0.01;
  c.convergence_window = 0;
  return c;
}

std::vector<std::uint8_t> level_bytes(const gan::GanLevel& l) { return nn::serialize_parameters(l); }

}  // namespace

TEST(Normalization, EndpointsAndRoundTrip) {
  Normalization n{{0.5, 2.0}, {1.5, 4.0}, 1};
  EXPECT_DOUBLE_EQ(n.normalize(0.5, 0), 0.0);
  EXPECT_DOUBLE_EQ(n.normalize(1.5, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.normalize(3.0, 1), 0.5);
  Matrix m(2, 3);
  m << 0.7, 1.1, 1.4, 2.2, 3.9, 2.0;
  const Matrix back = n.denormalize(n.normalize(m));
  EXPECT_LT((back - m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalization, ConstantChannelMapsToHalf) {
  Normalization n{{1.0, 0.0}, {1.0, 1.0}, 1};
  EXPECT_TRUE(n.constant(0));
  EXPECT_EQ(n.constant_channels(), std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(n.normalize(1.0, 0), 0.5);
  EXPECT_DOUBLE_EQ(n.normalize(7.0, 0), 0.5);
  EXPECT_DOUBLE_EQ(n.denormalize(0.5, 0), 1.0);
}

TEST(Normalization, ShapeMismatchThrows) {
  Normalization n{{0.0}, {1.0}, 1};
  EXPECT_THROW(n.normalize(Matrix::Zero(2, 1)), ShapeError);
}

TEST(Normalization, FitUsesTrainSplitAndWindow) {
  auto ds = toy_dataset();
  // Out-of-window rows and test records must not influence the fit.
  ds.records[0].voltages(5, 0) = -100.0;
  ds.records.back().voltages(2, 0) = 100.0;
  const auto n = fit_normalization(ds, 2);
  EXPECT_EQ(n.window, 3u);
  EXPECT_GT(n.min[0], 0.0);
  EXPECT_LT(n.max[0], 1.01);
  const auto seq = extract_sequences(ds, ds.indices(grid::Split::kTrain), n, 2);
  for (const auto& s : seq.steps) {
    EXPECT_GE(s.minCoeff(), -1e-12);
    EXPECT_LE(s.maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Normalization, JsonRoundTrip) {
  Normalization n{{0.1, 0.2}, {0.9, 1.2}, 4};
  const auto back = normalization_from_json(to_json(n));
  EXPECT_EQ(back.min, n.min);
  EXPECT_EQ(back.max, n.max);
  EXPECT_EQ(back.window, 4u);
}

TEST(Sequences, ShortRecordIsDataError) {
  auto ds = toy_dataset(12, 3);
  EXPECT_THROW(fit_normalization(ds, 3), DataError);
}

TEST(Config, DefaultsMatchReferenceValues) {
  const HganConfig c;
  EXPECT_EQ(c.levels, 3u);
  EXPECT_EQ(c.episodes, 20000u);
  EXPECT_DOUBLE_EQ(c.lr_generator, 1e-3);
  EXPECT_DOUBLE_EQ(c.lr_discriminator, 1e-4);
  EXPECT_EQ(c.gru_layers, 2u);
  EXPECT_EQ(c.hidden_units, 30u);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.policy, EnsemblePolicy::kMajority);
}

TEST(Config, JsonOverridesAndRejectsUnknownKeys) {
  const auto c = config_from_json(Json{{"levels", 4}, {"ensemble_policy", "average"}});
  EXPECT_EQ(c.levels, 4u);
  EXPECT_EQ(c.policy, EnsemblePolicy::kAverage);
  EXPECT_EQ(c.hidden_units, 30u);
  EXPECT_THROW(config_from_json(Json{{"level", 4}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"levels", 0}}), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"ensemble_policy", "vote"}}), ConfigError);
  const auto round = config_from_json(to_json(small_config()));
  EXPECT_EQ(to_json(round), to_json(small_config()));
}

TEST(Ensemble, MajorityExamples) {
  const std::vector<int> a{1, 1, 0}, b{1, 0}, c{1, 1, 0, 0}, d{1};
  EXPECT_EQ(majority_vote(a), 1);
  EXPECT_EQ(majority_vote(b), 0);
  EXPECT_EQ(majority_vote(c), 0);
  EXPECT_EQ(majority_vote(d), 1);
}

TEST(Ensemble, HalfProbabilitiesVoteUnstable) {
  const std::vector<double> p{0.5, 0.5, 0.5};
  EXPECT_EQ(decide(p, EnsemblePolicy::kMajority, 0.5).label, 0);
  EXPECT_EQ(decide(p, EnsemblePolicy::kAverage, 0.5).label, 0);
}

TEST(Ensemble, AveragePolicyCanDisagreeWithMajority) {
  const std::vector<double> p{0.95, 0.45, 0.45};
  const auto maj = decide(p, EnsemblePolicy::kMajority, 0.5);
  const auto avg = decide(p, EnsemblePolicy::kAverage, 0.5);
  EXPECT_EQ(maj.votes, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(maj.label, 0);
  EXPECT_NEAR(avg.mean_probability, 0.6166666666666667, 1e-12);
  EXPECT_EQ(avg.label, 1);
}

TEST(Rollout, DepthZeroReturnsInput) {
  Matrix x(2, 3);
  x.setRandom();
  const auto r = roll_forward(std::span<const gan::GanLevel>{}, x, 0);
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.steps[0], x);
  EXPECT_EQ(r.p_stable.rows(), 0);
}

TEST(Rollout, ZeroWeightLevelsGiveHalf) {
  std::vector<gan::GanLevel> levels;
  for (std::size_t k = 1; k <= 3; ++k) levels.push_back(gan::GanLevel::zeros(k, 2, 4, 1));
  const auto r = roll_forward(levels, Matrix::Constant(2, 2, 0.3), 3);
  EXPECT_LT((r.p_stable.array() - 0.5).abs().maxCoeff(), 1e-15);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_LT((r.steps[k].array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(Rollout, LevelKSeesFirstKSamples) {
  Rng rng = make_rng(3, "rollout");
  std::vector<gan::GanLevel> levels;
  for (std::size_t k = 1; k <= 3; ++k) levels.push_back(gan::GanLevel::create(k, 2, 4, 2, rng));
  Matrix x(2, 2);
  x << 0.2, 0.8, 0.6, 0.4;
  const auto r = roll_forward(levels, x, 3);
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto out = gan::generator_forward(levels[k - 1].generator, std::span<const Matrix>(r.steps.data(), k));
    EXPECT_EQ(out.x_hat, r.steps[k]);
    EXPECT_EQ(Matrix(out.p_stable), Matrix(r.p_stable.row(static_cast<Eigen::Index>(k - 1))));
  }
  EXPECT_THROW(roll_forward(levels, x, 4), RangeError);
}

TEST(Rollout, SingleSampleDepthChecks) {
  auto ds = toy_dataset();
  auto model = init_model(ds, small_config(2, 5), 1);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.5);
  EXPECT_EQ(roll_forward(x, model, 0).rows(), 1);
  EXPECT_THROW(roll_forward(x, model, 3), RangeError);
  EXPECT_THROW(roll_forward(x, model, 1), StateError);
  train_next_level(model, training_sequences(ds, model));
  EXPECT_EQ(roll_forward(x, model, 1).rows(), 2);
  EXPECT_THROW(roll_forward(Eigen::VectorXd::Zero(3), model, 1), ShapeError);
}

TEST(Assess, UntrainedModelIsStateError) {
  auto ds = toy_dataset();
  const auto model = init_model(ds, small_config(), 1);
  EXPECT_FALSE(model.ready());
  EXPECT_THROW(assess(model, Eigen::VectorXd::Constant(2, 0.5)), StateError);
  EXPECT_THROW(assess_batch(model, Matrix::Constant(2, 1, 0.5)), StateError);
}

TEST(Training, SingleLevelBaseCase) {
  auto ds = toy_dataset();
  const auto model = train_hgan(ds, small_config(1, 20), 5);
  ASSERT_TRUE(model.ready());
  ASSERT_EQ(model.metrics.size(), 1u);
  EXPECT_EQ(model.metrics[0].size(), 20u);
  EXPECT_EQ(model.metrics[0].back().episode, 20u);
  const auto v = assess(model, Eigen::VectorXd::Constant(2, 0.5));
  ASSERT_EQ(v.per_level_probabilities.size(), 1u);
  EXPECT_EQ(v.final_label, v.per_level_votes[0]);
  EXPECT_EQ(v.predicted_sequence.rows(), 2);
  EXPECT_GE(v.elapsed_seconds, 0.0);
}

TEST(Training, LowerLevelsStayFrozen) {
  auto ds = toy_dataset();
  auto model = init_model(ds, small_config(3, 15), 2);
  const auto train = training_sequences(ds, model);
  train_next_level(model, train);
  const auto level1 = level_bytes(model.levels[0]);
  train_next_level(model, train);
  const auto level2 = level_bytes(model.levels[1]);
  train_next_level(model, train);
  EXPECT_EQ(level_bytes(model.levels[0]), level1);
  EXPECT_EQ(level_bytes(model.levels[1]), level2);
  EXPECT_THROW(train_next_level(model, train), StateError);
}

TEST(Training, BatchAssessmentMatchesSingle) {
  auto ds = toy_dataset();
  const auto model = train_hgan(ds, small_config(3, 10), 4);
  const auto test = extract_sequences(ds, ds.indices(grid::Split::kTest), model.normalization, 0);
  const auto batch = assess_batch(model, test.steps[0]);
  for (Eigen::Index b = 0; b < test.steps[0].cols(); ++b) {
    const auto v = assess(model, test.steps[0].col(b));
    EXPECT_EQ(v.final_label, batch.labels[static_cast<std::size_t>(b)]);
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_DOUBLE_EQ(v.per_level_probabilities[k], batch.p_stable(static_cast<Eigen::Index>(k), b));
  }
}

TEST(Training, NonFiniteDataReportsDivergence) {
  auto ds = toy_dataset();
  auto model = init_model(ds, small_config(1, 5), 1);
  auto train = training_sequences(ds, model);
  train.steps[1].setConstant(std::numeric_limits<double>::quiet_NaN());
  try {
    train_next_level(model, train);
    FAIL() << "expected divergence";
  } catch (const gan::DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("level 1"), std::string::npos);
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(Training, ConvergenceCriterion) {
  std::vector<gan::StepMetrics> flat(10), falling(10);
  for (std::size_t i = 0; i < 10; ++i) {
    flat[i].cross_entropy = 0.3;
    falling[i].cross_entropy = 1.0 - 0.05 * static_cast<double>(i);
  }
  EXPECT_TRUE(converged(flat, 5, 1e-4));
  EXPECT_FALSE(converged(falling, 5, 1e-4));
  EXPECT_FALSE(converged(flat, 6, 1e-4));
  EXPECT_FALSE(converged(flat, 0, 1e-4));

  auto ds = toy_dataset();
  auto cfg = small_config(1, 500);
  cfg.lr_generator = 0.0;
  cfg.lr_discriminator = 0.0;
  cfg.convergence_window = 20;
  const auto model = train_hgan(ds, cfg, 1);
  EXPECT_TRUE(model.summaries[0].converged);
  EXPECT_LT(model.summaries[0].episodes, 500u);
}

TEST(Training, EvaluateLevelMatchesInitialLevel) {
  auto ds = toy_dataset();
  auto model = init_model(ds, small_config(2, 10), 9);
  const auto train = training_sequences(ds, model);
  const auto init = initial_level(model, 1);
  const auto l = evaluate_level(init, {}, train);
  const auto out = gan::generator_forward(init.generator, std::span<const Matrix>(train.steps.data(), 1));
  EXPECT_DOUBLE_EQ(l.squared_error, nn::mse_loss(out.x_hat, train.steps[1]).value);
  EXPECT_DOUBLE_EQ(l.cross_entropy, nn::bce_loss(out.p_stable, train.labels).value);
  train_next_level(model, train);
  // Training starts from exactly this initialization.
  Rng r = make_rng(9, "init", 1);
  EXPECT_EQ(level_bytes(init), level_bytes(gan::GanLevel::create(1, 2, 4, 1, r)));
  EXPECT_THROW(evaluate_level(initial_level(model, 3), model.levels, train), StateError);
}

TEST(Bundle, RoundTripPreservesModel) {
  auto ds = toy_dataset();
  const auto model = train_hgan(ds, small_config(2, 8), 11);
  const auto dir = scratch_dir("roundtrip");
  save_bundle(model, dir);
  const auto back = load_bundle(dir);
  ASSERT_TRUE(back.ready());
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.pmu_bus_ids, model.pmu_bus_ids);
  EXPECT_EQ(to_json(back.config), to_json(model.config));
  EXPECT_EQ(back.normalization.min, model.normalization.min);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(level_bytes(back.levels[k]), level_bytes(model.levels[k]));
    ASSERT_EQ(back.metrics[k].size(), model.metrics[k].size());
    EXPECT_DOUBLE_EQ(back.metrics[k].back().cross_entropy, model.metrics[k].back().cross_entropy);
  }
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.4);
  EXPECT_EQ(assess(back, x).per_level_probabilities, assess(model, x).per_level_probabilities);
}

TEST(Bundle, SameSeedGivesIdenticalFiles) {
  auto ds = toy_dataset();
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b"), c = scratch_dir("det_c");
  save_bundle(train_hgan(ds, small_config(2, 12), 21), a);
  save_bundle(train_hgan(ds, small_config(2, 12), 21), b);
  save_bundle(train_hgan(ds, small_config(2, 12), 22), c);
  for (const char* f : {"manifest.json", "level_1.bin", "level_2.bin", "metrics_level_1.jsonl"})
    EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << f;
  EXPECT_NE(read_file_bytes(a / "level_1.bin"), read_file_bytes(c / "level_1.bin"));
}

TEST(Bundle, ResumeMatchesUninterruptedTraining) {
  auto ds = toy_dataset();
  const auto cfg = small_config(3, 10);
  const auto full = train_hgan(ds, cfg, 31);

  auto partial = init_model(ds, cfg, 31);
  const auto train = training_sequences(ds, partial);
  train_next_level(partial, train);
  const auto dir = scratch_dir("resume");
  save_bundle(partial, dir);
  auto resumed = load_bundle(dir);
  EXPECT_FALSE(resumed.ready());
  EXPECT_EQ(resumed.trained_levels(), 1u);
  train_remaining_levels(resumed, training_sequences(ds, resumed));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(level_bytes(resumed.levels[k]), level_bytes(full.levels[k]));
}

TEST(Bundle, RejectsWrongVersionAndMissingManifest) {
  auto ds = toy_dataset();
  const auto dir = scratch_dir("version");
  save_bundle(train_hgan(ds, small_config(1, 3), 1), dir);
  auto j = parse_json_file(dir / "manifest.json");
  j["version"] = 99;
  write_file_text(dir / "manifest.json", j.dump());
  EXPECT_THROW(load_bundle(dir), IoError);
  EXPECT_THROW(load_bundle(scratch_dir("empty")), IoError);
}

TEST(Bundle, MetricsLogParseErrorNamesLine) {
  const std::string text = "{\"episode\":1,\"cross_entropy\":0.5,\"squared_error\":0.1,\"adversarial\":0.0,"
                           "\"generator_loss\":0.6,\"discriminator_loss\":1.3,\"d_real\":0.5,\"d_fake\":0.5}\n"
                           "{not json\n";
  try {
    parse_metrics_log(text, "m.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_EQ(parse_metrics_log(text.substr(0, text.find('\n') + 1), "m.jsonl").size(), 1u);
}
