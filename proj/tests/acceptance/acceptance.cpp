// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgan_tsa/cli/run_config.hpp"
#include "hgan_tsa/eval/metrics.hpp"
#include "hgan_tsa/eval/sweep.hpp"
#include "hgan_tsa/eval/tree.hpp"
#include "hgan_tsa/gan/level.hpp"
#include "hgan_tsa/grid/case.hpp"
#include "hgan_tsa/grid/dataset.hpp"
#include "hgan_tsa/grid/dynamics.hpp"
#include "hgan_tsa/grid/equilibrium.hpp"
#include "hgan_tsa/grid/network.hpp"
#include "hgan_tsa/grid/noise.hpp"
#include "hgan_tsa/grid/stability.hpp"
#include "hgan_tsa/hgan/bundle.hpp"
#include "hgan_tsa/hgan/model.hpp"
#include "hgan_tsa/nn/dense.hpp"
#include "hgan_tsa/nn/grad_check.hpp"
#include "hgan_tsa/nn/gru.hpp"

using namespace hgan_tsa;
namespace fs = std::filesystem;
using nn::Matrix;

namespace {

const fs::path kData = HGAN_TSA_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, -scale, scale);
  return m;
}

// ---- 1. Gradient correctness ------------------------------------------------

struct Worst {
  double error = 0.0;
  std::string where;
  std::size_t checked = 0;

  void take(const nn::GradCheckReport& r, const std::string& fragment, std::uint64_t seed) {
    checked += r.checked;
    if (!(r.max_relative_error <= error)) {
      error = r.max_relative_error;
      where = fragment + "/" + r.worst_tensor + " seed " + std::to_string(seed);
    }
  }
};

void check_gru(std::uint64_t seed, Worst& w) {
  Rng rng = make_rng(seed, "gru");
  const Eigen::Index in = 2 + static_cast<Eigen::Index>(seed % 2), hidden = 3, batch = 2, steps = 3;
  auto p = nn::GruLayerParams::zeros(in, hidden);
  p.visit([&](std::string_view, Matrix& m) { m = random_matrix(m.rows(), m.cols(), rng, 0.8); });
  std::vector<Matrix> xs, weights;
  for (Eigen::Index t = 0; t < steps; ++t) {
    xs.push_back(random_matrix(in, batch, rng));
    weights.push_back(random_matrix(hidden, batch, rng));
  }
  Matrix h0 = random_matrix(hidden, batch, rng, 0.5);
  const auto loss = [&] {
    const auto hs = nn::gru_forward(p, xs, h0);
    double l = 0.0;
    for (std::size_t t = 0; t < hs.size(); ++t) l += hs[t].cwiseProduct(weights[t]).sum();
    return l;
  };
  nn::GruTape tape;
  nn::gru_forward(p, xs, h0, &tape);
  const auto g = nn::gru_backward(p, tape, weights);
  w.take(nn::grad_check(p, g.params, loss), "gru", seed);
  for (std::size_t t = 0; t < xs.size(); ++t) w.take(nn::grad_check_tensor(xs[t], g.inputs[t], loss), "gru.input", seed);
  w.take(nn::grad_check_tensor(h0, g.h0, loss), "gru.h0", seed);
}

void check_dense(std::uint64_t seed, Worst& w) {
  for (auto act : {nn::Activation::kIdentity, nn::Activation::kSigmoid, nn::Activation::kTanh, nn::Activation::kSoftmax}) {
    Rng rng = make_rng(seed, "dense", static_cast<std::uint64_t>(act));
    auto p = nn::DenseParams::glorot(4, 3, act, rng);
    p.bias = random_matrix(3, 1, rng);
    Matrix x = random_matrix(4, 3, rng);
    const Matrix wt = random_matrix(3, 3, rng);
    const auto loss = [&] { return nn::dense_forward(p, x).cwiseProduct(wt).sum(); };
    nn::DenseTape tape;
    nn::dense_forward(p, x, &tape);
    const auto g = nn::dense_backward(p, tape, wt);
    w.take(nn::grad_check(p, g.params, loss), std::string("dense.") + nn::to_string(act), seed);
    w.take(nn::grad_check_tensor(x, g.input, loss), std::string("dense.input.") + nn::to_string(act), seed);
  }
}

gan::LevelBatch random_batch(std::size_t k, Eigen::Index channels, Eigen::Index batch, Rng& rng) {
  gan::LevelBatch b;
  for (std::size_t t = 0; t < k; ++t) b.condition.push_back(random_matrix(channels, batch, rng));
  b.target_next = random_matrix(channels, batch, rng);
  b.labels = Matrix(1, batch);
  for (Eigen::Index i = 0; i < batch; ++i) b.labels(i) = static_cast<double>((i + static_cast<Eigen::Index>(k)) % 2);
  return b;
}

void check_generator(std::uint64_t seed, Worst& w) {
  Rng rng = make_rng(seed, "generator");
  const std::size_t k = 1 + seed % 3;
  auto level = gan::GanLevel::create(k, 2, 4, 2, rng);
  const auto batch = random_batch(k, 2, 3, rng);
  const auto mode = gan::GeneratorInput::kConditional;
  const auto step = gan::generator_gradients(level.generator, level.discriminator, batch.condition, batch, mode);
  const auto loss = [&] {
    const auto out = gan::generator_forward(level.generator, batch.condition);
    const Matrix d = gan::discriminator_forward(level.discriminator, gan::discriminator_input(batch.condition, out.x_hat, mode));
    return gan::generator_loss(d, out.x_hat, batch.target_next, out.p_stable, batch.labels).parts.total;
  };
  w.take(nn::grad_check(level.generator, step.gradients.params, loss), "generator", seed);
}

void check_discriminator(std::uint64_t seed, Worst& w) {
  Rng rng = make_rng(seed, "discriminator");
  const std::size_t k = 1 + seed % 3;
  auto d = gan::DiscriminatorNet::create(2, 4, 2, rng);
  const auto batch = random_batch(k, 2, 3, rng);
  const Matrix fake = random_matrix(2, 3, rng);
  const auto mode = gan::GeneratorInput::kConditional;
  const auto real_seq = gan::discriminator_input(batch.condition, batch.target_next, mode);
  const auto fake_seq = gan::discriminator_input(batch.condition, fake, mode);
  const auto loss = [&] {
    return gan::discriminator_loss(gan::discriminator_forward(d, real_seq), gan::discriminator_forward(d, fake_seq)).value;
  };
  gan::DiscriminatorCache rc, fc;
  const auto dl = gan::discriminator_loss(gan::discriminator_forward(d, real_seq, &rc),
                                          gan::discriminator_forward(d, fake_seq, &fc));
  auto grads = gan::discriminator_backward(d, rc, dl.grad_real).params;
  nn::accumulate(grads, gan::discriminator_backward(d, fc, dl.grad_fake).params);
  w.take(nn::grad_check(d, grads, loss), "discriminator", seed);
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Worst w;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    check_gru(seed, w);
    check_dense(seed, w);
    check_generator(seed, w);
    check_discriminator(seed, w);
  }
  const double secs = seconds_since(t0);
  return {w.error <= 1e-4 && secs < 60.0,
          fmt("100 seeds, %zu entries, worst relative error %.2e at %s, %.1f s", w.checked, w.error, w.where.c_str(),
              secs)};
}

// ---- 2. Simulator vs equal-area oracle ---------------------------------------

Outcome criterion_equal_area() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = grid::load_case(kData / "smib.json");
  const auto op = grid::initialize_operating_point(c, 1.0);
  const auto& gen = op.machines[0];
  const auto& inf = op.machines[1];
  double reactance = 0.0;
  for (const auto& m : op.machines) reactance += m.transient_reactance;
  for (const auto& b : c.branches) reactance += b.x;
  const double pmax = gen.internal_emf_magnitude * inf.internal_emf_magnitude / reactance;
  const double pm = gen.mechanical_power;
  const double d0 = std::asin(pm / pmax);
  const double dmax = std::numbers::pi - d0;
  const double dcr = std::acos((pm / pmax) * (dmax - d0) + std::cos(dmax));
  const double inertia = 2.0 * gen.inertia_constant / (2.0 * std::numbers::pi * c.nominal_frequency);
  const double t_cr = std::sqrt(2.0 * inertia * (dcr - d0) / pm);

  const auto fault = grid::FaultElement::at_bus(0);
  const auto net = grid::build_network(op.branch_y, op.load_admittances, c.branches, op.machines, fault);
  int disagreements = 0;
  for (int k = 0; k < 20; ++k) {
    double ratio = 0.4 + 1.2 * k / 19.0;
    if (std::abs(ratio - 1.0) < 0.03) ratio = ratio < 1.0 ? 0.97 : 1.03;
    const auto spec = c.scenario(1.0, fault, ratio * t_cr * c.nominal_frequency);
    const auto s = grid::integrate_transient(spec, op.machines, net, op.initial_angles);
    if (s.label != (ratio < 1.0 ? 1 : 0)) ++disagreements;
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && secs < 10.0,
          fmt("critical clearing %.4f s, %d of 20 clearing times disagree, %.2f s", t_cr, disagreements, secs)};
}

// ---- 3. Stability index -------------------------------------------------------

Outcome criterion_index() {
  const double eta = grid::stability_index_from_spread(149.57);
  const double at0 = grid::stability_index_from_spread(0.0);
  const double at360 = grid::stability_index_from_spread(360.0);
  return {std::abs(eta - 0.4130) <= 1e-4 && at0 == 1.0 && at360 == 0.0,
          fmt("eta(149.57 deg) = %.6f, eta(0) = %g, eta(360) = %g", eta, at0, at360)};
}

// ---- 4. Loss bookkeeping --------------------------------------------------------

Outcome criterion_losses() {
  const double ln2 = std::log(2.0);
  const double bce_err = std::max(std::abs(nn::bce_loss(0.5, 1.0).value - ln2), std::abs(nn::bce_loss(0.5, 0.0).value - ln2));
  Rng rng = make_rng(4, "losses");
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index channels = 1 + static_cast<Eigen::Index>(i % 5);
    const double d = uniform(rng, 0.001, 0.999);
    const double p = uniform(rng, 0.001, 0.999);
    const double y = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    const Matrix xh = random_matrix(channels, 1, rng), xt = random_matrix(channels, 1, rng);
    double se = 0.0;
    for (Eigen::Index c = 0; c < channels; ++c) se += (xh(c) - xt(c)) * (xh(c) - xt(c));
    se /= static_cast<double>(channels);
    const double adv = std::log(1.0 - d);
    const double ce = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    const auto l = gan::generator_loss(d, xh, xt, p, y);
    worst = std::max({worst, std::abs(l.adversarial - adv), std::abs(l.squared_error - se),
                      std::abs(l.cross_entropy - ce), std::abs(l.total - (adv + se + ce))});
  }
  return {bce_err <= 1e-12 && worst <= 1e-10,
          fmt("|bce(0.5) - ln 2| = %.1e, worst component deviation over 1000 inputs %.1e", bce_err, worst)};
}

// ---- 5-7, 9a. Desk-scale training ------------------------------------------------

struct DeskRun {
  grid::Dataset dataset;
  hgan::HganModel model;
  hgan::LevelLosses initial, trained;
  std::vector<std::vector<std::uint8_t>> checkpoint_bytes;  // level k bytes when level k finished
  double generate_seconds = 0.0, train_seconds = 0.0;
};

DeskRun desk_run(const fs::path& workdir) {
  DeskRun run;
  const auto rc = cli::load_run_config(kData / "wscc9_desk.json");
  const auto ds_dir = workdir / "wscc9_dataset";
  auto t0 = std::chrono::steady_clock::now();
  if (fs::exists(ds_dir / "manifest.json")) {
    run.dataset = grid::load_dataset(ds_dir);
  } else {
    run.dataset = grid::generate_dataset(grid::load_case(rc.case_file));
    grid::save_dataset(run.dataset, ds_dir);
  }
  run.generate_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  run.model = hgan::init_model(run.dataset, rc.model, rc.seed.value_or(1));
  const auto train = hgan::training_sequences(run.dataset, run.model);
  run.initial = hgan::evaluate_level(hgan::initial_level(run.model, 1), {}, train);
  hgan::TrainHooks hooks;
  hooks.on_level_complete = [&](const hgan::HganModel& m, std::size_t k) {
    run.checkpoint_bytes.push_back(nn::serialize_parameters(m.levels[k - 1]));
    if (k == 1) run.trained = hgan::evaluate_level(m.levels[0], {}, train);
    std::cerr << "  level " << k << " trained (" << m.summaries[k - 1].episodes << " episodes, "
              << seconds_since(t0) << " s)\n";
  };
  hgan::train_remaining_levels(run.model, train, hooks);
  run.train_seconds = seconds_since(t0);
  hgan::save_bundle(run.model, workdir / "wscc9_model");
  return run;
}

Outcome criterion_level1_training(const DeskRun& r) {
  const auto train_counts = r.dataset.label_counts(grid::Split::kTrain);
  const auto test_counts = r.dataset.label_counts(grid::Split::kTest);
  const bool shape_ok = r.dataset.machine_count == 3 && train_counts[0] + train_counts[1] >= 400 &&
                        test_counts[0] + test_counts[1] >= 100 && train_counts[0] == train_counts[1] &&
                        test_counts[0] == test_counts[1];
  const double se_ratio = r.trained.squared_error / r.initial.squared_error;
  const double ce_ratio = r.trained.cross_entropy / r.initial.cross_entropy;
  const double minutes = (r.generate_seconds + r.train_seconds) / 60.0;
  return {shape_ok && se_ratio <= 0.10 && ce_ratio <= 0.70 && minutes < 15.0,
          fmt("%zu/%zu train, %zu/%zu test; squared error %.5f -> %.5f (%.1f%%), cross-entropy %.4f -> %.4f "
              "(-%.1f%%); %.1f min",
              train_counts[1], train_counts[0], test_counts[1], test_counts[0], r.initial.squared_error,
              r.trained.squared_error, 100.0 * se_ratio, r.initial.cross_entropy, r.trained.cross_entropy,
              100.0 * (1.0 - ce_ratio), minutes)};
}

Outcome criterion_ensemble(const DeskRun& r, const eval::EvaluationResult& ev) {
  const double l1 = ev.per_level.at(0).accuracy();
  const double ens = ev.ensemble.accuracy();
  std::string levels;
  for (const auto& c : ev.per_level) levels += fmt("%s%.3f", levels.empty() ? "" : "/", c.accuracy());
  return {r.model.config.levels == 3 && ens >= l1 && ens >= 0.85,
          fmt("test accuracy per level %s, ensemble %.3f on %zu samples", levels.c_str(), ens, ev.samples)};
}

Outcome criterion_determinism(const DeskRun& r, const fs::path& workdir) {
  bool frozen = r.checkpoint_bytes.size() == r.model.trained_levels();
  for (std::size_t k = 0; frozen && k < r.checkpoint_bytes.size(); ++k)
    frozen = nn::serialize_parameters(r.model.levels[k]) == r.checkpoint_bytes[k];

  // Two full retrains with a shortened schedule and the same root seed.
  auto cfg = r.model.config;
  cfg.episodes = 300;
  const auto a = workdir / "determinism_a", b = workdir / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  hgan::save_bundle(hgan::train_hgan(r.dataset, cfg, r.model.seed), a);
  hgan::save_bundle(hgan::train_hgan(r.dataset, cfg, r.model.seed), b);
  std::size_t files = 0, identical = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    const auto other = b / e.path().filename();
    if (fs::exists(other) && read_file_bytes(e.path()) == read_file_bytes(other)) ++identical;
  }
  return {frozen && files > 0 && identical == files,
          fmt("%zu of %zu bundle files byte-identical across retrains; lower-level checkpoints %s", identical, files,
              frozen ? "unchanged" : "CHANGED")};
}

// ---- 8. Ensemble rule ---------------------------------------------------------------

Outcome criterion_vote() {
  std::size_t checked = 0, wrong = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> votes;
      std::vector<double> probs;
      std::size_t stable = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const int v = (mask >> i) & 1u;
        votes.push_back(v);
        probs.push_back(v ? 0.75 : 0.5);  // 0.5 itself must vote unstable
        stable += static_cast<std::size_t>(v);
      }
      const int expected = 2 * stable > n ? 1 : 0;
      if (hgan::majority_vote(votes) != expected) ++wrong;
      if (hgan::decide(probs, hgan::EnsemblePolicy::kMajority, 0.5).label != expected) ++wrong;
      ++checked;
    }
  }
  return {wrong == 0, fmt("%zu vote vectors for N = 1..5, %zu mismatches", checked, wrong)};
}

// ---- 9. Noise harness ----------------------------------------------------------------

Outcome criterion_noise(const DeskRun& r, const eval::EvaluationResult& clean) {
  const auto sweep = eval::noise_sweep(r.model, r.dataset, grid::Split::kTest, {grid::kNoNoise}, {1, 2, 3});
  const auto& pt = sweep.points.at(0);
  bool identical = pt.error.empty() && pt.ensemble.mean == clean.ensemble.accuracy() &&
                   pt.ensemble.min == pt.ensemble.max;
  for (std::size_t k = 0; identical && k < pt.per_level.size(); ++k)
    identical = pt.per_level[k].mean == clean.per_level[k].accuracy();
  const auto rerun = eval::evaluate(r.model, r.dataset, grid::Split::kTest, {grid::kNoNoise, 7});
  identical = identical && rerun.ensemble == clean.ensemble && rerun.per_level == clean.per_level;

  double worst_db = 0.0;
  Eigen::MatrixXd signal(100000, 1);
  for (Eigen::Index i = 0; i < signal.rows(); ++i) signal(i, 0) = 1.0 + 0.05 * std::sin(0.01 * static_cast<double>(i));
  for (double snr : {30.0, 50.0, 80.0}) {
    const auto noisy = grid::inject_noise(signal, snr, derive_seed(9, "snr", static_cast<std::uint64_t>(snr)));
    const double ps = signal.squaredNorm(), pn = (noisy - signal).squaredNorm();
    worst_db = std::max(worst_db, std::abs(10.0 * std::log10(ps / pn) - snr));
  }
  return {identical && worst_db <= 0.5,
          fmt("infinite-SNR point %s clean evaluation; empirical SNR within %.3f dB over 1e5 draws",
              identical ? "matches" : "DIFFERS from", worst_db)};
}

// ---- 10. Decision tree baseline ---------------------------------------------------------

Outcome criterion_tree() {
  Rng rng = make_rng(10, "tree");
  // Linearly separable set with a margin around 0.8 x0 - 0.6 x1 = 0.1.
  Eigen::MatrixXd x(200, 2);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < x.rows();) {
    const double a = uniform(rng, -1, 1), b = uniform(rng, -1, 1);
    const double s = 0.8 * a - 0.6 * b - 0.1;
    if (std::abs(s) < 0.05) continue;
    x(i, 0) = a;
    x(i, 1) = b;
    y.push_back(s > 0 ? 1 : 0);
    ++i;
  }
  const double separable = eval::tree_accuracy(eval::train_tree(x, y, {20, 1}), x, y);

  std::size_t below = 0;
  double margin = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd rx(100, 3);
    std::vector<int> ry;
    for (Eigen::Index i = 0; i < 100; ++i) {
      for (Eigen::Index f = 0; f < 3; ++f) rx(i, f) = uniform01(rng);
      ry.push_back(uniform01(rng) < 0.5 ? 1 : 0);
    }
    double stump = 0.0;
    const double pos = static_cast<double>(std::count(ry.begin(), ry.end(), 1));
    stump = std::max(pos, 100.0 - pos) / 100.0;
    for (Eigen::Index f = 0; f < 3; ++f)
      for (Eigen::Index t = 0; t < 100; ++t) {
        double agree = 0;
        for (Eigen::Index i = 0; i < 100; ++i) agree += ((rx(i, f) <= rx(t, f)) == (ry[static_cast<std::size_t>(i)] == 1));
        stump = std::max({stump, agree / 100.0, 1.0 - agree / 100.0});
      }
    const double acc = eval::tree_accuracy(eval::train_tree(rx, ry, {4, 2}), rx, ry);
    margin = std::min(margin, acc - stump);
    if (acc < stump) ++below;
  }
  return {separable == 1.0 && below == 0,
          fmt("separable training accuracy %.3f; 20 random sets, %zu below the best stump (smallest margin %+.3f)",
              separable, below, margin)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string workdir = (fs::temp_directory_path() / "hgan_tsa_acceptance").string();
  app.add_option("--workdir", workdir, "Scratch directory for the desk dataset and models");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  std::vector<std::pair<std::string, Outcome>> results;
  const auto record = [&](const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << std::endl;
    results.emplace_back(name, o);
  };

  record("criterion 1 (gradient correctness)", criterion_gradients);
  record("criterion 2 (simulator vs equal-area oracle)", criterion_equal_area);
  record("criterion 3 (stability index formula)", criterion_index);
  record("criterion 4 (loss bookkeeping)", criterion_losses);

  std::optional<DeskRun> desk;
  std::optional<eval::EvaluationResult> clean;
  std::string desk_error;
  try {
    std::cerr << "desk-scale run in " << workdir << "\n";
    desk = desk_run(workdir);
    clean = eval::evaluate(desk->model, desk->dataset, grid::Split::kTest);
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  const auto needs_desk = [&](const std::function<Outcome()>& fn) {
    return [&, fn] { return desk ? fn() : Outcome{false, "desk-scale run failed: " + desk_error}; };
  };
  record("criterion 5 (desk-scale level-1 training)", needs_desk([&] { return criterion_level1_training(*desk); }));
  record("criterion 6 (ensemble dominance)", needs_desk([&] { return criterion_ensemble(*desk, *clean); }));
  record("criterion 7 (freeze and determinism)", needs_desk([&] { return criterion_determinism(*desk, workdir); }));
  record("criterion 8 (ensemble rule)", criterion_vote);
  record("criterion 9 (noise harness)", needs_desk([&] { return criterion_noise(*desk, *clean); }));
  record("criterion 10 (decision tree baseline)", criterion_tree);

  std::size_t failed = 0;
  for (const auto& [name, o] : results) failed += o.pass ? 0 : 1;
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
