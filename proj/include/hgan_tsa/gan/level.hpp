#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/random.hpp"
#include "hgan_tsa/gan/losses.hpp"
#include "hgan_tsa/gan/networks.hpp"
#include "hgan_tsa/nn/sgd.hpp"

namespace hgan_tsa::gan {

/// One hierarchy level. Level k conditions on k samples and predicts the next.
struct GanLevel {
  std::size_t index = 1;
  GeneratorNet generator;
  DiscriminatorNet discriminator;

  static GanLevel create(std::size_t index, Eigen::Index channels, Eigen::Index hidden, std::size_t layers, Rng& rng) {
    GanLevel l;
    l.index = index;
    l.generator = GeneratorNet::create(channels, hidden, layers, rng);
    l.discriminator = DiscriminatorNet::create(channels, hidden, layers, rng);
    return l;
  }

  static GanLevel zeros(std::size_t index, Eigen::Index channels, Eigen::Index hidden, std::size_t layers) {
    return {index, GeneratorNet::zeros(channels, hidden, layers), DiscriminatorNet::zeros(channels, hidden, layers)};
  }

  Eigen::Index channels() const { return generator.channels(); }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    detail::visit_prefixed("generator.", s.generator, f);
    detail::visit_prefixed("discriminator.", s.discriminator, f);
  }
};

/// Column-major batch: each matrix is channels x batch.
struct LevelBatch {
  std::vector<Matrix> condition;  // length = level index
  Matrix target_next;             // channels x batch
  Matrix labels;                  // 1 x batch, 1 = stable

  Eigen::Index size() const { return target_next.cols(); }
};

struct StepMetrics {
  std::size_t episode = 0;
  double cross_entropy = 0.0;
  double squared_error = 0.0;
  double adversarial = 0.0;
  double generator_loss = 0.0;
  double discriminator_loss = 0.0;
  double d_real = 0.0;  // batch mean before the discriminator update
  double d_fake = 0.0;
  double accuracy = 0.0;  // label-head accuracy on the batch at threshold 0.5
  bool discriminator_skipped = false;
  bool generator_skipped = false;
};

/// Non-finite loss during a step. Carries the metrics of the last finite step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, StepMetrics last_good)
      : Error(ErrorKind::kNumeric, what), last_good_(last_good) {}

  const StepMetrics& last_good() const noexcept { return last_good_; }

 private:
  StepMetrics last_good_;
};

enum class GeneratorInput {
  kConditional,  // hierarchy mode: condition sequence in, D sees condition + sample
  kNoise,        // classic GAN: one Gaussian noise step in, D sees the sample alone
};

struct StepOptions {
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-4;
  double clip_norm = 5.0;
  bool non_saturating = false;
  GeneratorInput input = GeneratorInput::kConditional;
  Rng* noise_rng = nullptr;  // required in noise mode
};

/// Sequence the discriminator scores: condition with `sample` appended, or
/// the sample alone in noise mode.
inline std::vector<Matrix> discriminator_input(const std::vector<Matrix>& condition, const Matrix& sample,
                                               GeneratorInput mode) {
  std::vector<Matrix> seq;
  if (mode == GeneratorInput::kConditional) seq = condition;
  seq.push_back(sample);
  return seq;
}

inline Matrix noise_batch(Eigen::Index channels, Eigen::Index batch, Rng& rng) {
  Matrix z(channels, batch);
  for (Eigen::Index c = 0; c < batch; ++c)
    for (Eigen::Index r = 0; r < channels; ++r) z(r, c) = standard_normal(rng);
  return z;
}

struct GeneratorStep {
  GeneratorLossBatch loss;
  GeneratorGradients gradients;
  GeneratorOutput output;
};

/// Generator objective and parameter gradients for `generator_input`, with the
/// adversarial path routed through `disc` (held fixed).
inline GeneratorStep generator_gradients(const GeneratorNet& gen, const DiscriminatorNet& disc,
                                         const std::vector<Matrix>& generator_input, const LevelBatch& batch,
                                         GeneratorInput mode, GeneratorLossTerms terms = {}) {
  GeneratorStep s;
  GeneratorCache gc;
  s.output = generator_forward(gen, generator_input, &gc);
  const auto seq = discriminator_input(batch.condition, s.output.x_hat, mode);
  DiscriminatorCache dc;
  const Matrix d_fake = discriminator_forward(disc, seq, &dc);
  s.loss = generator_loss(d_fake, s.output.x_hat, batch.target_next, s.output.p_stable, batch.labels, terms);
  Matrix d_x_hat = s.loss.grad_x_hat;
  if (terms.adversarial) {
    const auto dg = discriminator_backward(disc, dc, s.loss.grad_d_fake);
    d_x_hat += dg.sequence.back();
  }
  s.gradients = generator_backward(gen, gc, d_x_hat, s.loss.grad_p_stable);
  return s;
}

inline void validate_batch(const GanLevel& level, const LevelBatch& batch, GeneratorInput mode) {
  const auto c = level.channels();
  const auto b = batch.size();
  if (b == 0) throw ShapeError("level batch is empty");
  if (mode == GeneratorInput::kConditional && batch.condition.size() != level.index)
    throw ShapeError("level " + std::to_string(level.index) + " expects a condition of length " +
                     std::to_string(level.index) + ", got " + std::to_string(batch.condition.size()));
  for (const auto& m : batch.condition) nn::require_shape(m, c, b, "level batch condition");
  nn::require_shape(batch.target_next, c, b, "level batch target");
  nn::require_shape(batch.labels, 1, b, "level batch labels");
}

/// One discriminator update on (real, fake), then one generator update
/// through the freshly updated discriminator.
inline StepMetrics train_level_step(GanLevel& level, const LevelBatch& batch, const StepOptions& opt,
                                    const StepMetrics& last_good = {}) {
  validate_batch(level, batch, opt.input);
  std::vector<Matrix> gen_input;
  if (opt.input == GeneratorInput::kNoise) {
    if (!opt.noise_rng) throw ConfigError("noise mode requires a random source");
    gen_input.push_back(noise_batch(level.channels(), batch.size(), *opt.noise_rng));
  } else {
    gen_input = batch.condition;
  }

  StepMetrics m;
  m.episode = last_good.episode + 1;

  // Discriminator update; the generated sample is treated as a constant.
  const Matrix x_fake = generator_forward(level.generator, gen_input).x_hat;
  DiscriminatorCache real_cache, fake_cache;
  const Matrix d_real =
      discriminator_forward(level.discriminator, discriminator_input(batch.condition, batch.target_next, opt.input),
                            &real_cache);
  const Matrix d_fake =
      discriminator_forward(level.discriminator, discriminator_input(batch.condition, x_fake, opt.input), &fake_cache);
  const auto dl = discriminator_loss(d_real, d_fake);
  m.discriminator_loss = dl.value;
  m.d_real = d_real.mean();
  m.d_fake = d_fake.mean();
  if (!std::isfinite(dl.value))
    throw DivergenceError("discriminator loss is not finite at level " + std::to_string(level.index), last_good);
  auto d_grads = discriminator_backward(level.discriminator, real_cache, dl.grad_real).params;
  nn::accumulate(d_grads, discriminator_backward(level.discriminator, fake_cache, dl.grad_fake).params);
  m.discriminator_skipped =
      !nn::sgd_step(level.discriminator, d_grads, opt.lr_discriminator, opt.clip_norm).applied;

  // Generator update through the frozen, updated discriminator.
  auto gs = generator_gradients(level.generator, level.discriminator, gen_input, batch, opt.input,
                                {true, opt.non_saturating});
  m.adversarial = gs.loss.parts.adversarial;
  m.squared_error = gs.loss.parts.squared_error;
  m.cross_entropy = gs.loss.parts.cross_entropy;
  m.generator_loss = gs.loss.parts.total;
  if (!std::isfinite(m.generator_loss))
    throw DivergenceError("generator loss is not finite at level " + std::to_string(level.index), last_good);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    if ((gs.output.p_stable(i) > 0.5) == (batch.labels(i) > 0.5)) ++correct;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
  m.generator_skipped = !nn::sgd_step(level.generator, gs.gradients.params, opt.lr_generator, opt.clip_norm).applied;
  return m;
}

}  // namespace hgan_tsa::gan
