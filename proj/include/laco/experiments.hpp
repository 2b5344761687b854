#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "laco/encoder.hpp"
#include "laco/error.hpp"
#include "laco/gradcheck.hpp"
#include "laco/pml.hpp"
#include "laco/tensor.hpp"
#include "laco/token_grid.hpp"

namespace laco {

struct TrainConfig {
  std::size_t steps = 200;
  double lr = 0.03;
  std::size_t batch = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps == 0) throw ConfigError("train config: at least one step is required");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train config: learning rate must be finite and >= 0");
    if (batch == 0) throw ConfigError("train config: batch size must be positive");
  }
};

// Linear head mapping encoder output tokens to the target width; stands in
// for the projector that accompanies the merger during alignment training.
struct ProjectorParams {
  Tensor w;  // {d, d}
  Tensor b;  // {d}
};

struct SynthBatch {
  std::vector<Tensor> images;      // each {E, E, 3}
  std::vector<TokenGrid> targets;  // each grid_edge/r square, d channels
};

struct TrainLog {
  std::vector<double> losses;          // entry s is the loss at step s, before that step's update
  std::vector<double> pml_grad_norms;  // L2 norm over all four merger tensors per step
  PmlParams final_pml;
  ProjectorParams final_projector;
};

// Fixed synthetic batch: uniform [0, 1) images, each paired with the pooled
// patch embedding it should reconstruct. Targets use the pooling oracle and
// take no positions, so they depend only on the stem weights.
inline SynthBatch synth_batch(std::uint64_t seed, std::size_t count, const EncoderConfig& cfg,
                              const EncoderParams& params, CompressionRatio r) {
  if (count == 0) throw ConfigError("synth_batch: at least one sample is required");
  cfg.validate();
  std::mt19937_64 rng(seed);
  SynthBatch batch;
  batch.images.reserve(count);
  batch.targets.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    batch.images.push_back(uniform_tensor({cfg.image_edge, cfg.image_edge, 3}, 0.0, 1.0, rng));
    batch.targets.push_back(avg_pool_oracle(patch_embed(batch.images.back(), params, cfg), r));
  }
  return batch;
}

// Seed used for the projector head of a training run, decorrelated from the
// seed that drives batch sampling.
inline std::uint64_t projector_seed(std::uint64_t train_seed) { return train_seed ^ 0x1f2e3d4c5b6a7988ULL; }

inline ProjectorParams init_projector(std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProjectorParams p;
  p.w = detail::xavier_tensor(width, width, rng);
  p.b = Tensor::zeros({width});
  return p;
}

// Alignment-stage analog: full-batch gradient descent on the mean squared
// error between projected encoder outputs and pooled stem targets. Only the
// merger MLP and the projector move; stem, positions and blocks stay frozen
// (they are never placed on the tape, so no update can reach them).
inline TrainLog train_stage1(EncoderParams& params, const TrainConfig& tc, const EncoderConfig& cfg,
                             InsertionPoint at, CompressionRatio r, MergerVariant variant) {
  tc.validate();
  cfg.validate();
  const SynthBatch batch = synth_batch(tc.seed, tc.batch, cfg, params, r);
  ProjectorParams projector = init_projector(cfg.width, projector_seed(tc.seed));

  std::vector<Tensor> targets;
  targets.reserve(batch.targets.size());
  for (const TokenGrid& t : batch.targets) targets.push_back(t.to_tokens());

  TrainLog log;
  log.losses.reserve(tc.steps);
  log.pml_grad_norms.reserve(tc.steps);
  const double denom = static_cast<double>(tc.batch) * static_cast<double>(targets[0].size());

  for (std::size_t step = 0; step < tc.steps; ++step) {
    GradTape tape;
    tape.watch(params.pml.w1);
    tape.watch(params.pml.b1);
    tape.watch(params.pml.w2);
    tape.watch(params.pml.b2);
    tape.watch(projector.w);
    tape.watch(projector.b);

    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < batch.images.size(); ++i) {
      const TokenGrid out = encode(batch.images[i], params, cfg, at, r, variant, &tape);
      const Tensor projected = add_rowwise(matmul(out.to_tokens(&tape), projector.w, &tape), projector.b, &tape);
      const Tensor diff = sub(projected, targets[i], &tape);
      total = add(total, sum(mul(diff, diff, &tape), &tape), &tape);
    }
    const Tensor loss = scale(total, 1.0 / denom, &tape);
    if (!std::isfinite(loss[0])) {
      throw ContractError("train_stage1: non-finite loss at step " + std::to_string(step));
    }
    log.losses.push_back(loss[0]);

    const Gradients grads = tape.backward(loss);
    const Tensor& gw1 = grads.wrt(params.pml.w1);
    const Tensor& gb1 = grads.wrt(params.pml.b1);
    const Tensor& gw2 = grads.wrt(params.pml.w2);
    const Tensor& gb2 = grads.wrt(params.pml.b2);
    double sq = 0.0;
    for (const Tensor* g : {&gw1, &gb1, &gw2, &gb2}) {
      for (double v : g->values()) sq += v * v;
    }
    log.pml_grad_norms.push_back(std::sqrt(sq));

    auto descend = [&](Tensor& p, const Tensor& g) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= tc.lr * g[i];
    };
    descend(params.pml.w1, gw1);
    descend(params.pml.b1, gb1);
    descend(params.pml.w2, gw2);
    descend(params.pml.b2, gb2);
    descend(projector.w, grads.wrt(projector.w));
    descend(projector.b, grads.wrt(projector.b));
  }

  log.final_pml = params.pml;
  log.final_projector = projector;
  return log;
}

}  // namespace laco
