#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "laco/error.hpp"
#include "laco/tensor.hpp"
#include "laco/token_grid.hpp"

namespace laco {

// Two-layer MLP applied after pixel_shuffle to map r^2*C shuffled channels
// back down to C. w2 and both biases start at zero so a freshly initialised
// merger contributes nothing on top of the shortcut branch.
struct PmlParams {
  Tensor w1;  // {r^2*C, hidden}
  Tensor b1;  // {hidden}
  Tensor w2;  // {hidden, C}
  Tensor b2;  // {C}

  std::size_t hidden_width() const { return b1.size(); }
};

enum class MergerVariant {
  PmlWithResidual,  // merger MLP plus channel-averaging shortcut
  PmlOnly,          // merger MLP alone
  ResidualOnly,     // channel-averaging shortcut alone
  AvgPool,          // alias of ResidualOnly: r x r average pooling
  External,         // no in-stack merge; compression happens after the stack
};

inline const char* to_string(MergerVariant v) {
  switch (v) {
    case MergerVariant::PmlWithResidual: return "pml_residual";
    case MergerVariant::PmlOnly: return "pml_only";
    case MergerVariant::ResidualOnly: return "residual_only";
    case MergerVariant::AvgPool: return "avg_pool";
    case MergerVariant::External: return "external";
  }
  throw ContractError("to_string: unknown merger variant");
}

inline MergerVariant merger_variant_from_string(const std::string& name) {
  if (name == "pml_residual") return MergerVariant::PmlWithResidual;
  if (name == "pml_only") return MergerVariant::PmlOnly;
  if (name == "residual_only") return MergerVariant::ResidualOnly;
  if (name == "avg_pool") return MergerVariant::AvgPool;
  if (name == "external") return MergerVariant::External;
  throw ConfigError("unknown merger variant '" + name +
                    "' (expected pml_residual, pml_only, residual_only, avg_pool or external)");
}

// w1 gets a uniform Xavier draw over +/- sqrt(6 / (fan_in + fan_out)); b1, w2
// and b2 start at zero.
inline PmlParams init_params(std::size_t channels, CompressionRatio r, std::size_t hidden, std::uint64_t seed) {
  if (channels == 0 || hidden == 0) throw ConfigError("init_params: channels and hidden width must be positive");
  const std::size_t fan_in = r.squared() * channels;
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + hidden));
  PmlParams p;
  p.w1 = uniform_tensor({fan_in, hidden}, -limit, limit, rng);
  p.b1 = Tensor::zeros({hidden});
  p.w2 = Tensor::zeros({hidden, channels});
  p.b2 = Tensor::zeros({channels});
  return p;
}

namespace detail {

inline void require_pml_shapes(const PmlParams& p, std::size_t channels, CompressionRatio r) {
  const std::size_t fan_in = r.squared() * channels;
  const bool ok = p.w1.rank() == 2 && p.b1.rank() == 1 && p.w2.rank() == 2 && p.b2.rank() == 1 &&
                  p.w1.dim(0) == fan_in && p.w1.dim(1) == p.b1.dim(0) && p.w2.dim(0) == p.b1.dim(0) &&
                  p.w2.dim(1) == channels && p.b2.dim(0) == channels;
  if (!ok) {
    throw ConfigError("pml: params w1 " + shape_str(p.w1.shape()) + ", w2 " + shape_str(p.w2.shape()) +
                      " do not fit r = " + std::to_string(r.value) + ", channels = " + std::to_string(channels));
  }
}

}  // namespace detail

// Merger branch: pixel_shuffle then a gelu MLP token by token. Shrinks an
// H x W grid to H/r x W/r with the channel count preserved.
inline TokenGrid pml_forward(const TokenGrid& g, const PmlParams& p, CompressionRatio r, GradTape* tape = nullptr) {
  detail::require_pml_shapes(p, g.channels(), r);
  const TokenGrid shuffled = pixel_shuffle(g, r, tape);
  const Tensor x = shuffled.to_tokens(tape);
  const Tensor h = gelu(add_rowwise(matmul(x, p.w1, tape), p.b1, tape), tape);
  const Tensor y = add_rowwise(matmul(h, p.w2, tape), p.b2, tape);
  return TokenGrid::from_tokens(shuffled.height(), shuffled.width(), y, tape);
}

// Applies the selected merge at one point of the stack. External is the
// identity here: compression is deferred to after the final block, so the
// in-stack merge leaves the grid untouched.
inline TokenGrid merge_forward(const TokenGrid& g, const PmlParams& p, CompressionRatio r, MergerVariant variant,
                               GradTape* tape = nullptr) {
  switch (variant) {
    case MergerVariant::PmlWithResidual: {
      const TokenGrid merged = pml_forward(g, p, r, tape);
      const TokenGrid shortcut = residual_shortcut(g, r, tape);
      return TokenGrid(merged.height(), merged.width(), merged.channels(),
                       add(merged.values(), shortcut.values(), tape));
    }
    case MergerVariant::PmlOnly:
      return pml_forward(g, p, r, tape);
    case MergerVariant::ResidualOnly:
    case MergerVariant::AvgPool:
      return residual_shortcut(g, r, tape);
    case MergerVariant::External:
      return g;
  }
  throw ContractError("merge_forward: unknown merger variant");
}

}  // namespace laco
