#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "laco/error.hpp"
#include "laco/pml.hpp"
#include "laco/tensor.hpp"
#include "laco/token_grid.hpp"

namespace laco {

struct EncoderConfig {
  std::size_t layers = 12;      // block count L
  std::size_t width = 64;       // token width d
  std::size_t heads = 4;
  std::size_t mlp_width = 256;  // hidden width of each block's MLP
  std::size_t patch = 4;        // square patch edge in pixels
  std::size_t image_edge = 64;  // square input edge in pixels

  std::size_t grid_edge() const { return image_edge / patch; }
  std::size_t tokens() const { return grid_edge() * grid_edge(); }
  std::size_t head_width() const { return width / heads; }

  void validate() const {
    if (layers == 0 || width == 0 || heads == 0 || mlp_width == 0 || patch == 0 || image_edge == 0) {
      throw ConfigError("encoder config: all extents must be positive");
    }
    if (width % heads != 0) {
      throw ConfigError("encoder config: width " + std::to_string(width) + " is not divisible by " +
                        std::to_string(heads) + " heads");
    }
    if (image_edge % patch != 0) {
      throw ConfigError("encoder config: patch " + std::to_string(patch) + " does not divide image edge " +
                        std::to_string(image_edge));
    }
  }

  bool operator==(const EncoderConfig&) const = default;
};

// Block index k after which the merge runs; 0 means before the first block.
struct InsertionPoint {
  std::size_t layer = 0;
};

// Maps a depth fraction to a concrete block index: round(L * fraction),
// clamped up to 1 so the merge always lands inside the stack.
inline std::size_t resolve_insertion(std::size_t layers, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("insertion fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const auto k = static_cast<std::size_t>(std::lround(static_cast<double>(layers) * fraction));
  return k < 1 ? 1 : k;
}

// Per-head projections; wo[h] maps that head's output back to full width, so
// summing heads is the same as concatenating them and applying one d x d map.
struct AttentionParams {
  std::vector<Tensor> wq, wk, wv;  // each {d, d/heads}
  std::vector<Tensor> wo;          // each {d/heads, d}
  Tensor out_bias;                 // {d}
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  AttentionParams attn;
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_w1;  // {d, mlp_width}
  Tensor mlp_b1;  // {mlp_width}
  Tensor mlp_w2;  // {mlp_width, d}
  Tensor mlp_b2;  // {d}
};

struct EncoderParams {
  Tensor patch_proj;  // {patch^2 * 3, d}
  Tensor patch_bias;  // {d}
  Tensor pos;         // {N, d}, added once at the stem
  std::vector<BlockParams> blocks;
  PmlParams pml;
};

template <class F>
void for_each_block_tensor(BlockParams& b, F&& f) {
  f(b.ln1_gain);
  f(b.ln1_bias);
  for (Tensor& t : b.attn.wq) f(t);
  for (Tensor& t : b.attn.wk) f(t);
  for (Tensor& t : b.attn.wv) f(t);
  for (Tensor& t : b.attn.wo) f(t);
  f(b.attn.out_bias);
  f(b.ln2_gain);
  f(b.ln2_bias);
  f(b.mlp_w1);
  f(b.mlp_b1);
  f(b.mlp_w2);
  f(b.mlp_b2);
}

// Everything the merge experiments keep frozen: stem, positions, blocks.
template <class F>
void for_each_frozen_tensor(EncoderParams& p, F&& f) {
  f(p.patch_proj);
  f(p.patch_bias);
  f(p.pos);
  for (BlockParams& b : p.blocks) for_each_block_tensor(b, f);
}

template <class F>
void for_each_tensor(EncoderParams& p, F&& f) {
  for_each_frozen_tensor(p, f);
  f(p.pml.w1);
  f(p.pml.b1);
  f(p.pml.w2);
  f(p.pml.b2);
}

namespace detail {

inline Tensor xavier_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_tensor({rows, cols}, -limit, limit, rng);
}

}  // namespace detail

// Weight matrices get uniform Xavier draws, positions a 0.02-scale normal
// draw, norm gains one, every bias zero. The merger follows init_params.
inline EncoderParams init_encoder_params(const EncoderConfig& cfg, CompressionRatio r, std::size_t hidden_width,
                                         std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.width, dh = cfg.head_width();
  EncoderParams p;
  p.patch_proj = detail::xavier_tensor(cfg.patch * cfg.patch * 3, d, rng);
  p.patch_bias = Tensor::zeros({d});
  p.pos = normal_tensor({cfg.tokens(), d}, 0.0, 0.02, rng);
  p.blocks.resize(cfg.layers);
  for (BlockParams& b : p.blocks) {
    b.ln1_gain = Tensor::ones({d});
    b.ln1_bias = Tensor::zeros({d});
    b.attn.wq.reserve(cfg.heads);
    b.attn.wk.reserve(cfg.heads);
    b.attn.wv.reserve(cfg.heads);
    b.attn.wo.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      b.attn.wq.push_back(detail::xavier_tensor(d, dh, rng));
      b.attn.wk.push_back(detail::xavier_tensor(d, dh, rng));
      b.attn.wv.push_back(detail::xavier_tensor(d, dh, rng));
      b.attn.wo.push_back(detail::xavier_tensor(dh, d, rng));
    }
    b.attn.out_bias = Tensor::zeros({d});
    b.ln2_gain = Tensor::ones({d});
    b.ln2_bias = Tensor::zeros({d});
    b.mlp_w1 = detail::xavier_tensor(d, cfg.mlp_width, rng);
    b.mlp_b1 = Tensor::zeros({cfg.mlp_width});
    b.mlp_w2 = detail::xavier_tensor(cfg.mlp_width, d, rng);
    b.mlp_b2 = Tensor::zeros({d});
  }
  p.pml = init_params(d, r, hidden_width, seed ^ 0x9e3779b97f4a7c15ULL);
  return p;
}

// Slices an {E, E, 3} image into non-overlapping patches and projects each to
// a d-channel token. Positions are not added here; encode() owns the stem.
inline TokenGrid patch_embed(const Tensor& image, const EncoderParams& p, const EncoderConfig& cfg,
                             GradTape* tape = nullptr) {
  const Shape expected{cfg.image_edge, cfg.image_edge, 3};
  if (image.shape() != expected) {
    throw ShapeError("patch_embed: image " + shape_str(image.shape()) + " does not match configured " +
                     shape_str(expected));
  }
  const std::size_t g = cfg.grid_edge(), pe = cfg.patch, cols = pe * pe * 3;
  if (p.patch_proj.rank() != 2 || p.patch_proj.dim(0) != cols) {
    throw ConfigError("patch_embed: projection " + shape_str(p.patch_proj.shape()) + " does not accept " +
                      std::to_string(cols) + " pixel values per patch");
  }
  std::vector<std::size_t> map(g * g * cols);
  for (std::size_t gy = 0; gy < g; ++gy) {
    for (std::size_t gx = 0; gx < g; ++gx) {
      const std::size_t row = gy * g + gx;
      for (std::size_t py = 0; py < pe; ++py) {
        for (std::size_t px = 0; px < pe; ++px) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            map[row * cols + (py * pe + px) * 3 + ch] = ((gy * pe + py) * cfg.image_edge + (gx * pe + px)) * 3 + ch;
          }
        }
      }
    }
  }
  const Tensor patches = gather_values(image, std::move(map), {g * g, cols}, tape);
  const Tensor tokens = add_rowwise(matmul(patches, p.patch_proj, tape), p.patch_bias, tape);
  return TokenGrid::from_tokens(g, g, tokens, tape);
}

// One pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
inline Tensor encoder_block(const Tensor& x, const BlockParams& b, std::size_t heads, GradTape* tape = nullptr) {
  if (x.rank() != 2 || x.dim(1) != b.ln1_gain.size()) {
    throw ShapeError("encoder_block: tokens " + shape_str(x.shape()) + " do not match block width " +
                     std::to_string(b.ln1_gain.size()));
  }
  if (b.attn.wq.size() != heads || b.attn.wk.size() != heads || b.attn.wv.size() != heads ||
      b.attn.wo.size() != heads) {
    throw ConfigError("encoder_block: block holds " + std::to_string(b.attn.wq.size()) + " heads, expected " +
                      std::to_string(heads));
  }
  const Tensor normed = layer_norm(x, b.ln1_gain, b.ln1_bias, kLayerNormEps, tape);
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(b.attn.wq[0].dim(1)));
  Tensor attn_out;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = matmul(normed, b.attn.wq[h], tape);
    const Tensor k = matmul(normed, b.attn.wk[h], tape);
    const Tensor v = matmul(normed, b.attn.wv[h], tape);
    const Tensor weights = softmax_last_axis(scale(matmul(q, transpose2d(k, tape), tape), inv_sqrt_dh, tape), tape);
    const Tensor head = matmul(matmul(weights, v, tape), b.attn.wo[h], tape);
    attn_out = h == 0 ? head : add(attn_out, head, tape);
  }
  attn_out = add_rowwise(attn_out, b.attn.out_bias, tape);
  const Tensor x1 = add(x, attn_out, tape);
  const Tensor normed2 = layer_norm(x1, b.ln2_gain, b.ln2_bias, kLayerNormEps, tape);
  const Tensor hidden = gelu(add_rowwise(matmul(normed2, b.mlp_w1, tape), b.mlp_b1, tape), tape);
  const Tensor mlp_out = add_rowwise(matmul(hidden, b.mlp_w2, tape), b.mlp_b2, tape);
  return add(x1, mlp_out, tape);
}

namespace detail {

inline void require_insertion(const EncoderConfig& cfg, InsertionPoint at) {
  if (at.layer > cfg.layers) {
    throw ConfigError("insertion layer k = " + std::to_string(at.layer) + " exceeds depth L = " +
                      std::to_string(cfg.layers));
  }
}

}  // namespace detail

// Full forward pass: patch embedding plus positions, blocks 1..k, the merge,
// blocks k+1..L. The External variant runs every block at full resolution and
// applies the merger with its shortcut after the last one, so it reduces to
// insertion at k = L.
inline TokenGrid encode(const Tensor& image, const EncoderParams& p, const EncoderConfig& cfg, InsertionPoint at,
                        CompressionRatio r, MergerVariant variant, GradTape* tape = nullptr) {
  cfg.validate();
  detail::require_insertion(cfg, at);
  const std::size_t k = variant == MergerVariant::External ? cfg.layers : at.layer;
  const MergerVariant applied = variant == MergerVariant::External ? MergerVariant::PmlWithResidual : variant;
  const TokenGrid stem = patch_embed(image, p, cfg, tape);
  if (p.pos.shape() != Shape{cfg.tokens(), cfg.width}) {
    throw ConfigError("encode: positions " + shape_str(p.pos.shape()) + " do not match " +
                      std::to_string(cfg.tokens()) + " tokens of width " + std::to_string(cfg.width));
  }
  Tensor x = add(stem.to_tokens(tape), p.pos, tape);
  std::size_t edge = cfg.grid_edge();
  for (std::size_t l = 0; l < k; ++l) x = encoder_block(x, p.blocks[l], cfg.heads, tape);
  const TokenGrid merged = merge_forward(TokenGrid::from_tokens(edge, edge, x, tape), p.pml, r, applied, tape);
  edge = merged.height();
  x = merged.to_tokens(tape);
  for (std::size_t l = k; l < cfg.layers; ++l) x = encoder_block(x, p.blocks[l], cfg.heads, tape);
  return TokenGrid::from_tokens(edge, edge, x, tape);
}

// Token count seen by each block, in depth order. Entry l (0-based) is the
// input size of block l+1: N up to and including block k, N / r^2 after.
inline std::vector<std::size_t> shape_trace(const EncoderConfig& cfg, InsertionPoint at, CompressionRatio r) {
  cfg.validate();
  detail::require_insertion(cfg, at);
  if (cfg.grid_edge() % r.value != 0) {
    throw ShapeError("shape_trace: ratio " + std::to_string(r.value) + " does not divide grid " +
                     std::to_string(cfg.grid_edge()) + "x" + std::to_string(cfg.grid_edge()));
  }
  const std::size_t n = cfg.tokens();
  std::vector<std::size_t> trace(cfg.layers);
  for (std::size_t l = 1; l <= cfg.layers; ++l) trace[l - 1] = l <= at.layer ? n : n / r.squared();
  return trace;
}

}  // namespace laco
