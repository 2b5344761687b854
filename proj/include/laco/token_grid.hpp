#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "laco/error.hpp"
#include "laco/tensor.hpp"

namespace laco {

// Spatial downsampling factor applied along each grid axis; a ratio r merges
// every r x r block of tokens into one.
struct CompressionRatio {
  std::size_t value = 1;

  CompressionRatio() = default;
  explicit CompressionRatio(std::size_t r) : value(r) {
    if (r == 0) throw ConfigError("compression ratio must be at least 1");
  }

  std::size_t squared() const { return value * value; }
};

// A H x W grid of C-channel tokens backed by a {H, W, C} tensor.
class TokenGrid {
 public:
  TokenGrid() = default;

  TokenGrid(std::size_t height, std::size_t width, std::size_t channels)
      : height_(height), width_(width), channels_(channels), values_(Shape{height, width, channels}) {}

  TokenGrid(std::size_t height, std::size_t width, std::size_t channels, Tensor values)
      : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    const Shape expected{height, width, channels};
    if (values_.shape() != expected) {
      throw ShapeError("token_grid: values " + shape_str(values_.shape()) + " do not match grid " +
                       shape_str(expected));
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t tokens() const { return height_ * width_; }

  const Tensor& values() const { return values_; }
  Tensor& values() { return values_; }

  double at(std::size_t i, std::size_t j, std::size_t c) const { return values_(i, j, c); }
  double& at(std::size_t i, std::size_t j, std::size_t c) { return values_(i, j, c); }

  // {N, C} view of the grid in row-major token order.
  Tensor to_tokens(GradTape* tape = nullptr) const { return reshape(values_, {tokens(), channels_}, tape); }

  static TokenGrid from_tokens(std::size_t height, std::size_t width, const Tensor& tokens, GradTape* tape = nullptr) {
    if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
      throw ShapeError("token_grid: " + shape_str(tokens.shape()) + " does not form a " + std::to_string(height) +
                       "x" + std::to_string(width) + " grid");
    }
    const std::size_t channels = tokens.dim(1);
    return TokenGrid(height, width, channels, reshape(tokens, {height, width, channels}, tape));
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  Tensor values_;
};

namespace detail {

inline void require_divisible_grid(const char* op, const TokenGrid& g, CompressionRatio r) {
  if (g.height() % r.value != 0 || g.width() % r.value != 0) {
    throw ShapeError(std::string(op) + ": ratio " + std::to_string(r.value) + " does not divide grid " +
                     std::to_string(g.height()) + "x" + std::to_string(g.width()));
  }
}

}  // namespace detail

// Space-to-channel rearrangement: each r x r block of C-channel tokens becomes
// one token with r^2*C channels. Output token (i, j), channel (u*r + v)*C + c
// reads input token (r*i + u, r*j + v), channel c. Pure permutation.
inline TokenGrid pixel_shuffle(const TokenGrid& g, CompressionRatio r, GradTape* tape = nullptr) {
  detail::require_divisible_grid("pixel_shuffle", g, r);
  const std::size_t ho = g.height() / r.value, wo = g.width() / r.value;
  const std::size_t c = g.channels(), co = r.squared() * c;
  std::vector<std::size_t> map(ho * wo * co);
  for (std::size_t i = 0; i < ho; ++i) {
    for (std::size_t j = 0; j < wo; ++j) {
      for (std::size_t u = 0; u < r.value; ++u) {
        for (std::size_t v = 0; v < r.value; ++v) {
          const std::size_t src_token = (r.value * i + u) * g.width() + (r.value * j + v);
          const std::size_t dst = (i * wo + j) * co + (u * r.value + v) * c;
          for (std::size_t ch = 0; ch < c; ++ch) map[dst + ch] = src_token * c + ch;
        }
      }
    }
  }
  return TokenGrid(ho, wo, co, gather_values(g.values(), std::move(map), {ho, wo, co}, tape));
}

// Exact inverse of pixel_shuffle: spreads each token's r^2*C channels back
// over an r x r block of C-channel tokens.
inline TokenGrid pixel_unshuffle(const TokenGrid& g, CompressionRatio r, GradTape* tape = nullptr) {
  if (g.channels() % r.squared() != 0) {
    throw ShapeError("pixel_unshuffle: " + std::to_string(g.channels()) + " channels are not divisible by r^2 = " +
                     std::to_string(r.squared()));
  }
  const std::size_t ho = g.height() * r.value, wo = g.width() * r.value;
  const std::size_t c = g.channels() / r.squared();
  std::vector<std::size_t> map(ho * wo * c);
  for (std::size_t i = 0; i < g.height(); ++i) {
    for (std::size_t j = 0; j < g.width(); ++j) {
      for (std::size_t u = 0; u < r.value; ++u) {
        for (std::size_t v = 0; v < r.value; ++v) {
          const std::size_t src = (i * g.width() + j) * g.channels() + (u * r.value + v) * c;
          const std::size_t dst_token = (r.value * i + u) * wo + (r.value * j + v);
          for (std::size_t ch = 0; ch < c; ++ch) map[dst_token * c + ch] = src + ch;
        }
      }
    }
  }
  return TokenGrid(ho, wo, c, gather_values(g.values(), std::move(map), {ho, wo, c}, tape));
}

// Collapses channel groups by averaging: token-wise mean over the r^2 groups
// of C channels produced by pixel_shuffle. Non-parametric.
inline TokenGrid channel_average(const TokenGrid& g, CompressionRatio r, GradTape* tape = nullptr) {
  if (g.channels() % r.squared() != 0) {
    throw ShapeError("channel_average: " + std::to_string(g.channels()) + " channels are not divisible by r^2 = " +
                     std::to_string(r.squared()));
  }
  const std::size_t groups = r.squared();
  const std::size_t c = g.channels() / groups;
  const std::size_t n = g.tokens();
  Tensor out({g.height(), g.width(), c});
  const Tensor& in = g.values();
  const double inv = 1.0 / static_cast<double>(groups);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t q = 0; q < groups; ++q) s += in[t * g.channels() + q * c + ch];
      out[t * c + ch] = s * inv;
    }
  }
  if (detail::tracked(tape, in)) {
    const int nx = in.node(), no = tape->make_node(out);
    const std::size_t cin = g.channels();
    tape->record([nx, no, n, c, groups, cin, inv](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double d = dout[t * c + ch] * inv;
          for (std::size_t q = 0; q < groups; ++q) dx[t * cin + q * c + ch] += d;
        }
      }
    });
  }
  return TokenGrid(g.height(), g.width(), c, std::move(out));
}

// Parameter-free shortcut branch: shuffle then average the channel groups,
// which equals r x r average pooling over the token grid.
inline TokenGrid residual_shortcut(const TokenGrid& g, CompressionRatio r, GradTape* tape = nullptr) {
  return channel_average(pixel_shuffle(g, r, tape), r, tape);
}

// Independent reference: windowed average pooling written as plain loops.
inline TokenGrid avg_pool_oracle(const TokenGrid& g, CompressionRatio r) {
  detail::require_divisible_grid("avg_pool_oracle", g, r);
  const std::size_t ho = g.height() / r.value, wo = g.width() / r.value;
  TokenGrid out(ho, wo, g.channels());
  const double inv = 1.0 / static_cast<double>(r.squared());
  for (std::size_t i = 0; i < ho; ++i) {
    for (std::size_t j = 0; j < wo; ++j) {
      for (std::size_t c = 0; c < g.channels(); ++c) {
        double s = 0.0;
        for (std::size_t u = 0; u < r.value; ++u) {
          for (std::size_t v = 0; v < r.value; ++v) s += g.at(r.value * i + u, r.value * j + v, c);
        }
        out.at(i, j, c) = s * inv;
      }
    }
  }
  return out;
}

}  // namespace laco
