#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "laco/encoder.hpp"
#include "laco/error.hpp"
#include "laco/pml.hpp"
#include "laco/tensor.hpp"
#include "laco/token_grid.hpp"

namespace laco {

// Analytic cost of one block position. layer 0 is the synthetic row carrying
// the merger cost when the merge runs before the first block.
struct LayerCost {
  std::size_t layer = 0;
  std::size_t tokens = 0;
  std::uint64_t attn_flops = 0;
  std::uint64_t mlp_flops = 0;
  std::uint64_t merger_flops = 0;

  bool operator==(const LayerCost&) const = default;
};

struct LatencyStats {
  double median_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
  std::size_t trials = 0;
  std::size_t warmup = 0;
  double resolution_s = 0.0;
  bool resolution_warning = false;  // timer resolution coarser than 1% of the median

  bool operator==(const LatencyStats&) const = default;
};

struct RunMeta {
  std::string mode = "flops";
  EncoderConfig enc;
  std::size_t k = 0;
  std::optional<double> fraction;  // set when k was resolved from a fraction
  std::size_t r = 1;
  std::string variant;
  std::size_t hidden_width = 0;
  std::uint64_t seed = 0;

  bool operator==(const RunMeta&) const = default;
};

struct CostReport {
  RunMeta meta;
  std::vector<LayerCost> layers;
  std::uint64_t flops_total = 0;
  std::size_t tokens_out = 0;
  std::optional<LatencyStats> latency;

  bool operator==(const CostReport&) const = default;
};

// Attention cost for n tokens of width d: 4*n*d^2 for the four projections
// plus 2*n^2*d for score and value mixing.
inline std::uint64_t attention_flops(std::size_t n, std::size_t d) {
  const auto nn = static_cast<std::uint64_t>(n), dd = static_cast<std::uint64_t>(d);
  return 4 * nn * dd * dd + 2 * nn * nn * dd;
}

// Two-matmul block MLP, multiply and add counted separately: 4*n*d*w.
inline std::uint64_t mlp_flops(std::size_t n, std::size_t d, std::size_t w) {
  return 4 * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(w);
}

// Merge cost for n input tokens of width c. The shuffle itself is free data
// movement; the MLP branch costs 2*(n/r^2)*(r^2*c*h + h*c) and the shortcut
// (n/r^2)*r^2*c adds. r = 1 leaves the grid unchanged and is billed zero.
inline std::uint64_t merger_flops(std::size_t n, CompressionRatio r, std::size_t c, std::size_t hidden,
                                  MergerVariant variant) {
  if (r.value <= 1) return 0;
  const auto m = static_cast<std::uint64_t>(n / r.squared());
  const auto cc = static_cast<std::uint64_t>(c), hh = static_cast<std::uint64_t>(hidden);
  const auto rr = static_cast<std::uint64_t>(r.squared());
  const std::uint64_t mlp = 2 * m * (rr * cc * hh + hh * cc);
  const std::uint64_t shortcut = m * rr * cc;
  switch (variant) {
    case MergerVariant::PmlWithResidual:
    case MergerVariant::External:
      return mlp + shortcut;
    case MergerVariant::PmlOnly:
      return mlp;
    case MergerVariant::ResidualOnly:
    case MergerVariant::AvgPool:
      return shortcut;
  }
  throw ContractError("merger_flops: unknown merger variant");
}

inline std::size_t default_hidden_width(const EncoderConfig& cfg, CompressionRatio r) {
  return r.squared() * cfg.width;
}

// Per-layer FLOP table for one insertion choice. External counts like
// insertion at k = L, mirroring what encode() executes.
inline CostReport estimate_flops(const EncoderConfig& cfg, InsertionPoint at, CompressionRatio r,
                                 MergerVariant variant, std::size_t hidden_width = 0, std::uint64_t seed = 0) {
  cfg.validate();
  if (hidden_width == 0) hidden_width = default_hidden_width(cfg, r);
  const std::size_t k = variant == MergerVariant::External ? cfg.layers : at.layer;
  const std::vector<std::size_t> trace = shape_trace(cfg, InsertionPoint{k}, r);
  const std::size_t n = cfg.tokens();

  CostReport report;
  report.meta.mode = "flops";
  report.meta.enc = cfg;
  report.meta.k = at.layer;
  report.meta.r = r.value;
  report.meta.variant = to_string(variant);
  report.meta.hidden_width = hidden_width;
  report.meta.seed = seed;

  if (k == 0 && r.value > 1) {
    report.layers.push_back(LayerCost{0, n, 0, 0, merger_flops(n, r, cfg.width, hidden_width, variant)});
  }
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    LayerCost row;
    row.layer = l;
    row.tokens = trace[l - 1];
    row.attn_flops = attention_flops(row.tokens, cfg.width);
    row.mlp_flops = mlp_flops(row.tokens, cfg.width, cfg.mlp_width);
    if (l == k && r.value > 1) row.merger_flops = merger_flops(n, r, cfg.width, hidden_width, variant);
    report.layers.push_back(row);
  }
  for (const LayerCost& row : report.layers) {
    report.flops_total += row.attn_flops + row.mlp_flops + row.merger_flops;
  }
  report.tokens_out = n / r.squared();
  return report;
}

namespace detail {

inline double timer_resolution_s() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int i = 0; i < 512; ++i) {
    const auto t0 = clock::now();
    auto t1 = clock::now();
    while (t1 == t0) t1 = clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

// Wall-clock cost of tape-free encode() calls on one fixed random image.
// Median over `trials` timed runs after `warmup` untimed ones; min and max
// describe the dispersion. Always single-threaded.
inline LatencyStats measure_latency(const EncoderConfig& cfg, InsertionPoint at, CompressionRatio r,
                                    MergerVariant variant, std::size_t trials, std::size_t warmup,
                                    std::uint64_t seed, std::size_t hidden_width = 0) {
  cfg.validate();
  if (trials < 5) throw ConfigError("measure_latency: at least 5 trials are required, got " + std::to_string(trials));
  if (warmup < 1) throw ConfigError("measure_latency: at least 1 warmup run is required");
  if (hidden_width == 0) hidden_width = default_hidden_width(cfg, r);
  const EncoderParams params = init_encoder_params(cfg, r, hidden_width, seed);
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  const Tensor image = uniform_tensor({cfg.image_edge, cfg.image_edge, 3}, 0.0, 1.0, rng);

  volatile double sink = 0.0;  // keeps the optimiser from dropping the forward passes
  for (std::size_t i = 0; i < warmup; ++i) {
    sink = sink + encode(image, params, cfg, at, r, variant).values()[0];
  }
  using clock = std::chrono::steady_clock;
  std::vector<double> seconds;
  seconds.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto t0 = clock::now();
    const TokenGrid out = encode(image, params, cfg, at, r, variant);
    const auto t1 = clock::now();
    sink = sink + out.values()[0];
    seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  LatencyStats stats;
  stats.median_s = detail::median_of(seconds);
  stats.min_s = *std::min_element(seconds.begin(), seconds.end());
  stats.max_s = *std::max_element(seconds.begin(), seconds.end());
  stats.trials = trials;
  stats.warmup = warmup;
  stats.resolution_s = detail::timer_resolution_s();
  stats.resolution_warning = stats.resolution_s > 0.01 * stats.median_s;
  return stats;
}

// Worker count for analytic sweeps: hardware concurrency clamped to 8, capped
// further by LACO_KIT_THREADS when that parses to a positive integer.
inline std::size_t worker_cap(std::size_t jobs) {
  std::size_t cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  cap = std::min<std::size_t>(cap, 8);
  if (const char* env = std::getenv("LACO_KIT_THREADS")) {
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && parsed >= 1) cap = std::min<std::size_t>(cap, parsed);
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

struct SweepPoint {
  double fraction = 0.0;
  std::size_t k = 0;
  std::string variant;
  bool ok = false;
  std::string error;
  CostReport report;
};

// Analytic FLOP estimates over a fraction x variant lattice. Failing points
// (bad fraction, divisibility) are reported in place rather than aborting the
// sweep. Points run concurrently up to worker_cap(); each worker writes only
// its own slot, so the result is deterministic.
inline std::vector<SweepPoint> sweep(const EncoderConfig& cfg, const std::vector<double>& fractions,
                                     CompressionRatio r, const std::vector<MergerVariant>& variants,
                                     std::size_t hidden_width = 0, std::uint64_t seed = 0) {
  cfg.validate();
  if (fractions.empty() || variants.empty()) return {};
  std::vector<SweepPoint> points(fractions.size() * variants.size());
  auto fill_point = [&](std::size_t idx) {
    SweepPoint& pt = points[idx];
    pt.fraction = fractions[idx / variants.size()];
    const MergerVariant variant = variants[idx % variants.size()];
    pt.variant = to_string(variant);
    try {
      pt.k = resolve_insertion(cfg.layers, pt.fraction);
      pt.report = estimate_flops(cfg, InsertionPoint{pt.k}, r, variant, hidden_width, seed);
      pt.report.meta.fraction = pt.fraction;
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.ok = false;
      pt.error = e.what();
    }
  };
  const std::size_t workers = worker_cap(points.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) fill_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) fill_point(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return points;
}

}  // namespace laco
