#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "laco/error.hpp"
#include "laco/tensor.hpp"

namespace laco {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;      // coordinate subsampling when max_coords > 0
};

// |a - n| / max(|a|, |n|, 1e-8); the floor keeps zero-gradient coordinates
// from dividing by zero.
inline double relative_gap(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

// Central-difference check of an analytic gradient. Returns the worst relative
// gap over the checked coordinates.
inline double gradient_check(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& point, const std::vector<double>& analytic,
                             GradCheckOptions opts = {}) {
  if (!(opts.step > 0.0)) throw ConfigError("gradient_check: step must be positive");
  if (analytic.size() != point.size()) {
    throw ShapeError("gradient_check: analytic gradient has " + std::to_string(analytic.size()) +
                     " entries for " + std::to_string(point.size()) + " coordinates");
  }
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opts.max_coords > 0 && opts.max_coords < coords.size()) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coords);
    std::sort(coords.begin(), coords.end());
  }
  std::vector<double> p = point;
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = p[i];
    p[i] = saved + opts.step;
    const double fp = f(p);
    p[i] = saved - opts.step;
    const double fm = f(p);
    p[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw ContractError("gradient_check: non-finite evaluation at coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * opts.step);
    worst = std::max(worst, relative_gap(analytic[i], numeric));
  }
  return worst;
}

// Flattens several tensors into one coordinate vector (and back) so whole
// parameter structs can go through gradient_check as a single point.
inline std::vector<double> flatten_values(const std::vector<const Tensor*>& tensors) {
  std::vector<double> flat;
  for (const Tensor* t : tensors) flat.insert(flat.end(), t->values().begin(), t->values().end());
  return flat;
}

inline void assign_values(const std::vector<double>& flat, const std::vector<Tensor*>& tensors) {
  std::size_t offset = 0;
  for (Tensor* t : tensors) {
    if (offset + t->size() > flat.size()) {
      throw ShapeError("assign_values: " + std::to_string(flat.size()) + " values cannot fill the given tensors");
    }
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + t->size()), t->values().begin());
    offset += t->size();
  }
  if (offset != flat.size()) {
    throw ShapeError("assign_values: " + std::to_string(flat.size()) + " values do not match the given tensors");
  }
}

}  // namespace laco
