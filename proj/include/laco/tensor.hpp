#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "laco/error.hpp"

namespace laco {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

class GradTape;

// Dense row-major tensor of doubles. Plain value type; the optional autodiff
// bookkeeping (node id + owning tape id) rides along but never affects the
// numeric payload, so copies of tracked tensors stay usable as constants.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
  }

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != checked_numel(shape_)) {
      throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }
  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool requires_grad() const { return node_ >= 0; }
  int node() const { return node_; }
  std::uint64_t tape_id() const { return tape_id_; }
  int node_on(const GradTape& tape) const;

 private:
  friend class GradTape;

  static std::size_t checked_numel(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor: rank-0 shapes are not supported, use {1}");
    std::size_t n = 1;
    for (std::size_t extent : shape) {
      if (extent == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
      n *= extent;
    }
    return n;
  }

  Shape shape_{};
  std::vector<double> data_{};
  int node_ = -1;
  std::uint64_t tape_id_ = 0;
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

inline bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

// Gradients of one backward pass, keyed by the watched leaves of the tape
// that produced them.
class Gradients {
 public:
  Gradients() = default;

  bool contains(const Tensor& leaf) const {
    return leaf.tape_id() == tape_id_ && grads_.count(leaf.node()) > 0;
  }

  const Tensor& wrt(const Tensor& leaf) const {
    auto it = grads_.find(leaf.node());
    if (leaf.tape_id() != tape_id_ || it == grads_.end()) {
      throw ContractError("gradients: tensor is not a watched leaf of the tape that produced this result");
    }
    return it->second;
  }

 private:
  friend class GradTape;
  std::uint64_t tape_id_ = 0;
  std::unordered_map<int, Tensor> grads_;
};

// Reverse-mode tape. Ops append closures that scatter output adjoints back to
// their inputs; backward() replays them in reverse from a scalar seed. Tapes
// are single-use per backward call but may be reused (records accumulate).
class GradTape {
 public:
  using Adjoints = std::vector<std::vector<double>>;

  GradTape() : id_(next_id()) {}
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return node_numel_.size(); }
  std::size_t op_count() const { return records_.size(); }

  bool tracks(const Tensor& t) const { return t.node_ >= 0 && t.tape_id_ == id_; }

  // Marks a leaf whose gradient backward() should report. Idempotent for
  // tensors already tracked by this tape.
  void watch(Tensor& t) {
    if (!tracks(t)) make_node(t);
    leaves_[t.node_] = t.shape_;
  }

  int make_node(Tensor& t) {
    t.node_ = static_cast<int>(node_numel_.size());
    t.tape_id_ = id_;
    node_numel_.push_back(t.size());
    return t.node_;
  }

  void record(std::function<void(Adjoints&)> op) { records_.push_back(std::move(op)); }

  Gradients backward(const Tensor& output) const {
    if (!tracks(output)) throw ContractError("backward: output was not produced on this tape");
    if (output.size() != 1) {
      throw ContractError("backward: output must be a scalar, got shape " + shape_str(output.shape()));
    }
    Adjoints adj(node_numel_.size());
    for (std::size_t i = 0; i < node_numel_.size(); ++i) adj[i].assign(node_numel_[i], 0.0);
    adj[static_cast<std::size_t>(output.node_)][0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)(adj);
    Gradients out;
    out.tape_id_ = id_;
    for (const auto& [node, shape] : leaves_) {
      out.grads_.emplace(node, Tensor(shape, std::move(adj[static_cast<std::size_t>(node)])));
    }
    return out;
  }

 private:
  static std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }

  std::uint64_t id_;
  std::vector<std::size_t> node_numel_;
  std::vector<std::function<void(Adjoints&)>> records_;
  std::unordered_map<int, Shape> leaves_;
};

inline int Tensor::node_on(const GradTape& tape) const { return tape.tracks(*this) ? node_ : -1; }

namespace detail {

inline bool tracked(const GradTape* tape, const Tensor& t) { return tape != nullptr && tape->tracks(t); }

// c(m x n) = a(m x k) . b(k x n); c must be zero-filled.
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c(m x k) += a(m x n) . b(k x n)^T
inline void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double s = 0.0;
      const double* arow = a + i * n;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      c[i * k + p] += s;
    }
  }
}

// c(k x n) += a(m x k)^T . b(m x n)
inline void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

inline double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

}  // namespace detail

// --- differentiable ops -----------------------------------------------------
// Every op computes eagerly; when `tape` is given and an input is tracked on
// it, a backward record is appended and the result becomes tracked too.

inline Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  detail::gemm_nn(a.data(), b.data(), out.data(), m, k, n);
  if (detail::tracked(tape, a) || detail::tracked(tape, b)) {
    const int na = a.node_on(*tape), nb = b.node_on(*tape);
    const int no = tape->make_node(out);
    tape->record([na, nb, no, m, k, n, av = a.values(), bv = b.values()](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      if (na >= 0) detail::gemm_nt_acc(dout.data(), bv.data(), adj[static_cast<std::size_t>(na)].data(), m, n, k);
      if (nb >= 0) detail::gemm_tn_acc(av.data(), dout.data(), adj[static_cast<std::size_t>(nb)].data(), k, m, n);
    });
  }
  return out;
}

namespace detail {

template <class Fwd, class Bwd>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b, GradTape* tape, Fwd fwd, Bwd bwd) {
  if (!same_shape(a, b)) {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i], b[i]);
  if (tracked(tape, a) || tracked(tape, b)) {
    const int na = a.node_on(*tape), nb = b.node_on(*tape);
    const int no = tape->make_node(out);
    bwd(na, nb, no);
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b, GradTape* tape = nullptr) {
  return detail::binary_elementwise(
      "add", a, b, tape, [](double x, double y) { return x + y; },
      [&](int na, int nb, int no) {
        tape->record([na, nb, no](GradTape::Adjoints& adj) {
          const auto& dout = adj[static_cast<std::size_t>(no)];
          if (na >= 0) {
            auto& da = adj[static_cast<std::size_t>(na)];
            for (std::size_t i = 0; i < dout.size(); ++i) da[i] += dout[i];
          }
          if (nb >= 0) {
            auto& db = adj[static_cast<std::size_t>(nb)];
            for (std::size_t i = 0; i < dout.size(); ++i) db[i] += dout[i];
          }
        });
      });
}

inline Tensor sub(const Tensor& a, const Tensor& b, GradTape* tape = nullptr) {
  return detail::binary_elementwise(
      "sub", a, b, tape, [](double x, double y) { return x - y; },
      [&](int na, int nb, int no) {
        tape->record([na, nb, no](GradTape::Adjoints& adj) {
          const auto& dout = adj[static_cast<std::size_t>(no)];
          if (na >= 0) {
            auto& da = adj[static_cast<std::size_t>(na)];
            for (std::size_t i = 0; i < dout.size(); ++i) da[i] += dout[i];
          }
          if (nb >= 0) {
            auto& db = adj[static_cast<std::size_t>(nb)];
            for (std::size_t i = 0; i < dout.size(); ++i) db[i] -= dout[i];
          }
        });
      });
}

inline Tensor mul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr) {
  return detail::binary_elementwise(
      "mul", a, b, tape, [](double x, double y) { return x * y; },
      [&](int na, int nb, int no) {
        tape->record([na, nb, no, av = a.values(), bv = b.values()](GradTape::Adjoints& adj) {
          const auto& dout = adj[static_cast<std::size_t>(no)];
          if (na >= 0) {
            auto& da = adj[static_cast<std::size_t>(na)];
            for (std::size_t i = 0; i < dout.size(); ++i) da[i] += dout[i] * bv[i];
          }
          if (nb >= 0) {
            auto& db = adj[static_cast<std::size_t>(nb)];
            for (std::size_t i = 0; i < dout.size(); ++i) db[i] += dout[i] * av[i];
          }
        });
      });
}

// Adds a length-C bias vector to every row of x, where C is x's last extent.
inline Tensor add_rowwise(const Tensor& x, const Tensor& bias, GradTape* tape = nullptr) {
  if (bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_rowwise: bias " + shape_str(bias.shape()) + " does not match last axis of " + shape_str(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  const std::size_t rows = x.size() / c;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x[r * c + j] + bias[j];
  }
  if (detail::tracked(tape, x) || detail::tracked(tape, bias)) {
    const int nx = x.node_on(*tape), nb = bias.node_on(*tape);
    const int no = tape->make_node(out);
    tape->record([nx, nb, no, rows, c](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      if (nx >= 0) {
        auto& dx = adj[static_cast<std::size_t>(nx)];
        for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += dout[i];
      }
      if (nb >= 0) {
        auto& db = adj[static_cast<std::size_t>(nb)];
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) db[j] += dout[r * c + j];
        }
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& x, double s, GradTape* tape = nullptr) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no, s](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += dout[i] * s;
    });
  }
  return out;
}

inline Tensor gelu(const Tensor& x, GradTape* tape = nullptr) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::gelu_value(x[i]);
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no, xv = x.values()](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += dout[i] * detail::gelu_slope(xv[i]);
    });
  }
  return out;
}

// Softmax over the last axis, numerically stabilised by row-max subtraction.
inline Tensor softmax_last_axis(const Tensor& x, GradTape* tape = nullptr) {
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * c;
    double* yr = out.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] /= z;
  }
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no, rows, c, yv = out.values()](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += dout[r * c + j] * yv[r * c + j];
        for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += yv[r * c + j] * (dout[r * c + j] - s);
      }
    });
  }
  return out;
}

inline constexpr double kLayerNormEps = 1e-5;

// Normalises each length-C row of x to zero mean / unit variance (biased
// variance estimate), then applies the elementwise affine gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps,
                         GradTape* tape = nullptr) {
  const std::size_t c = x.shape().back();
  if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != c || bias.dim(0) != c) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()) +
                     " do not match last axis of " + shape_str(x.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = x.size() / c;
  Tensor out(x.shape());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_sigma(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xr[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = inv;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mean) * inv;
      xhat[r * c + j] = h;
      out[r * c + j] = gain[j] * h + bias[j];
    }
  }
  if (detail::tracked(tape, x) || detail::tracked(tape, gain) || detail::tracked(tape, bias)) {
    const int nx = x.node_on(*tape), ng = gain.node_on(*tape), nb = bias.node_on(*tape);
    const int no = tape->make_node(out);
    tape->record([nx, ng, nb, no, rows, c, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma),
                  gv = gain.values()](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      for (std::size_t r = 0; r < rows; ++r) {
        if (ng >= 0) {
          auto& dg = adj[static_cast<std::size_t>(ng)];
          for (std::size_t j = 0; j < c; ++j) dg[j] += dout[r * c + j] * xhat[r * c + j];
        }
        if (nb >= 0) {
          auto& db = adj[static_cast<std::size_t>(nb)];
          for (std::size_t j = 0; j < c; ++j) db[j] += dout[r * c + j];
        }
        if (nx >= 0) {
          auto& dx = adj[static_cast<std::size_t>(nx)];
          double mean_dh = 0.0, mean_dh_xhat = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double dh = dout[r * c + j] * gv[j];
            mean_dh += dh;
            mean_dh_xhat += dh * xhat[r * c + j];
          }
          mean_dh /= static_cast<double>(c);
          mean_dh_xhat /= static_cast<double>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const double dh = dout[r * c + j] * gv[j];
            dx[r * c + j] += inv_sigma[r] * (dh - mean_dh - xhat[r * c + j] * mean_dh_xhat);
          }
        }
      }
    });
  }
  return out;
}

inline Tensor transpose2d(const Tensor& x, GradTape* tape = nullptr) {
  if (x.rank() != 2) throw ShapeError("transpose2d: expected rank-2 input, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  }
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no, m, n](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dout[j * m + i];
      }
    });
  }
  return out;
}

inline Tensor reshape(const Tensor& x, Shape shape, GradTape* tape = nullptr) {
  Tensor out(std::move(shape), x.values());
  if (out.size() != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(out.shape()));
  }
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += dout[i];
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x, GradTape* tape = nullptr) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no](GradTape::Adjoints& adj) {
      const double d = adj[static_cast<std::size_t>(no)][0];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (double& g : dx) g += d;
    });
  }
  return out;
}

// out[t] = x[index_map[t]]. Pure data movement; the backward pass scatter-adds
// adjoints through the same map, so duplicate sources accumulate.
inline Tensor gather_values(const Tensor& x, std::vector<std::size_t> index_map, Shape out_shape,
                            GradTape* tape = nullptr) {
  Tensor out(std::move(out_shape));
  if (index_map.size() != out.size()) {
    throw ShapeError("gather_values: index map of length " + std::to_string(index_map.size()) +
                     " does not fill shape " + shape_str(out.shape()));
  }
  for (std::size_t t = 0; t < index_map.size(); ++t) {
    if (index_map[t] >= x.size()) {
      throw ShapeError("gather_values: index " + std::to_string(index_map[t]) + " out of range for " +
                       std::to_string(x.size()) + " source values");
    }
    out[t] = x[index_map[t]];
  }
  if (detail::tracked(tape, x)) {
    const int nx = x.node(), no = tape->make_node(out);
    tape->record([nx, no, map = std::move(index_map)](GradTape::Adjoints& adj) {
      const auto& dout = adj[static_cast<std::size_t>(no)];
      auto& dx = adj[static_cast<std::size_t>(nx)];
      for (std::size_t t = 0; t < map.size(); ++t) dx[map[t]] += dout[t];
    });
  }
  return out;
}

inline Tensor uniform_tensor(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline Tensor normal_tensor(Shape shape, double mean, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(mean, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace laco
