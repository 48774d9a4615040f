// Sinusoidal residual MLP f: R^3 -> R with exact input gradients.
//
// Topology: a first sine layer (3 -> width), hidden_layers / 2 residual
// blocks of two sine layers each (block output = input + block(input)), and
// a linear head (width -> 1). Every sine layer computes sin(omega0 * (W x + b)).
//
// Input gradients come from pushing three tangent columns (d/dx, d/dy, d/dz)
// through the network next to the activations. Parameter gradients of losses
// that depend on those input gradients are obtained by reverse accumulation
// over the tangent-augmented forward pass.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nsf/common.hpp"
#include "nsf/kernels.hpp"

namespace nsf {

struct Architecture {
  int hidden_layers = 4;
  int width = 512;
  double omega0 = 30.0;

  void validate() const {
    if (hidden_layers < 0 || hidden_layers % 2 != 0)
      throw UsageError("hidden_layers must be a non-negative even number");
    if (width < 1) throw UsageError("width must be positive");
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw UsageError("omega0 must be positive");
  }
  int blocks() const { return hidden_layers / 2; }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Shape and offset of one layer inside the flat parameter vector. W is
/// rows x cols column-major and is followed by `rows` biases.
struct LayerShape {
  int rows = 0, cols = 0;
  std::size_t offset = 0;
  std::size_t weight_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::size_t size() const { return weight_count() + static_cast<std::size_t>(rows); }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Layers 0..hidden_layers are sine layers; the last entry is the head.
inline std::vector<LayerShape> layer_shapes(const Architecture& arch) {
  std::vector<LayerShape> out;
  std::size_t offset = 0;
  auto push = [&](int rows, int cols) {
    out.push_back({rows, cols, offset});
    offset += out.back().size();
  };
  push(arch.width, 3);
  for (int l = 0; l < arch.hidden_layers; ++l) push(arch.width, arch.width);
  push(1, arch.width);
  return out;
}

inline std::size_t param_count(const Architecture& arch) {
  const auto shapes = layer_shapes(arch);
  return shapes.back().offset + shapes.back().size();
}

template <class T>
struct GradientBundle {
  T value{};
  Vec3<T> grad{};
};

template <class T>
class StreamNet {
 public:
  using scalar_type = T;

  StreamNet(const Architecture& arch, std::uint64_t seed, std::vector<T> params)
      : arch_(arch), seed_(seed), shapes_(layer_shapes(arch)), params_(std::move(params)) {
    arch_.validate();
    if (params_.size() != param_count(arch_)) throw FormatError("parameter count does not match architecture");
  }

  const Architecture& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerShape>& shapes() const { return shapes_; }

  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }

  const T* weights(std::size_t layer) const { return params_.data() + shapes_[layer].offset; }
  const T* bias(std::size_t layer) const { return weights(layer) + shapes_[layer].weight_count(); }
  T* weights(std::size_t layer) { return params_.data() + shapes_[layer].offset; }
  T* bias(std::size_t layer) { return weights(layer) + shapes_[layer].weight_count(); }

  std::size_t head_index() const { return shapes_.size() - 1; }

  template <class U>
  StreamNet<U> cast() const {
    std::vector<U> p(params_.begin(), params_.end());
    return StreamNet<U>(arch_, seed_, std::move(p));
  }

  friend bool operator==(const StreamNet&, const StreamNet&) = default;

 private:
  Architecture arch_;
  std::uint64_t seed_ = 0;
  std::vector<LayerShape> shapes_;
  std::vector<T> params_;
};

/// Deterministic initialization from `seed`:
///   first layer  W ~ U(-1/3, 1/3), b ~ U(-1/sqrt 3, 1/sqrt 3)
///   hidden       W ~ U(-sqrt(6/width)/omega0, +), b ~ U(-1/sqrt width, +)
///   head         W ~ U(-sqrt(6/width), +),        b ~ U(-1/sqrt width, +)
/// Parameters are drawn in double from mt19937_64 and rounded to T, so float
/// and double nets from the same seed agree to float precision.
template <class T>
StreamNet<T> init_stream_net(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<T>(bound * (2.0 * u - 1.0));
  };
  const auto shapes = layer_shapes(arch);
  std::vector<T> params(param_count(arch));
  const double w = static_cast<double>(arch.width);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const LayerShape& s = shapes[l];
    double wb = 0.0, bb = 1.0 / std::sqrt(w);
    if (l == 0) {
      wb = 1.0 / 3.0;
      bb = 1.0 / std::sqrt(3.0);
    } else if (l + 1 < shapes.size()) {
      wb = std::sqrt(6.0 / w) / arch.omega0;
    } else {
      wb = std::sqrt(6.0 / w);
    }
    T* p = params.data() + s.offset;
    for (std::size_t n = 0; n < s.weight_count(); ++n) p[n] = uniform(wb);
    for (std::size_t n = 0; n < static_cast<std::size_t>(s.rows); ++n) p[s.weight_count() + n] = uniform(bb);
  }
  return StreamNet<T>(arch, seed, std::move(params));
}

/// Batched evaluator holding the forward tape for reverse accumulation.
///
/// Matrices are column-major with one column per sample. With tangents
/// enabled every activation matrix has 4 * batch columns: values first, then
/// the x, y and z tangent columns.
template <class T>
class Evaluator {
 public:
  /// Forward pass over `points`; with `tangents` the input gradients are
  /// propagated as well.
  void run(const StreamNet<T>& net, std::span<const Vec3<T>> points, bool tangents) {
    const Architecture& arch = net.arch();
    batch_ = points.size();
    ntan_ = tangents ? 3 : 0;
    width_ = static_cast<std::size_t>(arch.width);
    const std::size_t cols = columns();
    const std::size_t layers = static_cast<std::size_t>(arch.hidden_layers) + 1;
    omega_ = static_cast<T>(arch.omega0);

    input_.resize(3 * batch_);
    for (std::size_t s = 0; s < batch_; ++s) {
      input_[3 * s] = points[s].x;
      input_[3 * s + 1] = points[s].y;
      input_[3 * s + 2] = points[s].z;
    }
    pre_.resize(layers);
    sin_.resize(layers);
    cos_.resize(layers);
    stream_.resize(static_cast<std::size_t>(arch.blocks()) + 1);
    inner_.resize(static_cast<std::size_t>(arch.blocks()));

    // First layer, whose input tangents are the identity.
    {
      std::vector<T>& pre = pre_[0];
      pre.assign(width_ * batch_, T(0));
      kernels::gemm_acc<T>(width_, batch_, 3, net.weights(0), width_, input_.data(), 1, 3, pre.data(), width_);
      const T* b = net.bias(0);
      const T* W = net.weights(0);
      std::vector<T>& out = stream_[0];
      out.resize(width_ * cols);
      sin_[0].resize(width_ * batch_);
      cos_[0].resize(width_ * batch_);
      for (std::size_t s = 0; s < batch_; ++s)
        for (std::size_t i = 0; i < width_; ++i) {
          const std::size_t n = s * width_ + i;
          const T z = omega_ * (pre[n] + b[i]);
          pre[n] = z;
          const T sz = std::sin(z), cz = std::cos(z);
          sin_[0][n] = sz;
          cos_[0][n] = cz;
          out[n] = sz;
          for (std::size_t j = 0; j < ntan_; ++j) out[(j + 1) * batch_ * width_ + n] = cz * omega_ * W[j * width_ + i];
        }
    }

    for (std::size_t blk = 0; blk < stream_.size() - 1; ++blk) {
      const std::size_t l1 = 2 * blk + 1, l2 = 2 * blk + 2;
      sine_forward(net, l1, stream_[blk], inner_[blk]);
      std::vector<T>& next = stream_[blk + 1];
      sine_forward(net, l2, inner_[blk], next);
      const std::vector<T>& prev = stream_[blk];
      for (std::size_t n = 0; n < next.size(); ++n) next[n] += prev[n];
    }

    // Linear head.
    const std::size_t head = net.head_index();
    const std::vector<T>& last = stream_.back();
    out_.assign(cols, T(0));
    kernels::gemm_acc<T>(1, cols, width_, net.weights(head), 1, last.data(), 1, width_, out_.data(), 1);
    const T hb = *net.bias(head);
    for (std::size_t s = 0; s < batch_; ++s) out_[s] += hb;
    for (T v : out_)
      if (!std::isfinite(v)) throw NumericError("non-finite network output (are all parameters finite?)");
  }

  std::size_t batch() const { return batch_; }
  bool has_tangents() const { return ntan_ != 0; }

  T value(std::size_t s) const { return out_[s]; }
  Vec3<T> grad(std::size_t s) const {
    return {out_[batch_ + s], out_[2 * batch_ + s], out_[3 * batch_ + s]};
  }

  /// Accumulates d(loss)/d(params) into `param_grad` given d(loss)/d(f) per
  /// sample and, when tangents were run, d(loss)/d(grad f) per sample.
  void backward(const StreamNet<T>& net, std::span<const T> value_bar, std::span<const Vec3<T>> grad_bar,
                std::span<T> param_grad) {
    if (param_grad.size() != net.params().size()) throw UsageError("gradient buffer has wrong size");
    if (value_bar.size() != batch_) throw UsageError("value adjoint has wrong length");
    if (ntan_ == 0 && !grad_bar.empty()) throw UsageError("gradient adjoints need a tangent forward pass");
    if (ntan_ != 0 && grad_bar.size() != batch_) throw UsageError("gradient adjoint has wrong length");
    const std::size_t cols = columns();
    const auto& shapes = net.shapes();
    auto grad_of = [&](std::size_t layer) { return param_grad.data() + shapes[layer].offset; };

    // Head.
    std::vector<T> out_bar(cols);
    for (std::size_t s = 0; s < batch_; ++s) out_bar[s] = value_bar[s];
    for (std::size_t j = 0; j < ntan_; ++j)
      for (std::size_t s = 0; s < batch_; ++s) out_bar[(j + 1) * batch_ + s] = grad_bar[s][j];
    const std::size_t head = net.head_index();
    {
      T* gw = grad_of(head);
      kernels::gemm_acc<T>(1, width_, cols, out_bar.data(), 1, stream_.back().data(), width_, 1, gw, 1);
      T sb = 0;
      for (std::size_t s = 0; s < batch_; ++s) sb += value_bar[s];
      gw[width_] += sb;
    }
    stream_bar_.resize(width_ * cols);
    const T* wh = net.weights(head);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t i = 0; i < width_; ++i) stream_bar_[c * width_ + i] = wh[i] * out_bar[c];

    for (std::size_t blk = stream_.size() - 1; blk-- > 0;) {
      const std::size_t l1 = 2 * blk + 1, l2 = 2 * blk + 2;
      sine_backward(net, l2, inner_[blk], stream_bar_, inner_bar_, grad_of(l2));
      sine_backward(net, l1, stream_[blk], inner_bar_, scratch_bar_, grad_of(l1));
      for (std::size_t n = 0; n < stream_bar_.size(); ++n) stream_bar_[n] += scratch_bar_[n];
    }

    // First layer.
    const std::size_t plane = width_ * batch_;
    make_adjoint(0, stream_bar_, [&](std::size_t j, std::size_t, std::size_t i) {
      return omega_ * net.weights(0)[j * width_ + i];
    });
    T* gw = grad_of(0);
    kernels::gemm_acc<T>(width_, 3, batch_, g_.data(), width_, input_.data(), 3, 1, gw, width_);
    for (std::size_t j = 0; j < ntan_; ++j) {
      T* col = gw + j * width_;
      const T* gt = g_.data() + (j + 1) * plane;
      for (std::size_t s = 0; s < batch_; ++s)
        for (std::size_t i = 0; i < width_; ++i) col[i] += gt[s * width_ + i];
    }
    T* gb = gw + 3 * width_;
    for (std::size_t s = 0; s < batch_; ++s)
      for (std::size_t i = 0; i < width_; ++i) gb[i] += g_[s * width_ + i];
  }

 private:
  std::size_t columns() const { return batch_ * (1 + ntan_); }

  void sine_forward(const StreamNet<T>& net, std::size_t layer, const std::vector<T>& in, std::vector<T>& out) {
    const std::size_t cols = columns();
    std::vector<T>& pre = pre_[layer];
    pre.assign(width_ * cols, T(0));
    kernels::gemm_acc<T>(width_, cols, width_, net.weights(layer), width_, in.data(), 1, width_, pre.data(), width_);
    const T* b = net.bias(layer);
    const std::size_t plane = width_ * batch_;
    out.resize(width_ * cols);
    sin_[layer].resize(plane);
    cos_[layer].resize(plane);
    for (std::size_t n = 0; n < plane; ++n) {
      const T z = omega_ * (pre[n] + b[n % width_]);
      pre[n] = z;
      const T sz = std::sin(z), cz = std::cos(z);
      sin_[layer][n] = sz;
      cos_[layer][n] = cz;
      out[n] = sz;
    }
    for (std::size_t j = 1; j <= ntan_; ++j) {
      T* t = pre.data() + j * plane;
      T* o = out.data() + j * plane;
      const T* cz = cos_[layer].data();
      for (std::size_t n = 0; n < plane; ++n) {
        t[n] *= omega_;
        o[n] = cz[n] * t[n];
      }
    }
  }

  // g_ <- omega * d(loss)/d(pre-activation) for sine layer `layer`, given the
  // adjoint of its outputs. `tangent(j, s, i)` returns the tangent t_j of the
  // pre-activation (already scaled by omega).
  template <class Tangent>
  void make_adjoint(std::size_t layer, const std::vector<T>& out_bar, Tangent tangent) {
    const std::size_t plane = width_ * batch_;
    g_.resize(width_ * columns());
    const T* sz = sin_[layer].data();
    const T* cz = cos_[layer].data();
    for (std::size_t s = 0; s < batch_; ++s)
      for (std::size_t i = 0; i < width_; ++i) {
        const std::size_t n = s * width_ + i;
        T acc = out_bar[n] * cz[n];
        for (std::size_t j = 0; j < ntan_; ++j) acc -= sz[n] * out_bar[(j + 1) * plane + n] * tangent(j, s, i);
        g_[n] = omega_ * acc;
      }
    for (std::size_t j = 0; j < ntan_; ++j) {
      const T* ab = out_bar.data() + (j + 1) * plane;
      T* g = g_.data() + (j + 1) * plane;
      for (std::size_t n = 0; n < plane; ++n) g[n] = omega_ * ab[n] * cz[n];
    }
  }

  void sine_backward(const StreamNet<T>& net, std::size_t layer, const std::vector<T>& in,
                     const std::vector<T>& out_bar, std::vector<T>& in_bar, T* grad) {
    const std::size_t cols = columns();
    const std::size_t plane = width_ * batch_;
    const std::vector<T>& pre = pre_[layer];
    make_adjoint(layer, out_bar, [&](std::size_t j, std::size_t s, std::size_t i) {
      return pre[(j + 1) * plane + s * width_ + i];
    });
    kernels::gemm_acc<T>(width_, width_, cols, g_.data(), width_, in.data(), width_, 1, grad, width_);
    T* gb = grad + width_ * width_;
    for (std::size_t s = 0; s < batch_; ++s)
      for (std::size_t i = 0; i < width_; ++i) gb[i] += g_[s * width_ + i];

    const T* W = net.weights(layer);
    wt_.resize(width_ * width_);
    for (std::size_t k = 0; k < width_; ++k)
      for (std::size_t i = 0; i < width_; ++i) wt_[i * width_ + k] = W[k * width_ + i];
    in_bar.assign(width_ * cols, T(0));
    kernels::gemm_acc<T>(width_, cols, width_, wt_.data(), width_, g_.data(), 1, width_, in_bar.data(), width_);
  }

  std::size_t batch_ = 0, ntan_ = 0, width_ = 0;
  T omega_ = T(1);
  std::vector<T> input_;
  std::vector<std::vector<T>> pre_, sin_, cos_;
  std::vector<std::vector<T>> stream_;  // residual stream after the first layer and after each block
  std::vector<std::vector<T>> inner_;   // output of the first layer inside each block
  std::vector<T> out_;
  std::vector<T> stream_bar_, inner_bar_, scratch_bar_, g_, wt_;
};

namespace detail {
inline constexpr std::size_t kEvalChunk = 2048;
}

/// f at every point; batched and pointwise results are bit-identical.
template <class T>
void forward_batch(const StreamNet<T>& net, std::span<const Vec3<T>> points, std::span<T> values) {
  if (values.size() != points.size()) throw UsageError("output span has wrong length");
  Evaluator<T> ev;
  for (std::size_t start = 0; start < points.size(); start += detail::kEvalChunk) {
    const std::size_t n = std::min(detail::kEvalChunk, points.size() - start);
    ev.run(net, points.subspan(start, n), false);
    for (std::size_t s = 0; s < n; ++s) values[start + s] = ev.value(s);
  }
}

template <class T>
void forward_with_grad_batch(const StreamNet<T>& net, std::span<const Vec3<T>> points, std::span<T> values,
                             std::span<Vec3<T>> grads) {
  if (values.size() != points.size() || grads.size() != points.size())
    throw UsageError("output span has wrong length");
  Evaluator<T> ev;
  for (std::size_t start = 0; start < points.size(); start += detail::kEvalChunk) {
    const std::size_t n = std::min(detail::kEvalChunk, points.size() - start);
    ev.run(net, points.subspan(start, n), true);
    for (std::size_t s = 0; s < n; ++s) {
      values[start + s] = ev.value(s);
      grads[start + s] = ev.grad(s);
    }
  }
}

template <class T>
T forward(const StreamNet<T>& net, const Vec3<T>& x) {
  T v{};
  forward_batch<T>(net, std::span<const Vec3<T>>(&x, 1), std::span<T>(&v, 1));
  return v;
}

template <class T>
GradientBundle<T> forward_with_grad(const StreamNet<T>& net, const Vec3<T>& x) {
  GradientBundle<T> out;
  forward_with_grad_batch<T>(net, std::span<const Vec3<T>>(&x, 1), std::span<T>(&out.value, 1),
                             std::span<Vec3<T>>(&out.grad, 1));
  return out;
}

}  // namespace nsf
