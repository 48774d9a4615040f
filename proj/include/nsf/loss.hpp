// Training losses and their parameter gradients.
//
//   perp  : mean |grad f . V|
//   pss   : mean 1 - cos^2(grad f, N), N the principal normal of the flow
//   seeds : mean |f(s)| over rake samples (signed mean behind a flag)
#pragma once

#include <span>
#include <string>
#include <vector>

#include "nsf/net.hpp"

namespace nsf {

enum class LossKind { perp, pss, seeds, perp_seeds, pss_seeds };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::perp: return "perp";
    case LossKind::pss: return "pss";
    case LossKind::seeds: return "seeds";
    case LossKind::perp_seeds: return "perp+seeds";
    case LossKind::pss_seeds: return "pss+seeds";
  }
  return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
  for (LossKind k : {LossKind::perp, LossKind::pss, LossKind::seeds, LossKind::perp_seeds, LossKind::pss_seeds})
    if (to_string(k) == s) return k;
  throw UsageError("unknown loss '" + s + "' (expected perp, pss, seeds, perp+seeds or pss+seeds)");
}

inline bool uses_perp(LossKind k) { return k == LossKind::perp || k == LossKind::perp_seeds; }
inline bool uses_pss(LossKind k) { return k == LossKind::pss || k == LossKind::pss_seeds; }
inline bool uses_seeds(LossKind k) {
  return k == LossKind::seeds || k == LossKind::perp_seeds || k == LossKind::pss_seeds;
}

namespace detail {
template <class T>
double sign_of(T v) {
  return v > T(0) ? 1.0 : (v < T(0) ? -1.0 : 0.0);
}
}  // namespace detail

template <class T>
double loss_perp(std::span<const Vec3<T>> grads, std::span<const Vec3<T>> vectors) {
  if (grads.size() != vectors.size()) throw UsageError("loss_perp: length mismatch");
  if (grads.empty()) throw UsageError("loss_perp: empty batch");
  double sum = 0.0;
  for (std::size_t s = 0; s < grads.size(); ++s) sum += std::abs(dot(grads[s].template cast<double>(), vectors[s].template cast<double>()));
  return sum / static_cast<double>(grads.size());
}

struct PssValue {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t masked = 0;
};

/// Entries where either vector is shorter than kDegenerateNorm are excluded
/// and counted in `masked`.
template <class T>
PssValue loss_pss(std::span<const Vec3<T>> grads, std::span<const Vec3<T>> normals) {
  if (grads.size() != normals.size()) throw UsageError("loss_pss: length mismatch");
  PssValue out;
  double sum = 0.0;
  for (std::size_t s = 0; s < grads.size(); ++s) {
    const Vec3d g = grads[s].template cast<double>(), n = normals[s].template cast<double>();
    const double q = dot(g, g), r = dot(n, n);
    if (std::sqrt(q) < kDegenerateNorm || std::sqrt(r) < kDegenerateNorm) {
      ++out.masked;
      continue;
    }
    const double c = dot(g, n);
    sum += 1.0 - std::clamp(c * c / (q * r), 0.0, 1.0);
    ++out.used;
  }
  if (out.used == 0) throw UsageError("loss_pss: no usable samples after masking");
  out.value = sum / static_cast<double>(out.used);
  return out;
}

/// Mean |f(s)|, or the plain signed mean when `signed_mean` is set.
template <class T>
double loss_seeds(std::span<const T> values, bool signed_mean = false) {
  if (values.empty()) throw UsageError("loss_seeds: empty seed set");
  double sum = 0.0;
  for (T v : values) sum += signed_mean ? static_cast<double>(v) : std::abs(static_cast<double>(v));
  return sum / static_cast<double>(values.size());
}

/// Sample locations with the per-sample target vector: V for perp, N for pss.
template <class T>
struct LossBatch {
  std::vector<Vec3<T>> points;
  std::vector<Vec3<T>> vectors;
};

struct LossOptions {
  double seeds_weight = 1.0;
  bool seeds_signed = false;
};

struct LossParts {
  double main = 0.0;   // perp or pss term
  double seeds = 0.0;  // unweighted seed term
  double total = 0.0;  // main + seeds_weight * seeds
  std::size_t masked = 0;
};

/// Computes losses and, on request, their parameter gradients. Holds the
/// evaluators so repeated calls reuse their buffers.
template <class T>
class LossGradient {
 public:
  /// Returns the loss parts; when `grad` is non-empty it is overwritten with
  /// d(total)/d(params).
  LossParts compute(const StreamNet<T>& net, LossKind kind, const LossBatch<T>& batch,
                    std::span<const Vec3<T>> seeds, const LossOptions& opts, std::span<T> grad) {
    const bool want_grad = !grad.empty();
    if (want_grad) {
      if (grad.size() != net.params().size()) throw UsageError("gradient buffer has wrong size");
      std::fill(grad.begin(), grad.end(), T(0));
    }
    LossParts parts;
    if (uses_perp(kind) || uses_pss(kind)) parts.main = main_term(net, kind, batch, want_grad, grad, parts.masked);
    if (uses_seeds(kind)) {
      if (seeds.empty()) throw UsageError("loss needs rake seeds");
      parts.seeds = seed_term(net, seeds, opts, want_grad, grad);
    }
    parts.total = parts.main + (uses_seeds(kind) ? opts.seeds_weight * parts.seeds : 0.0);
    return parts;
  }

 private:
  double main_term(const StreamNet<T>& net, LossKind kind, const LossBatch<T>& batch, bool want_grad,
                   std::span<T> grad, std::size_t& masked) {
    const std::size_t n = batch.points.size();
    if (n == 0) throw UsageError("empty batch");
    if (batch.vectors.size() != n) throw UsageError("batch points and vectors differ in length");
    std::size_t live = 0;
    for (const auto& v : batch.vectors)
      if (norm(v.template cast<double>()) >= kDegenerateNorm) ++live;
    if (live == 0) throw UsageError("every sample in the batch is degenerate");

    main_.run(net, batch.points, true);
    grads_.resize(n);
    for (std::size_t s = 0; s < n; ++s) grads_[s] = main_.grad(s);
    const std::span<const Vec3<T>> g(grads_), v(batch.vectors);

    double value = 0.0;
    grad_bar_.assign(n, Vec3<T>{});
    if (uses_perp(kind)) {
      value = loss_perp<T>(g, v);
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t s = 0; s < n; ++s) {
        const Vec3d vd = v[s].template cast<double>();
        const double sg = detail::sign_of(dot(g[s].template cast<double>(), vd));
        grad_bar_[s] = (vd * (sg * inv)).template cast<T>();
      }
    } else {
      const PssValue pss = loss_pss<T>(g, v);
      value = pss.value;
      masked = pss.masked;
      const double inv = 1.0 / static_cast<double>(pss.used);
      for (std::size_t s = 0; s < n; ++s) {
        const Vec3d gd = g[s].template cast<double>(), nd = v[s].template cast<double>();
        const double q = dot(gd, gd), r = dot(nd, nd);
        if (std::sqrt(q) < kDegenerateNorm || std::sqrt(r) < kDegenerateNorm) continue;
        const double c = dot(gd, nd);
        // d/dg [1 - c^2 / (q r)] = -(2c / (q r)) (n - (c / q) g)
        const double k = -2.0 * c / (q * r) * inv;
        grad_bar_[s] = ((nd - gd * (c / q)) * k).template cast<T>();
      }
    }
    if (want_grad) {
      value_bar_.assign(n, T(0));
      main_.backward(net, value_bar_, grad_bar_, grad);
    }
    return value;
  }

  double seed_term(const StreamNet<T>& net, std::span<const Vec3<T>> seeds, const LossOptions& opts, bool want_grad,
                   std::span<T> grad) {
    seed_eval_.run(net, seeds, false);
    const std::size_t n = seeds.size();
    seed_values_.resize(n);
    for (std::size_t s = 0; s < n; ++s) seed_values_[s] = seed_eval_.value(s);
    const double value = loss_seeds<T>(seed_values_, opts.seeds_signed);
    if (want_grad) {
      const double scale = opts.seeds_weight / static_cast<double>(n);
      value_bar_.resize(n);
      for (std::size_t s = 0; s < n; ++s)
        value_bar_[s] = static_cast<T>(scale * (opts.seeds_signed ? 1.0 : detail::sign_of(seed_values_[s])));
      seed_eval_.backward(net, value_bar_, {}, grad);
    }
    return value;
  }

  Evaluator<T> main_, seed_eval_;
  std::vector<Vec3<T>> grads_, grad_bar_;
  std::vector<T> value_bar_, seed_values_;
};

/// Total loss only (no gradients).
template <class T>
LossParts evaluate_loss(const StreamNet<T>& net, LossKind kind, const LossBatch<T>& batch,
                        std::span<const Vec3<T>> seeds, const LossOptions& opts = {}) {
  LossGradient<T> lg;
  return lg.compute(net, kind, batch, seeds, opts, {});
}

/// d(loss)/d(params) in the flat parameter layout of `net`.
template <class T>
std::vector<T> param_gradients(const StreamNet<T>& net, LossKind kind, const LossBatch<T>& batch,
                               std::span<const Vec3<T>> seeds = {}, const LossOptions& opts = {},
                               LossParts* parts = nullptr) {
  std::vector<T> grad(net.params().size());
  LossGradient<T> lg;
  const LossParts p = lg.compute(net, kind, batch, seeds, opts, grad);
  if (parts) *parts = p;
  return grad;
}

}  // namespace nsf
