/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/rng.hpp"

namespace curpo::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Dense {
  Matrix weight;  // out x in
  Vector bias;    // out

  Eigen::Index in() const noexcept { return weight.cols(); }
  Eigen::Index out() const noexcept { return weight.rows(); }
  Eigen::Index size() const noexcept { return weight.size() + bias.size(); }

  friend bool operator==(const Dense& a, const Dense& b) {
    return a.weight.rows() == b.weight.rows() &&
           a.weight.cols() == b.weight.cols() && a.bias.size() == b.bias.size() &&
           a.weight == b.weight && a.bias == b.bias;
  }
};

struct ParamsTag {};
struct GradientsTag {};

/// Tanh MLP trunk followed by independent linear heads. Parameters and
/// gradients share this layout and differ only by tag, so a gradient can
/// never be passed where parameters are expected.
template <class Tag>
struct LayerStack {
  std::vector<Dense> hidden;
  std::vector<Dense> heads;

  std::size_t input_dim() const {
    if (!hidden.empty()) return static_cast<std::size_t>(hidden.front().in());
    return heads.empty() ? 0 : static_cast<std::size_t>(heads.front().in());
  }
  std::size_t trunk_dim() const {
    return hidden.empty() ? input_dim()
                          : static_cast<std::size_t>(hidden.back().out());
  }
  std::size_t num_heads() const noexcept { return heads.size(); }
  std::size_t classes() const {
    return heads.empty() ? 0 : static_cast<std::size_t>(heads.front().out());
  }

  /// Total number of scalar coordinates.
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : hidden) n += static_cast<std::size_t>(l.size());
    for (const auto& l : heads) n += static_cast<std::size_t>(l.size());
    return n;
  }

  /// Flat coordinate i in order: hidden layers, then heads; each layer is
  /// weight (column-major) followed by bias.
  double& coord(std::size_t i) { return locate(*this, i); }
  double coord(std::size_t i) const {
    return locate(const_cast<LayerStack&>(*this), i);
  }

  template <class Fn>
  void for_each_layer(Fn&& fn) {
    for (auto& l : hidden) fn(l);
    for (auto& l : heads) fn(l);
  }
  template <class Fn>
  void for_each_layer(Fn&& fn) const {
    for (const auto& l : hidden) fn(l);
    for (const auto& l : heads) fn(l);
  }

  template <class Other>
  bool same_shape(const LayerStack<Other>& o) const {
    if (hidden.size() != o.hidden.size() || heads.size() != o.heads.size())
      return false;
    auto eq = [](const Dense& a, const Dense& b) {
      return a.weight.rows() == b.weight.rows() &&
             a.weight.cols() == b.weight.cols() && a.bias.size() == b.bias.size();
    };
    for (std::size_t i = 0; i < hidden.size(); ++i)
      if (!eq(hidden[i], o.hidden[i])) return false;
    for (std::size_t i = 0; i < heads.size(); ++i)
      if (!eq(heads[i], o.heads[i])) return false;
    return true;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_layer([&](const Dense& l) {
      ok = ok && l.weight.allFinite() && l.bias.allFinite();
    });
    return ok;
  }

  template <class Other>
  static LayerStack zeros_like(const LayerStack<Other>& o) {
    LayerStack z;
    auto zero = [](const Dense& l) {
      return Dense{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                   Vector::Zero(l.bias.size())};
    };
    for (const auto& l : o.hidden) z.hidden.push_back(zero(l));
    for (const auto& l : o.heads) z.heads.push_back(zero(l));
    return z;
  }

  /// this += scale * other
  template <class Other>
  void add_scaled(const LayerStack<Other>& other, double scale) {
    if (!same_shape(other))
      throw std::invalid_argument("add_scaled: shape mismatch");
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      hidden[i].weight += scale * other.hidden[i].weight;
      hidden[i].bias += scale * other.hidden[i].bias;
    }
    for (std::size_t i = 0; i < heads.size(); ++i) {
      heads[i].weight += scale * other.heads[i].weight;
      heads[i].bias += scale * other.heads[i].bias;
    }
  }

  friend bool operator==(const LayerStack&, const LayerStack&) = default;

 private:
  static double& locate(LayerStack& s, std::size_t i) {
    auto in_layer = [&i](Dense& l) -> double* {
      const auto w = static_cast<std::size_t>(l.weight.size());
      if (i < w) return l.weight.data() + i;
      i -= w;
      const auto b = static_cast<std::size_t>(l.bias.size());
      if (i < b) return l.bias.data() + i;
      i -= b;
      return nullptr;
    };
    for (auto& l : s.hidden)
      if (double* p = in_layer(l)) return *p;
    for (auto& l : s.heads)
      if (double* p = in_layer(l)) return *p;
    throw std::out_of_range("coordinate index out of range");
  }
};

using MlpParams = LayerStack<ParamsTag>;
using Gradients = LayerStack<GradientsTag>;

/// Glorot-uniform weights, zero biases. `hidden_dims` may be empty, in which
/// case the heads read the input directly.
inline MlpParams init_layers(std::size_t input_dim,
                             const std::vector<std::size_t>& hidden_dims,
                             std::size_t heads, std::size_t classes_per_head,
                             std::uint64_t seed) {
  if (input_dim == 0 || heads == 0 || classes_per_head == 0 ||
      std::any_of(hidden_dims.begin(), hidden_dims.end(),
                  [](std::size_t d) { return d == 0; }))
    throw std::invalid_argument("nn::init: all dimensions must be >= 1");

  Rng rng(derive_seed(seed, Stream::Init));
  auto make = [&rng](std::size_t in, std::size_t out) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    Dense l{Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
            Vector::Zero(static_cast<Eigen::Index>(out))};
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        l.weight(r, c) = rng.uniform(-a, a);
    return l;
  };

  MlpParams p;
  std::size_t in = input_dim;
  for (std::size_t h : hidden_dims) {
    p.hidden.push_back(make(in, h));
    in = h;
  }
  for (std::size_t h = 0; h < heads; ++h)
    p.heads.push_back(make(in, classes_per_head));
  return p;
}

inline MlpParams init(std::size_t input_dim, std::size_t hidden_dim,
                      std::size_t heads, std::size_t classes_per_head,
                      std::uint64_t seed) {
  if (hidden_dim == 0)
    throw std::invalid_argument("nn::init: all dimensions must be >= 1");
  return init_layers(input_dim, {hidden_dim}, heads, classes_per_head, seed);
}

struct ForwardCache {
  Vector input;
  std::vector<Vector> activations;  // tanh output of each hidden layer
};

struct ForwardResult {
  std::vector<Vector> logits;  // one per head
  ForwardCache cache;
};

inline ForwardResult forward(const MlpParams& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.input_dim())
    throw std::invalid_argument("nn::forward: input has " +
                                std::to_string(x.size()) + " features, expected " +
                                std::to_string(p.input_dim()));
  ForwardResult r;
  r.cache.input = x;
  const Vector* h = &r.cache.input;
  for (const auto& l : p.hidden) {
    r.cache.activations.push_back((l.weight * *h + l.bias).array().tanh().matrix());
    h = &r.cache.activations.back();
  }
  r.logits.reserve(p.heads.size());
  for (const auto& head : p.heads) r.logits.push_back(head.weight * *h + head.bias);
  return r;
}

/// Accumulates d(sum_h <dlogits_h, logits_h>)/d(theta) into `grads`.
inline void backward_accumulate(const MlpParams& p, const ForwardCache& cache,
                                const std::vector<Vector>& dlogits,
                                Gradients& grads) {
  if (dlogits.size() != p.heads.size() || !grads.same_shape(p) ||
      cache.activations.size() != p.hidden.size() ||
      static_cast<std::size_t>(cache.input.size()) != p.input_dim())
    throw std::invalid_argument("nn::backward: shape mismatch");

  const Vector& top = p.hidden.empty() ? cache.input : cache.activations.back();
  Vector dtop = Vector::Zero(top.size());
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    if (dlogits[h].size() != p.heads[h].out())
      throw std::invalid_argument("nn::backward: head gradient size mismatch");
    grads.heads[h].weight.noalias() += dlogits[h] * top.transpose();
    grads.heads[h].bias += dlogits[h];
    dtop.noalias() += p.heads[h].weight.transpose() * dlogits[h];
  }

  for (std::size_t k = p.hidden.size(); k-- > 0;) {
    const Vector& act = cache.activations[k];
    const Vector& below = k == 0 ? cache.input : cache.activations[k - 1];
    const Vector dz = (dtop.array() * (1.0 - act.array().square())).matrix();
    grads.hidden[k].weight.noalias() += dz * below.transpose();
    grads.hidden[k].bias += dz;
    if (k > 0) dtop = p.hidden[k].weight.transpose() * dz;
  }
}

inline Gradients backward(const MlpParams& p, const ForwardCache& cache,
                          const std::vector<Vector>& dlogits) {
  Gradients g = Gradients::zeros_like(p);
  backward_accumulate(p, cache, dlogits, g);
  return g;
}

/// Ascent step: theta + lr * g.
inline MlpParams sgd_step(const MlpParams& p, const Gradients& g, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
  if (!p.same_shape(g)) throw std::invalid_argument("sgd_step: shape mismatch");
  MlpParams out = p;
  out.add_scaled(g, lr);
  return out;
}

/// Adam applied as an ascent optimizer on the objective.
class Adam {
 public:
  Adam(const MlpParams& like, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Gradients::zeros_like(like)), v_(Gradients::zeros_like(like)) {
    if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  }

  void step(MlpParams& p, const Gradients& g) {
    if (!p.same_shape(g)) throw std::invalid_argument("Adam: shape mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g.coord(i);
      double& m = m_.coord(i);
      double& v = v_.coord(i);
      m = beta1_ * m + (1.0 - beta1_) * gi;
      v = beta2_ * v + (1.0 - beta2_) * gi * gi;
      p.coord(i) += lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  Gradients m_, v_;
  std::uint64_t t_ = 0;
};

/// Central-difference check of `analytic` against `loss`. Checks every
/// coordinate when there are at most `max_coords`, otherwise a seeded sample
/// of that many. Returns max |a - n| / max(1e-8, |a| + |n|).
template <class LossFn>
double grad_check(LossFn&& loss, const MlpParams& p, const Gradients& analytic,
                  double eps = 1e-5, std::size_t max_coords = 200,
                  std::uint64_t seed = 0) {
  if (!p.same_shape(analytic))
    throw std::invalid_argument("grad_check: shape mismatch");
  const std::size_t n = p.size();
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (n > max_coords) {
    Rng rng(seed);
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  MlpParams probe = p;
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double orig = probe.coord(i);
    probe.coord(i) = orig + eps;
    const double up = loss(static_cast<const MlpParams&>(probe));
    probe.coord(i) = orig - eps;
    const double down = loss(static_cast<const MlpParams&>(probe));
    probe.coord(i) = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.coord(i);
    const double rel =
        std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace curpo::nn
