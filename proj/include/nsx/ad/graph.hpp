// Copyright 2026 The nsx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSX_AD_GRAPH_HPP_
#define NSX_AD_GRAPH_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nsx/core/tensor.hpp"

namespace nsx {
namespace ad {

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

// Named trainable tensor plus its gradient accumulator. Optimizer state is
// kept by the trainer, keyed by the same index.
template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
};

template <typename S>
class ParamStore {
 public:
  int add(std::string name, Tensor<S> init) {
    if (index_.count(name)) throw std::invalid_argument("param exists: " + name);
    int id = static_cast<int>(params_.size());
    Tensor<S> g(init.shape());
    params_.push_back(Param<S>{name, std::move(init), std::move(g)});
    index_.emplace(params_.back().name, id);
    return id;
  }

  Param<S>& at(int i) { return params_.at(static_cast<size_t>(i)); }
  const Param<S>& at(int i) const { return params_.at(static_cast<size_t>(i)); }
  int find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }
  int size() const { return static_cast<int>(params_.size()); }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(S(0));
  }

  int64_t count_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Param<S>> params_;
  std::unordered_map<std::string, int> index_;
};

// Reverse-mode tape. Nodes are appended in forward order; backward walks
// the arena in reverse calling each node's closure with its own id so the
// closure can read the incoming gradient. Gradients allocate lazily so
// untouched branches cost nothing.
template <typename S>
class Graph {
 public:
  using BackFn = std::function<void(Graph&, int)>;

  struct Node {
    Tensor<S> val;
    Tensor<S> grad;
    BackFn back;
    Tensor<S>* sink = nullptr;
  };

  int make(Tensor<S> val, BackFn back = nullptr) {
    nodes_.push_back(Node{std::move(val), Tensor<S>(), std::move(back), nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int leaf(Tensor<S> val) { return make(std::move(val)); }

  int param(Param<S>& p) {
    int id = make(p.value);
    nodes_[static_cast<size_t>(id)].sink = &p.grad;
    return id;
  }

  const Tensor<S>& val(int id) const { return nodes_.at(static_cast<size_t>(id)).val; }

  bool has_grad(int id) const { return nodes_.at(static_cast<size_t>(id)).grad.defined(); }

  Tensor<S>& grad(int id) {
    Node& n = nodes_.at(static_cast<size_t>(id));
    if (!n.grad.defined()) n.grad = Tensor<S>(n.val.shape());
    return n.grad;
  }

  void backward(int loss) {
    if (val(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad(loss)[0] = S(1);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.grad.defined()) continue;
      if (n.back) n.back(*this, i);
      if (n.sink) {
        S* dst = n.sink->data();
        const S* src = n.grad.data();
        for (int64_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
      }
    }
  }

  void clear() { nodes_.clear(); }
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename S>
inline void axpy(Tensor<S>& dst, const Tensor<S>& src) {
  S* d = dst.data();
  const S* s = src.data();
  for (int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

inline std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[static_cast<size_t>(i)] = st[static_cast<size_t>(i + 1)] * shape[static_cast<size_t>(i + 1)];
  return st;
}

}  // namespace detail

// ---- elementwise ----

template <typename S>
int add(Graph<S>& g, int a, int b) {
  if (!g.val(a).same_shape(g.val(b))) throw std::invalid_argument("add: shape mismatch");
  Tensor<S> y = g.val(a).clone();
  detail::axpy(y, g.val(b));
  return g.make(std::move(y), [a, b](Graph<S>& gr, int self) {
    detail::axpy(gr.grad(a), gr.grad(self));
    detail::axpy(gr.grad(b), gr.grad(self));
  });
}

template <typename S>
int scale(Graph<S>& g, int a, S c) {
  Tensor<S> y = g.val(a).clone();
  S* d = y.data();
  for (int64_t i = 0; i < y.size(); ++i) d[i] *= c;
  return g.make(std::move(y), [a, c](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += c * gy[i];
  });
}

template <typename S>
int hadamard(Graph<S>& g, int a, int b) {
  if (!g.val(a).same_shape(g.val(b))) throw std::invalid_argument("hadamard: shape mismatch");
  Tensor<S> y = g.val(a).clone();
  const Tensor<S>& vb = g.val(b);
  for (int64_t i = 0; i < y.size(); ++i) y[i] *= vb[i];
  return g.make(std::move(y), [a, b](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    const Tensor<S>& va = gr.val(a);
    const Tensor<S>& vb2 = gr.val(b);
    Tensor<S>& ga = gr.grad(a);
    Tensor<S>& gb = gr.grad(b);
    for (int64_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * vb2[i];
      gb[i] += gy[i] * va[i];
    }
  });
}

// y = sqrt(x + eps), eps keeps the gradient finite at zero
template <typename S>
int sqrt_eps(Graph<S>& g, int a, S eps) {
  Tensor<S> y = g.val(a).clone();
  S* d = y.data();
  for (int64_t i = 0; i < y.size(); ++i) d[i] = std::sqrt(d[i] + eps);
  return g.make(std::move(y), [a](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    const Tensor<S>& yv = gr.val(self);
    Tensor<S>& ga = gr.grad(a);
    for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * S(0.5) / yv[i];
  });
}

// ---- shape plumbing ----

template <typename S>
int reshape(Graph<S>& g, int a, std::vector<int64_t> shape) {
  Tensor<S> y = g.val(a).reshaped(std::move(shape));
  return g.make(std::move(y), [a](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    S* d = ga.data();
    const S* s = gy.data();
    for (int64_t i = 0; i < ga.size(); ++i) d[i] += s[i];
  });
}

template <typename S>
int permute(Graph<S>& g, int a, std::vector<int> perm) {
  const Tensor<S>& x = g.val(a);
  if (static_cast<int>(perm.size()) != x.rank()) throw std::invalid_argument("permute: rank mismatch");
  std::vector<int64_t> in_shape = x.shape();
  std::vector<int64_t> out_shape(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
  std::vector<int64_t> in_st = detail::strides_of(in_shape);
  std::vector<int64_t> out_st = detail::strides_of(out_shape);
  // stride of output axis i in the input buffer
  std::vector<int64_t> gather(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) gather[i] = in_st[static_cast<size_t>(perm[i])];

  Tensor<S> y(out_shape);
  int64_t n = y.size();
  int rank = x.rank();
  const S* src = x.data();
  S* dst = y.data();
  for (int64_t o = 0; o < n; ++o) {
    int64_t rem = o, idx = 0;
    for (int i = 0; i < rank; ++i) {
      int64_t c = rem / out_st[static_cast<size_t>(i)];
      rem -= c * out_st[static_cast<size_t>(i)];
      idx += c * gather[static_cast<size_t>(i)];
    }
    dst[o] = src[idx];
  }
  return g.make(std::move(y), [a, out_st, gather, rank](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    const S* s = gy.data();
    S* d = ga.data();
    int64_t n2 = gy.size();
    for (int64_t o = 0; o < n2; ++o) {
      int64_t rem = o, idx = 0;
      for (int i = 0; i < rank; ++i) {
        int64_t c = rem / out_st[static_cast<size_t>(i)];
        rem -= c * out_st[static_cast<size_t>(i)];
        idx += c * gather[static_cast<size_t>(i)];
      }
      d[idx] += s[o];
    }
  });
}

template <typename S>
int slice(Graph<S>& g, int a, int axis, int64_t start, int64_t len) {
  const Tensor<S>& x = g.val(a);
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("slice: bad axis");
  if (start < 0 || start + len > x.dim(axis)) throw std::invalid_argument("slice: out of range");
  std::vector<int64_t> shape = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
  int64_t d_in = shape[static_cast<size_t>(axis)];
  shape[static_cast<size_t>(axis)] = len;

  Tensor<S> y(shape);
  const S* src = x.data();
  S* dst = y.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t k = 0; k < len; ++k)
      std::copy(src + (o * d_in + start + k) * inner, src + (o * d_in + start + k + 1) * inner,
                dst + (o * len + k) * inner);
  return g.make(std::move(y), [a, start, len, outer, inner, d_in](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    S* d = ga.data();
    const S* s = gy.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t k = 0; k < len; ++k) {
        S* drow = d + (o * d_in + start + k) * inner;
        const S* srow = s + (o * len + k) * inner;
        for (int64_t i = 0; i < inner; ++i) drow[i] += srow[i];
      }
  });
}

template <typename S>
int concat(Graph<S>& g, const std::vector<int>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: empty list");
  const Tensor<S>& first = g.val(xs[0]);
  int rank = first.rank();
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  std::vector<int64_t> shape = first.shape();
  int64_t total = 0;
  std::vector<int64_t> lens;
  for (int id : xs) {
    const Tensor<S>& t = g.val(id);
    if (t.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && t.dim(i) != shape[static_cast<size_t>(i)])
        throw std::invalid_argument("concat: shape mismatch");
    lens.push_back(t.dim(axis));
    total += t.dim(axis);
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[static_cast<size_t>(i)];
  shape[static_cast<size_t>(axis)] = total;

  Tensor<S> y(shape);
  S* dst = y.data();
  int64_t off = 0;
  for (size_t j = 0; j < xs.size(); ++j) {
    const S* src = g.val(xs[j]).data();
    int64_t dj = lens[j];
    for (int64_t o = 0; o < outer; ++o)
      std::copy(src + o * dj * inner, src + (o + 1) * dj * inner, dst + (o * total + off) * inner);
    off += dj;
  }
  std::vector<int> xs_copy = xs;
  return g.make(std::move(y), [xs_copy, lens, outer, inner, total](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    const S* s = gy.data();
    int64_t off2 = 0;
    for (size_t j = 0; j < xs_copy.size(); ++j) {
      Tensor<S>& ga = gr.grad(xs_copy[j]);
      S* d = ga.data();
      int64_t dj = lens[j];
      for (int64_t o = 0; o < outer; ++o) {
        const S* srow = s + (o * total + off2) * inner;
        S* drow = d + o * dj * inner;
        for (int64_t i = 0; i < dj * inner; ++i) drow[i] += srow[i];
      }
      off2 += dj;
    }
  });
}

// Repeats a size-1 axis; the backward pass sums over the copies.
template <typename S>
int tile_axis(Graph<S>& g, int a, int axis, int64_t times) {
  const Tensor<S>& x = g.val(a);
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("tile_axis: bad axis");
  if (x.dim(axis) != 1) throw std::invalid_argument("tile_axis: axis extent must be 1");
  std::vector<int64_t> shape = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
  shape[static_cast<size_t>(axis)] = times;

  Tensor<S> y(shape);
  const S* src = x.data();
  S* dst = y.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t t = 0; t < times; ++t)
      std::copy(src + o * inner, src + (o + 1) * inner, dst + (o * times + t) * inner);
  return g.make(std::move(y), [a, outer, inner, times](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    S* d = ga.data();
    const S* s = gy.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t t = 0; t < times; ++t) {
        const S* srow = s + (o * times + t) * inner;
        S* drow = d + o * inner;
        for (int64_t i = 0; i < inner; ++i) drow[i] += srow[i];
      }
  });
}

// Zero padding along one axis.
template <typename S>
int pad_axis(Graph<S>& g, int a, int axis, int64_t left, int64_t right) {
  const Tensor<S>& x = g.val(a);
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("pad_axis: bad axis");
  std::vector<int64_t> shape = x.shape();
  int64_t d_in = shape[static_cast<size_t>(axis)];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
  int64_t d_out = d_in + left + right;
  shape[static_cast<size_t>(axis)] = d_out;

  Tensor<S> y(shape);
  const S* src = x.data();
  S* dst = y.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(src + o * d_in * inner, src + (o + 1) * d_in * inner, dst + (o * d_out + left) * inner);
  return g.make(std::move(y), [a, left, d_in, d_out, outer, inner](Graph<S>& gr, int self) {
    Tensor<S>& ga = gr.grad(a);
    const Tensor<S>& gy = gr.grad(self);
    S* d = ga.data();
    const S* s = gy.data();
    for (int64_t o = 0; o < outer; ++o) {
      const S* srow = s + (o * d_out + left) * inner;
      S* drow = d + o * d_in * inner;
      for (int64_t i = 0; i < d_in * inner; ++i) drow[i] += srow[i];
    }
  });
}

// ---- dense algebra ----

template <typename S>
int matmul(Graph<S>& g, int a, int b) {
  const Tensor<S>& va = g.val(a);
  const Tensor<S>& vb = g.val(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
    throw std::invalid_argument("matmul: bad shapes " + va.shape_str() + " x " + vb.shape_str());
  int64_t m = va.dim(0), k = va.dim(1), n = vb.dim(1);
  Tensor<S> y({m, n});
  EMap<S>(y.data(), m, n) = ECMap<S>(va.data(), m, k) * ECMap<S>(vb.data(), k, n);
  return g.make(std::move(y), [a, b, m, k, n](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    ECMap<S> gym(gy.data(), m, n);
    ECMap<S> vam(gr.val(a).data(), m, k);
    ECMap<S> vbm(gr.val(b).data(), k, n);
    EMap<S>(gr.grad(a).data(), m, k).noalias() += gym * vbm.transpose();
    EMap<S>(gr.grad(b).data(), k, n).noalias() += vam.transpose() * gym;
  });
}

// Rows of x are samples: y = x W^T + b, with W [out, in], b [out].
template <typename S>
int linear(Graph<S>& g, int x, int W, int b) {
  const Tensor<S>& vx = g.val(x);
  const Tensor<S>& vw = g.val(W);
  if (vx.rank() != 2 || vw.rank() != 2 || vx.dim(1) != vw.dim(1))
    throw std::invalid_argument("linear: bad shapes " + vx.shape_str() + ", W " + vw.shape_str());
  int64_t n = vx.dim(0), in = vx.dim(1), out = vw.dim(0);
  const Tensor<S>& vb = g.val(b);
  if (vb.size() != out) throw std::invalid_argument("linear: bad bias");
  Tensor<S> y({n, out});
  EMap<S> ym(y.data(), n, out);
  ym.noalias() = ECMap<S>(vx.data(), n, in) * ECMap<S>(vw.data(), out, in).transpose();
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(vb.data(), out);
  return g.make(std::move(y), [x, W, b, n, in, out](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    ECMap<S> gym(gy.data(), n, out);
    EMap<S>(gr.grad(x).data(), n, in).noalias() += gym * ECMap<S>(gr.val(W).data(), out, in);
    EMap<S>(gr.grad(W).data(), out, in).noalias() +=
        gym.transpose() * ECMap<S>(gr.val(x).data(), n, in);
    Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(gr.grad(b).data(), out) += gym.colwise().sum();
  });
}

// ---- activations ----

// Per-channel slope along the given axis; slopes has that axis's extent.
template <typename S>
int prelu(Graph<S>& g, int x, int slopes, int channel_axis) {
  const Tensor<S>& vx = g.val(x);
  const Tensor<S>& va = g.val(slopes);
  if (channel_axis < 0 || channel_axis >= vx.rank()) throw std::invalid_argument("prelu: bad axis");
  int64_t c = vx.dim(channel_axis);
  if (va.size() != c) throw std::invalid_argument("prelu: slope count mismatch");
  int64_t inner = 1;
  for (int i = channel_axis + 1; i < vx.rank(); ++i) inner *= vx.dim(i);
  int64_t outer = vx.size() / (c * inner);

  Tensor<S> y(vx.shape());
  const S* sx = vx.data();
  const S* sa = va.data();
  S* dy = y.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t ch = 0; ch < c; ++ch) {
      S slope = sa[ch];
      const S* row = sx + (o * c + ch) * inner;
      S* out = dy + (o * c + ch) * inner;
      for (int64_t i = 0; i < inner; ++i) out[i] = row[i] > S(0) ? row[i] : slope * row[i];
    }
  return g.make(std::move(y), [x, slopes, c, inner, outer](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    const Tensor<S>& vx2 = gr.val(x);
    const Tensor<S>& va2 = gr.val(slopes);
    Tensor<S>& gx = gr.grad(x);
    Tensor<S>& ga = gr.grad(slopes);
    const S* sy = gy.data();
    const S* sx2 = vx2.data();
    const S* sa2 = va2.data();
    S* dx = gx.data();
    S* da = ga.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t ch = 0; ch < c; ++ch) {
        S slope = sa2[ch];
        S acc = S(0);
        const S* xrow = sx2 + (o * c + ch) * inner;
        const S* grow = sy + (o * c + ch) * inner;
        S* drow = dx + (o * c + ch) * inner;
        for (int64_t i = 0; i < inner; ++i) {
          if (xrow[i] > S(0)) {
            drow[i] += grow[i];
          } else {
            drow[i] += slope * grow[i];
            acc += grow[i] * xrow[i];
          }
        }
        da[ch] += acc;
      }
  });
}

// ---- normalization ----

// Normalizes over the axes whose bits are set in norm_mask; statistics are
// shared within each group (fixed coordinates on unmasked axes). gamma and
// beta live on affine_axis. eps 1e-5 everywhere in this codebase.
template <typename S>
int layer_norm(Graph<S>& g, int x, uint32_t norm_mask, int gamma, int beta, int affine_axis,
               S eps = S(1e-5)) {
  const Tensor<S>& vx = g.val(x);
  int rank = vx.rank();
  if (affine_axis < 0 || affine_axis >= rank) throw std::invalid_argument("layer_norm: bad axis");
  int64_t c = vx.dim(affine_axis);
  if (g.val(gamma).size() != c || g.val(beta).size() != c)
    throw std::invalid_argument("layer_norm: affine size mismatch");

  std::vector<int64_t> st = detail::strides_of(vx.shape());
  int64_t n_groups = 1;
  // compact group ids follow lexicographic order of unmasked coords
  std::vector<int64_t> gst(static_cast<size_t>(rank), 0);
  for (int i = rank - 1; i >= 0; --i) {
    if (!(norm_mask & (1u << i))) {
      gst[static_cast<size_t>(i)] = n_groups;
      n_groups *= vx.dim(i);
    }
  }
  int64_t group_size = vx.size() / n_groups;
  if (group_size < 1) throw std::invalid_argument("layer_norm: empty group");

  int64_t n = vx.size();
  int64_t chan_stride = st[static_cast<size_t>(affine_axis)];
  auto locate = [st, gst, rank, chan_stride, c](int64_t e, int64_t& gid, int64_t& chan) {
    int64_t rem = e;
    gid = 0;
    for (int i = 0; i < rank; ++i) {
      int64_t coord = rem / st[static_cast<size_t>(i)];
      rem -= coord * st[static_cast<size_t>(i)];
      gid += coord * gst[static_cast<size_t>(i)];
    }
    chan = (e / chan_stride) % c;
  };

  std::vector<S> mean(static_cast<size_t>(n_groups), S(0));
  std::vector<S> inv_std(static_cast<size_t>(n_groups), S(0));
  const S* sx = vx.data();
  int64_t gid, chan;
  for (int64_t e = 0; e < n; ++e) {
    locate(e, gid, chan);
    mean[static_cast<size_t>(gid)] += sx[e];
  }
  for (auto& m : mean) m /= static_cast<S>(group_size);
  for (int64_t e = 0; e < n; ++e) {
    locate(e, gid, chan);
    S d = sx[e] - mean[static_cast<size_t>(gid)];
    inv_std[static_cast<size_t>(gid)] += d * d;
  }
  for (auto& v : inv_std) v = S(1) / std::sqrt(v / static_cast<S>(group_size) + eps);

  Tensor<S> xhat(vx.shape());
  Tensor<S> y(vx.shape());
  const S* sg = g.val(gamma).data();
  const S* sb = g.val(beta).data();
  for (int64_t e = 0; e < n; ++e) {
    locate(e, gid, chan);
    S h = (sx[e] - mean[static_cast<size_t>(gid)]) * inv_std[static_cast<size_t>(gid)];
    xhat[e] = h;
    y[e] = h * sg[chan] + sb[chan];
  }

  return g.make(std::move(y), [x, gamma, beta, xhat, inv_std, locate, n_groups,
                               group_size](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    Tensor<S>& gx = gr.grad(x);
    Tensor<S>& gg = gr.grad(gamma);
    Tensor<S>& gb = gr.grad(beta);
    const S* sgm = gr.val(gamma).data();
    int64_t n2 = gy.size();
    // dL/dxhat = gy * gamma; reduce per group for the mean terms
    std::vector<S> sum_d(static_cast<size_t>(n_groups), S(0));
    std::vector<S> sum_dh(static_cast<size_t>(n_groups), S(0));
    int64_t gid2, chan2;
    for (int64_t e = 0; e < n2; ++e) {
      locate(e, gid2, chan2);
      S dh = gy[e] * sgm[chan2];
      sum_d[static_cast<size_t>(gid2)] += dh;
      sum_dh[static_cast<size_t>(gid2)] += dh * xhat[e];
      gg[chan2] += gy[e] * xhat[e];
      gb[chan2] += gy[e];
    }
    S inv_m = S(1) / static_cast<S>(group_size);
    for (int64_t e = 0; e < n2; ++e) {
      locate(e, gid2, chan2);
      S dh = gy[e] * sgm[chan2];
      gx[e] += inv_std[static_cast<size_t>(gid2)] *
               (dh - inv_m * sum_d[static_cast<size_t>(gid2)] -
                xhat[e] * inv_m * sum_dh[static_cast<size_t>(gid2)]);
    }
  });
}

// ---- softmax / losses ----

// Row-wise softmax of a 2-D tensor.
template <typename S>
int softmax_rows(Graph<S>& g, int x) {
  const Tensor<S>& vx = g.val(x);
  if (vx.rank() != 2) throw std::invalid_argument("softmax_rows: want 2-D");
  int64_t r = vx.dim(0), c = vx.dim(1);
  Tensor<S> y(vx.shape());
  for (int64_t i = 0; i < r; ++i) {
    const S* row = vx.data() + i * c;
    S* out = y.data() + i * c;
    S mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    S sum = S(0);
    for (int64_t j = 0; j < c; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    for (int64_t j = 0; j < c; ++j) out[j] /= sum;
  }
  return g.make(std::move(y), [x, r, c](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    const Tensor<S>& vy = gr.val(self);
    Tensor<S>& gx = gr.grad(x);
    for (int64_t i = 0; i < r; ++i) {
      const S* yr = vy.data() + i * c;
      const S* gr2 = gy.data() + i * c;
      S* dx = gx.data() + i * c;
      S dot = S(0);
      for (int64_t j = 0; j < c; ++j) dot += yr[j] * gr2[j];
      for (int64_t j = 0; j < c; ++j) dx[j] += yr[j] * (gr2[j] - dot);
    }
  });
}

// Softmax cross-entropy of a logit vector against an integer label.
template <typename S>
int cross_entropy(Graph<S>& g, int logits, int64_t label) {
  const Tensor<S>& vx = g.val(logits);
  int64_t n = vx.size();
  if (label < 0 || label >= n) throw std::out_of_range("cross_entropy: label out of range");
  S mx = vx[0];
  for (int64_t j = 1; j < n; ++j) mx = std::max(mx, vx[j]);
  S lse = S(0);
  for (int64_t j = 0; j < n; ++j) lse += std::exp(vx[j] - mx);
  lse = std::log(lse) + mx;
  Tensor<S> y = Tensor<S>::scalar(lse - vx[label]);
  return g.make(std::move(y), [logits, label, lse](Graph<S>& gr, int self) {
    S go = gr.grad(self)[0];
    const Tensor<S>& vx2 = gr.val(logits);
    Tensor<S>& gx = gr.grad(logits);
    for (int64_t j = 0; j < vx2.size(); ++j) {
      S p = std::exp(vx2[j] - lse);
      gx[j] += go * (p - (j == label ? S(1) : S(0)));
    }
  });
}

template <typename S>
int sum_all(Graph<S>& g, int x) {
  const Tensor<S>& vx = g.val(x);
  S acc = S(0);
  for (int64_t i = 0; i < vx.size(); ++i) acc += vx[i];
  return g.make(Tensor<S>::scalar(acc), [x](Graph<S>& gr, int self) {
    S go = gr.grad(self)[0];
    Tensor<S>& gx = gr.grad(x);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

template <typename S>
int mean_all(Graph<S>& g, int x) {
  int64_t n = g.val(x).size();
  return scale(g, sum_all(g, x), S(1) / static_cast<S>(n));
}

// Mean over the masked axes keeping the complement. Used by pooling.
template <typename S>
int mean_axis(Graph<S>& g, int x, int axis) {
  const Tensor<S>& vx = g.val(x);
  if (axis < 0 || axis >= vx.rank()) throw std::invalid_argument("mean_axis: bad axis");
  std::vector<int64_t> shape = vx.shape();
  int64_t d = shape[static_cast<size_t>(axis)];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < vx.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
  shape.erase(shape.begin() + axis);
  if (shape.empty()) shape.push_back(1);

  Tensor<S> y(shape);
  const S* src = vx.data();
  S* dst = y.data();
  S inv = S(1) / static_cast<S>(d);
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < inner; ++i) {
      S acc = S(0);
      for (int64_t k = 0; k < d; ++k) acc += src[(o * d + k) * inner + i];
      dst[o * inner + i] = acc * inv;
    }
  return g.make(std::move(y), [x, d, outer, inner, inv](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    Tensor<S>& gx = gr.grad(x);
    const S* s = gy.data();
    S* dptr = gx.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) {
        S v = s[o * inner + i] * inv;
        for (int64_t k = 0; k < d; ++k) dptr[(o * d + k) * inner + i] += v;
      }
  });
}

// Adaptive average pooling over the last axis to out_len bins, matching the
// floor/ceil bin edges convention.
template <typename S>
int adaptive_avg_pool_last(Graph<S>& g, int x, int64_t out_len) {
  const Tensor<S>& vx = g.val(x);
  int rank = vx.rank();
  int64_t L = vx.dim(rank - 1);
  int64_t rows = vx.size() / L;
  std::vector<int64_t> shape = vx.shape();
  shape[static_cast<size_t>(rank - 1)] = out_len;

  std::vector<int64_t> lo(static_cast<size_t>(out_len)), hi(static_cast<size_t>(out_len));
  for (int64_t i = 0; i < out_len; ++i) {
    lo[static_cast<size_t>(i)] = (i * L) / out_len;
    hi[static_cast<size_t>(i)] = ((i + 1) * L + out_len - 1) / out_len;
  }

  Tensor<S> y(shape);
  const S* src = vx.data();
  S* dst = y.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t i = 0; i < out_len; ++i) {
      S acc = S(0);
      for (int64_t k = lo[static_cast<size_t>(i)]; k < hi[static_cast<size_t>(i)]; ++k)
        acc += src[r * L + k];
      dst[r * out_len + i] = acc / static_cast<S>(hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
    }
  return g.make(std::move(y), [x, rows, L, out_len, lo, hi](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    Tensor<S>& gx = gr.grad(x);
    const S* s = gy.data();
    S* d = gx.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t i = 0; i < out_len; ++i) {
        S v = s[r * out_len + i] / static_cast<S>(hi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]);
        for (int64_t k = lo[static_cast<size_t>(i)]; k < hi[static_cast<size_t>(i)]; ++k)
          d[r * L + k] += v;
      }
  });
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_GRAPH_HPP_
