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

#ifndef NSX_AD_RNN_HPP_
#define NSX_AD_RNN_HPP_

#include <stdexcept>
#include <vector>

#include "nsx/ad/graph.hpp"

namespace nsx {
namespace ad {

namespace detail {

template <typename S>
struct LstmTrace {
  // activated gates i,f,q,o packed [L, B, 4H]; cell states [L, B, H];
  // hidden states [L, B, H]
  Tensor<S> gates, c, h;
};

// One direction over time-major input. step_order maps pass index to
// absolute time so the same loop runs both directions.
template <typename S>
LstmTrace<S> lstm_dir_forward(const Tensor<S>& x, const Tensor<S>& W, const Tensor<S>& U,
                              const Tensor<S>& b, int64_t H, bool reverse) {
  int64_t L = x.dim(0), B = x.dim(1), In = x.dim(2);
  LstmTrace<S> tr{Tensor<S>({L, B, 4 * H}), Tensor<S>({L, B, H}), Tensor<S>({L, B, H})};

  // all input projections in one GEMM
  Tensor<S> zx({L, B, 4 * H});
  EMap<S>(zx.data(), L * B, 4 * H).noalias() =
      ECMap<S>(x.data(), L * B, In) * ECMap<S>(W.data(), 4 * H, In).transpose();

  EMat<S> h_prev = EMat<S>::Zero(B, H);
  EMat<S> c_prev = EMat<S>::Zero(B, H);
  ECMap<S> Um(U.data(), 4 * H, H);
  Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> bm(b.data(), 4 * H);

  for (int64_t s = 0; s < L; ++s) {
    int64_t t = reverse ? L - 1 - s : s;
    EMat<S> z = EMap<S>(zx.data() + t * B * 4 * H, B, 4 * H);
    z.noalias() += h_prev * Um.transpose();
    z.rowwise() += bm;
    S* gt = tr.gates.data() + t * B * 4 * H;
    S* ct = tr.c.data() + t * B * H;
    S* ht = tr.h.data() + t * B * H;
    for (int64_t r = 0; r < B; ++r)
      for (int64_t k = 0; k < H; ++k) {
        S zi = z(r, k), zf = z(r, H + k), zq = z(r, 2 * H + k), zo = z(r, 3 * H + k);
        S gi = S(1) / (S(1) + std::exp(-zi));
        S gf = S(1) / (S(1) + std::exp(-zf));
        S gq = std::tanh(zq);
        S go = S(1) / (S(1) + std::exp(-zo));
        S cc = gf * c_prev(r, k) + gi * gq;
        S hh = go * std::tanh(cc);
        gt[r * 4 * H + k] = gi;
        gt[r * 4 * H + H + k] = gf;
        gt[r * 4 * H + 2 * H + k] = gq;
        gt[r * 4 * H + 3 * H + k] = go;
        ct[r * H + k] = cc;
        ht[r * H + k] = hh;
      }
    h_prev = EMap<S>(ht, B, H);
    c_prev = EMap<S>(ct, B, H);
  }
  return tr;
}

template <typename S>
void lstm_dir_backward(const Tensor<S>& x, const Tensor<S>& W, const Tensor<S>& U,
                       const LstmTrace<S>& tr, const Tensor<S>& dh_out, bool reverse, Tensor<S>& dx,
                       Tensor<S>& dW, Tensor<S>& dU, Tensor<S>& db) {
  int64_t L = x.dim(0), B = x.dim(1), In = x.dim(2);
  int64_t H = tr.c.dim(2);
  EMat<S> dh_next = EMat<S>::Zero(B, H);
  EMat<S> dc = EMat<S>::Zero(B, H);
  EMat<S> dz(B, 4 * H);
  ECMap<S> Um(U.data(), 4 * H, H);
  EMap<S> dUm(dU.data(), 4 * H, H);
  EMap<S> dWm(dW.data(), 4 * H, In);
  Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> dbm(db.data(), 4 * H);

  for (int64_t s = L - 1; s >= 0; --s) {
    int64_t t = reverse ? L - 1 - s : s;
    int64_t tp = reverse ? t + 1 : t - 1;  // previous step in pass order
    const S* gt = tr.gates.data() + t * B * 4 * H;
    const S* ct = tr.c.data() + t * B * H;
    const S* dho = dh_out.data() + t * B * H;
    bool has_prev = s > 0;
    const S* cp = has_prev ? tr.c.data() + tp * B * H : nullptr;

    for (int64_t r = 0; r < B; ++r)
      for (int64_t k = 0; k < H; ++k) {
        S gi = gt[r * 4 * H + k], gf = gt[r * 4 * H + H + k];
        S gq = gt[r * 4 * H + 2 * H + k], go = gt[r * 4 * H + 3 * H + k];
        S tc = std::tanh(ct[r * H + k]);
        S dh = dho[r * H + k] + dh_next(r, k);
        S dcc = dc(r, k) + dh * go * (S(1) - tc * tc);
        S cprev = has_prev ? cp[r * H + k] : S(0);
        dz(r, k) = dcc * gq * gi * (S(1) - gi);
        dz(r, H + k) = dcc * cprev * gf * (S(1) - gf);
        dz(r, 2 * H + k) = dcc * gi * (S(1) - gq * gq);
        dz(r, 3 * H + k) = dh * tc * go * (S(1) - go);
        dc(r, k) = dcc * gf;
      }

    ECMap<S> xt(x.data() + t * B * In, B, In);
    dWm.noalias() += dz.transpose() * xt;
    if (has_prev) {
      ECMap<S> hp(tr.h.data() + tp * B * H, B, H);
      dUm.noalias() += dz.transpose() * hp;
    }
    dbm += dz.colwise().sum();
    EMap<S>(dx.data() + t * B * In, B, In).noalias() += dz * ECMap<S>(W.data(), 4 * H, In);
    dh_next.noalias() = dz * Um;
  }
}

}  // namespace detail

// Bidirectional LSTM over time-major input [L, B, In] -> [L, B, 2H].
// Forward-direction hidden states fill the first H channels. Weights per
// direction: W [4H, In], U [4H, H], b [4H], gate order i,f,g,o.
template <typename S>
int blstm(Graph<S>& g, int x, int Wf, int Uf, int bf, int Wb, int Ub, int bb) {
  const Tensor<S>& vx = g.val(x);
  if (vx.rank() != 3) throw std::invalid_argument("blstm: want [L, B, In]");
  const Tensor<S>& vwf = g.val(Wf);
  if (vwf.rank() != 2 || vwf.dim(1) != vx.dim(2) || vwf.dim(0) % 4 != 0)
    throw std::invalid_argument("blstm: bad forward weight " + vwf.shape_str());
  int64_t H = vwf.dim(0) / 4;
  int64_t L = vx.dim(0), B = vx.dim(1);
  if (g.val(Uf).dim(0) != 4 * H || g.val(Uf).dim(1) != H || g.val(bf).size() != 4 * H ||
      !g.val(Wb).same_shape(vwf) || !g.val(Ub).same_shape(g.val(Uf)) ||
      g.val(bb).size() != 4 * H)
    throw std::invalid_argument("blstm: inconsistent parameter shapes");

  auto trf = detail::lstm_dir_forward(vx, vwf, g.val(Uf), g.val(bf), H, false);
  auto trb = detail::lstm_dir_forward(vx, g.val(Wb), g.val(Ub), g.val(bb), H, true);

  Tensor<S> y({L, B, 2 * H});
  for (int64_t t = 0; t < L; ++t)
    for (int64_t r = 0; r < B; ++r) {
      const S* hf = trf.h.data() + (t * B + r) * H;
      const S* hb = trb.h.data() + (t * B + r) * H;
      S* out = y.data() + (t * B + r) * 2 * H;
      std::copy(hf, hf + H, out);
      std::copy(hb, hb + H, out + H);
    }

  return g.make(std::move(y), [x, Wf, Uf, bf, Wb, Ub, bb, trf, trb, H, L, B](Graph<S>& gr,
                                                                             int self) {
    const Tensor<S>& gy = gr.grad(self);
    Tensor<S> dhf({L, B, H}), dhb({L, B, H});
    for (int64_t t = 0; t < L; ++t)
      for (int64_t r = 0; r < B; ++r) {
        const S* s = gy.data() + (t * B + r) * 2 * H;
        std::copy(s, s + H, dhf.data() + (t * B + r) * H);
        std::copy(s + H, s + 2 * H, dhb.data() + (t * B + r) * H);
      }
    detail::lstm_dir_backward(gr.val(x), gr.val(Wf), gr.val(Uf), trf, dhf, false, gr.grad(x),
                              gr.grad(Wf), gr.grad(Uf), gr.grad(bf));
    detail::lstm_dir_backward(gr.val(x), gr.val(Wb), gr.val(Ub), trb, dhb, true, gr.grad(x),
                              gr.grad(Wb), gr.grad(Ub), gr.grad(bb));
  });
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_RNN_HPP_
