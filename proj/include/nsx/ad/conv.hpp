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

#ifndef NSX_AD_CONV_HPP_
#define NSX_AD_CONV_HPP_

#include <stdexcept>
#include <vector>

#include "nsx/ad/graph.hpp"

namespace nsx {
namespace ad {

namespace detail {

struct ConvGeom {
  int64_t C, H, W;
  int kh, kw, sh, sw, ph, pw;
  int64_t OH, OW;
};

inline ConvGeom conv_geom(int64_t C, int64_t H, int64_t W, int kh, int kw, int sh, int sw, int ph,
                          int pw) {
  ConvGeom gm{C, H, W, kh, kw, sh, sw, ph, pw, 0, 0};
  gm.OH = (H + 2 * ph - kh) / sh + 1;
  gm.OW = (W + 2 * pw - kw) / sw + 1;
  if (gm.OH < 1 || gm.OW < 1) throw std::invalid_argument("conv: kernel larger than padded input");
  return gm;
}

// col is [C*kh*kw, OH*OW], feature index (c*kh + i)*kw + j.
template <typename S>
void im2col(const S* x, const ConvGeom& gm, S* col) {
  int64_t spatial = gm.OH * gm.OW;
  for (int64_t c = 0; c < gm.C; ++c)
    for (int i = 0; i < gm.kh; ++i)
      for (int j = 0; j < gm.kw; ++j) {
        S* row = col + ((c * gm.kh + i) * gm.kw + j) * spatial;
        for (int64_t oh = 0; oh < gm.OH; ++oh) {
          int64_t h = oh * gm.sh + i - gm.ph;
          if (h < 0 || h >= gm.H) {
            for (int64_t ow = 0; ow < gm.OW; ++ow) row[oh * gm.OW + ow] = S(0);
            continue;
          }
          const S* src = x + (c * gm.H + h) * gm.W;
          for (int64_t ow = 0; ow < gm.OW; ++ow) {
            int64_t w = ow * gm.sw + j - gm.pw;
            row[oh * gm.OW + ow] = (w < 0 || w >= gm.W) ? S(0) : src[w];
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename S>
void col2im(const S* col, const ConvGeom& gm, S* x) {
  int64_t spatial = gm.OH * gm.OW;
  for (int64_t c = 0; c < gm.C; ++c)
    for (int i = 0; i < gm.kh; ++i)
      for (int j = 0; j < gm.kw; ++j) {
        const S* row = col + ((c * gm.kh + i) * gm.kw + j) * spatial;
        for (int64_t oh = 0; oh < gm.OH; ++oh) {
          int64_t h = oh * gm.sh + i - gm.ph;
          if (h < 0 || h >= gm.H) continue;
          S* dst = x + (c * gm.H + h) * gm.W;
          for (int64_t ow = 0; ow < gm.OW; ++ow) {
            int64_t w = ow * gm.sw + j - gm.pw;
            if (w >= 0 && w < gm.W) dst[w] += row[oh * gm.OW + ow];
          }
        }
      }
}

}  // namespace detail

// x [Cin, H, W], weight [Cout, Cin, kh, kw], bias [Cout] -> [Cout, OH, OW].
template <typename S>
int conv2d(Graph<S>& g, int x, int W, int b, int sh, int sw, int ph, int pw) {
  const Tensor<S>& vx = g.val(x);
  const Tensor<S>& vw = g.val(W);
  if (vx.rank() != 3 || vw.rank() != 4 || vw.dim(1) != vx.dim(0))
    throw std::invalid_argument("conv2d: bad shapes " + vx.shape_str() + ", W " + vw.shape_str());
  int64_t cout = vw.dim(0);
  if (g.val(b).size() != cout) throw std::invalid_argument("conv2d: bad bias");
  int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
  detail::ConvGeom gm = detail::conv_geom(vx.dim(0), vx.dim(1), vx.dim(2), kh, kw, sh, sw, ph, pw);

  int64_t feat = gm.C * kh * kw, spatial = gm.OH * gm.OW;
  Tensor<S> col({feat, spatial});
  detail::im2col(vx.data(), gm, col.data());
  Tensor<S> y({cout, gm.OH, gm.OW});
  EMap<S> ym(y.data(), cout, spatial);
  ym.noalias() = ECMap<S>(vw.data(), cout, feat) * ECMap<S>(col.data(), feat, spatial);
  const S* pb = g.val(b).data();
  for (int64_t c = 0; c < cout; ++c) ym.row(c).array() += pb[c];

  return g.make(std::move(y), [x, W, b, gm, cout, feat, spatial, col](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    ECMap<S> gym(gy.data(), cout, spatial);
    EMap<S>(gr.grad(W).data(), cout, feat).noalias() +=
        gym * ECMap<S>(col.data(), feat, spatial).transpose();
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(gr.grad(b).data(), cout) += gym.rowwise().sum();
    Tensor<S> dcol({feat, spatial});
    EMap<S>(dcol.data(), feat, spatial).noalias() =
        ECMap<S>(gr.val(W).data(), cout, feat).transpose() * gym;
    detail::col2im(dcol.data(), gm, gr.grad(x).data());
  });
}

// x [Cin, H, W], weight [Cin, Cout, kh, kw], bias [Cout] ->
// [Cout, (H-1)sh - 2ph + kh + oph, (W-1)sw - 2pw + kw + opw].
template <typename S>
int conv_transpose2d(Graph<S>& g, int x, int W, int b, int sh, int sw, int ph, int pw, int oph = 0,
                     int opw = 0) {
  const Tensor<S>& vx = g.val(x);
  const Tensor<S>& vw = g.val(W);
  if (vx.rank() != 3 || vw.rank() != 4 || vw.dim(0) != vx.dim(0))
    throw std::invalid_argument("conv_transpose2d: bad shapes " + vx.shape_str() + ", W " +
                                vw.shape_str());
  int64_t cin = vx.dim(0), cout = vw.dim(1);
  if (g.val(b).size() != cout) throw std::invalid_argument("conv_transpose2d: bad bias");
  int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
  int64_t H = vx.dim(1), Wd = vx.dim(2);
  int64_t OH = (H - 1) * sh - 2 * ph + kh + oph;
  int64_t OW = (Wd - 1) * sw - 2 * pw + kw + opw;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv_transpose2d: empty output");
  // the adjoint geometry: a conv over the output grid producing the input grid
  detail::ConvGeom gm{cout, OH, OW, kh, kw, sh, sw, ph, pw, H, Wd};

  int64_t feat = cout * kh * kw, spatial = H * Wd;
  Tensor<S> col({feat, spatial});
  EMap<S>(col.data(), feat, spatial).noalias() =
      ECMap<S>(vw.data(), cin, feat).transpose() * ECMap<S>(vx.data(), cin, spatial);
  Tensor<S> y({cout, OH, OW});
  detail::col2im(col.data(), gm, y.data());
  const S* pb = g.val(b).data();
  S* py = y.data();
  for (int64_t c = 0; c < cout; ++c)
    for (int64_t i = 0; i < OH * OW; ++i) py[c * OH * OW + i] += pb[c];

  return g.make(std::move(y), [x, W, b, gm, cin, cout, feat, spatial, OH, OW](Graph<S>& gr, int self) {
    const Tensor<S>& gy = gr.grad(self);
    Tensor<S> dcol({feat, spatial});
    detail::im2col(gy.data(), gm, dcol.data());
    ECMap<S> dcolm(dcol.data(), feat, spatial);
    EMap<S>(gr.grad(x).data(), cin, spatial).noalias() +=
        ECMap<S>(gr.val(W).data(), cin, feat) * dcolm;
    EMap<S>(gr.grad(W).data(), cin, feat).noalias() +=
        ECMap<S>(gr.val(x).data(), cin, spatial) * dcolm.transpose();
    const S* s = gy.data();
    S* db = gr.grad(b).data();
    for (int64_t c = 0; c < cout; ++c) {
      S acc = S(0);
      for (int64_t i = 0; i < OH * OW; ++i) acc += s[c * OH * OW + i];
      db[c] += acc;
    }
  });
}

// Differentiable im2col: x [C, H, W] -> [C*kh*kw, OH*OW].
template <typename S>
int unfold2d(Graph<S>& g, int x, int kh, int kw, int sh, int sw, int ph = 0, int pw = 0) {
  const Tensor<S>& vx = g.val(x);
  if (vx.rank() != 3) throw std::invalid_argument("unfold2d: want 3-D");
  detail::ConvGeom gm = detail::conv_geom(vx.dim(0), vx.dim(1), vx.dim(2), kh, kw, sh, sw, ph, pw);
  Tensor<S> y({gm.C * kh * kw, gm.OH * gm.OW});
  detail::im2col(vx.data(), gm, y.data());
  return g.make(std::move(y), [x, gm](Graph<S>& gr, int self) {
    detail::col2im(gr.grad(self).data(), gm, gr.grad(x).data());
  });
}

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_CONV_HPP_
