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

#ifndef NSX_AD_LAYERS_HPP_
#define NSX_AD_LAYERS_HPP_

#include <string>
#include <vector>

#include "nsx/ad/conv.hpp"
#include "nsx/ad/graph.hpp"
#include "nsx/ad/init.hpp"
#include "nsx/ad/rnn.hpp"

namespace nsx {
namespace ad {

// Layers bind parameter indices in a store to a forward rule. apply() adds
// fresh param nodes per graph; repeated applies share the same gradients.

template <typename S>
struct Conv2dLayer {
  int W = -1, b = -1;
  int sh = 1, sw = 1, ph = 0, pw = 0;

  static Conv2dLayer create(ParamStore<S>& ps, const std::string& name, int64_t in_ch,
                            int64_t out_ch, int kh, int kw, int sh, int sw, int ph, int pw,
                            Rng& rng) {
    Conv2dLayer l;
    l.sh = sh;
    l.sw = sw;
    l.ph = ph;
    l.pw = pw;
    int64_t fan_in = in_ch * kh * kw;
    l.W = ps.add(name + ".weight", kaiming_uniform<S>({out_ch, in_ch, kh, kw}, fan_in, rng));
    l.b = ps.add(name + ".bias", kaiming_uniform<S>({out_ch}, fan_in, rng));
    return l;
  }

  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return conv2d(g, x, g.param(ps.at(W)), g.param(ps.at(b)), sh, sw, ph, pw);
  }
};

template <typename S>
struct ConvT2dLayer {
  int W = -1, b = -1;
  int sh = 1, sw = 1, ph = 0, pw = 0, oph = 0, opw = 0;

  static ConvT2dLayer create(ParamStore<S>& ps, const std::string& name, int64_t in_ch,
                             int64_t out_ch, int kh, int kw, int sh, int sw, int ph, int pw,
                             int oph, int opw, Rng& rng) {
    ConvT2dLayer l;
    l.sh = sh;
    l.sw = sw;
    l.ph = ph;
    l.pw = pw;
    l.oph = oph;
    l.opw = opw;
    int64_t fan_in = in_ch * kh * kw;
    l.W = ps.add(name + ".weight", kaiming_uniform<S>({in_ch, out_ch, kh, kw}, fan_in, rng));
    l.b = ps.add(name + ".bias", kaiming_uniform<S>({out_ch}, fan_in, rng));
    return l;
  }

  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return conv_transpose2d(g, x, g.param(ps.at(W)), g.param(ps.at(b)), sh, sw, ph, pw, oph, opw);
  }
};

template <typename S>
struct LinearLayer {
  int W = -1, b = -1;

  static LinearLayer create(ParamStore<S>& ps, const std::string& name, int64_t in, int64_t out,
                            Rng& rng) {
    LinearLayer l;
    l.W = ps.add(name + ".weight", kaiming_uniform<S>({out, in}, in, rng));
    l.b = ps.add(name + ".bias", kaiming_uniform<S>({out}, in, rng));
    return l;
  }

  // x [n, in] -> [n, out]
  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return linear(g, x, g.param(ps.at(W)), g.param(ps.at(b)));
  }
};

template <typename S>
struct PReluLayer {
  int a = -1;
  int channel_axis = 0;

  static PReluLayer create(ParamStore<S>& ps, const std::string& name, int64_t channels,
                           int channel_axis) {
    PReluLayer l;
    l.channel_axis = channel_axis;
    l.a = ps.add(name + ".slope", Tensor<S>::full({channels}, S(0.25)));
    return l;
  }

  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return prelu(g, x, g.param(ps.at(a)), channel_axis);
  }
};

template <typename S>
struct LayerNormLayer {
  int gamma = -1, beta = -1;
  uint32_t norm_mask = 0;
  int affine_axis = 0;

  static LayerNormLayer create(ParamStore<S>& ps, const std::string& name, int64_t channels,
                               uint32_t norm_mask, int affine_axis) {
    LayerNormLayer l;
    l.norm_mask = norm_mask;
    l.affine_axis = affine_axis;
    l.gamma = ps.add(name + ".gamma", Tensor<S>::full({channels}, S(1)));
    l.beta = ps.add(name + ".beta", Tensor<S>({channels}));
    return l;
  }

  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return layer_norm(g, x, norm_mask, g.param(ps.at(gamma)), g.param(ps.at(beta)), affine_axis,
                      S(1e-5));
  }
};

template <typename S>
struct BlstmLayer {
  int Wf = -1, Uf = -1, bf = -1, Wb = -1, Ub = -1, bb = -1;

  static BlstmLayer create(ParamStore<S>& ps, const std::string& name, int64_t in, int64_t H,
                           Rng& rng) {
    BlstmLayer l;
    l.Wf = ps.add(name + ".fwd.W", kaiming_uniform<S>({4 * H, in}, in, rng));
    l.Uf = ps.add(name + ".fwd.U", orthogonal_gates<S>(H, rng));
    l.bf = ps.add(name + ".fwd.b", Tensor<S>({4 * H}));
    l.Wb = ps.add(name + ".bwd.W", kaiming_uniform<S>({4 * H, in}, in, rng));
    l.Ub = ps.add(name + ".bwd.U", orthogonal_gates<S>(H, rng));
    l.bb = ps.add(name + ".bwd.b", Tensor<S>({4 * H}));
    return l;
  }

  // x [L, B, in] -> [L, B, 2H]
  int apply(Graph<S>& g, ParamStore<S>& ps, int x) const {
    return blstm(g, x, g.param(ps.at(Wf)), g.param(ps.at(Uf)), g.param(ps.at(bf)),
                 g.param(ps.at(Wb)), g.param(ps.at(Ub)), g.param(ps.at(bb)));
  }
};

}  // namespace ad
}  // namespace nsx

#endif  // NSX_AD_LAYERS_HPP_
